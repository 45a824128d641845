use std::fs::File;
use std::path::Path;

use super::{DatasetId, IngestError, Ingested, RatingEvent, RatingScale};

const HEADER: [&str; 4] = ["userId", "movieId", "rating", "timestamp"];

/// Read a `userId,movieId,rating,timestamp` table.
pub fn read_ratings_table(
    path: &Path,
    dataset: &DatasetId,
    scale: RatingScale,
) -> Result<Ingested<RatingEvent>, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    read_from(file, path, dataset, scale)
}

fn read_from<R: std::io::Read>(
    input: R,
    path: &Path,
    dataset: &DatasetId,
    scale: RatingScale,
) -> Result<Ingested<RatingEvent>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::parse(1, e))?
        .clone();
    if headers.iter().map(str::trim).ne(HEADER.iter().copied()) {
        return Err(IngestError::Header {
            path: path.to_path_buf(),
            expected: HEADER.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut out = Ingested::new();
    for (row, record) in reader.records().enumerate() {
        // header is line 1
        let fallback_line = row + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(fallback_line);
                out.push(line, Err(IngestError::parse(line, e)));
                continue;
            }
        };
        let line = record.position().map(|p| p.line() as usize).unwrap_or(fallback_line);
        out.push(line, parse_row(&record, line, dataset, scale));
    }
    Ok(out)
}

fn parse_row(
    record: &csv::StringRecord,
    line: usize,
    dataset: &DatasetId,
    scale: RatingScale,
) -> Result<RatingEvent, IngestError> {
    if record.len() != HEADER.len() {
        return Err(IngestError::parse(line, format!("expected 4 fields, found {}", record.len())));
    }
    let field = |i: usize| record[i].trim();
    let user = field(0);
    let item = field(1);
    if user.is_empty() {
        return Err(IngestError::MissingField { line, field: "userId" });
    }
    if item.is_empty() {
        return Err(IngestError::MissingField { line, field: "movieId" });
    }
    let score: f64 = field(2)
        .parse()
        .map_err(|_| IngestError::parse(line, format!("rating `{}` is not a number", field(2))))?;
    let score = scale.check(line, score)?;
    let timestamp: u64 = field(3)
        .parse()
        .map_err(|_| IngestError::parse(line, format!("timestamp `{}` is not a nonnegative integer", field(3))))?;
    Ok(RatingEvent {
        user: dataset.scope(user),
        item: dataset.scope(item),
        score,
        timestamp,
        review_text: None,
        summary: None,
    })
}
