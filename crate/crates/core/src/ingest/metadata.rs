use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde_json::Value;

use super::{DatasetId, IngestError, Ingested, ItemRecord};

const ID_KEYS: &[&str] = &["item_id", "itemId", "movieId", "id"];
const TITLE_KEYS: &[&str] = &["title"];
const OVERVIEW_KEYS: &[&str] = &["overview", "description"];
const VOTE_COUNT_KEYS: &[&str] = &["vote_count"];
const VOTE_AVERAGE_KEYS: &[&str] = &["vote_average"];
const EXTERNAL_KEYS: &[&str] = &["external_id", "tmdbId", "tmdb_id"];

/// Read item metadata. Files ending in `.jsonl`, `.ndjson` or `.json` are
/// read as JSON lines; anything else as CSV with a header row.
pub fn read_item_metadata(path: &Path, dataset: &DatasetId) -> Result<Ingested<ItemRecord>, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if matches!(ext, "jsonl" | "ndjson" | "json") {
        read_json_lines(BufReader::new(file), path, dataset)
    } else {
        read_csv(file, path, dataset)
    }
}

/// Field values pulled out of one row, before validation.
#[derive(Default)]
struct RawItem {
    id: Option<String>,
    title: Option<String>,
    overview: Option<String>,
    vote_count: Option<String>,
    vote_average: Option<String>,
    external_id: Option<String>,
}

fn build(raw: RawItem, line: usize, dataset: &DatasetId) -> Result<ItemRecord, IngestError> {
    let id = raw
        .id
        .filter(|s| !s.trim().is_empty())
        .ok_or(IngestError::MissingField { line, field: "item_id" })?;
    let vote_count = match raw.vote_count.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
        None => None,
        Some(s) => Some(s.parse::<u64>().map_err(|_| {
            IngestError::parse(line, format!("vote_count `{s}` is not a nonnegative integer"))
        })?),
    };
    let vote_average = match raw.vote_average.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
        None => None,
        Some(s) => Some(
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::parse(line, format!("vote_average `{s}` is not a number")))?,
        ),
    };
    Ok(ItemRecord {
        item: dataset.scope(id.trim()),
        title: raw.title.unwrap_or_default(),
        overview: raw.overview.filter(|s| !s.is_empty()),
        vote_count,
        vote_average,
        external_id: raw.external_id.filter(|s| !s.is_empty()),
    })
}

fn read_csv<R: Read>(input: R, path: &Path, dataset: &DatasetId) -> Result<Ingested<ItemRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader.headers().map_err(|e| IngestError::parse(1, e))?.clone();
    let column = |keys: &[&str]| headers.iter().position(|h| keys.contains(&h.trim()));
    let id_col = column(ID_KEYS).ok_or_else(|| IngestError::Header {
        path: path.to_path_buf(),
        expected: "an item id column (item_id, itemId, movieId or id)".into(),
        found: headers.iter().collect::<Vec<_>>().join(","),
    })?;
    let cols = [
        Some(id_col),
        column(TITLE_KEYS),
        column(OVERVIEW_KEYS),
        column(VOTE_COUNT_KEYS),
        column(VOTE_AVERAGE_KEYS),
        column(EXTERNAL_KEYS),
    ];

    let mut out = Ingested::new();
    let mut seen = HashSet::new();
    for (row, record) in reader.records().enumerate() {
        let fallback = row + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(fallback);
                out.push(line, Err(IngestError::parse(line, e)));
                continue;
            }
        };
        let line = record.position().map(|p| p.line() as usize).unwrap_or(fallback);
        let get = |c: Option<usize>| c.and_then(|c| record.get(c)).map(str::to_string);
        let raw = RawItem {
            id: get(cols[0]),
            title: get(cols[1]),
            overview: get(cols[2]),
            vote_count: get(cols[3]),
            vote_average: get(cols[4]),
            external_id: get(cols[5]),
        };
        accept(&mut out, &mut seen, line, build(raw, line, dataset));
    }
    Ok(out)
}

fn read_json_lines<R: BufRead>(input: R, path: &Path, dataset: &DatasetId) -> Result<Ingested<ItemRecord>, IngestError> {
    let mut out = Ingested::new();
    let mut seen = HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| IngestError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Value>(&line)
            .map_err(|e| IngestError::parse(line_no, e))
            .and_then(|v| match v {
                Value::Object(map) => {
                    let get = |keys: &[&str]| {
                        keys.iter().find_map(|k| match map.get(*k) {
                            Some(Value::String(s)) => Some(s.clone()),
                            Some(Value::Number(n)) => Some(n.to_string()),
                            _ => None,
                        })
                    };
                    Ok(RawItem {
                        id: get(ID_KEYS),
                        title: get(TITLE_KEYS),
                        overview: get(OVERVIEW_KEYS),
                        vote_count: get(VOTE_COUNT_KEYS),
                        vote_average: get(VOTE_AVERAGE_KEYS),
                        external_id: get(EXTERNAL_KEYS),
                    })
                }
                _ => Err(IngestError::parse(line_no, "expected a JSON object")),
            })
            .and_then(|raw| build(raw, line_no, dataset));
        accept(&mut out, &mut seen, line_no, parsed);
    }
    Ok(out)
}

/// Rejects the second and later rows carrying an id already seen.
fn accept(
    out: &mut Ingested<ItemRecord>,
    seen: &mut HashSet<String>,
    line: usize,
    result: Result<ItemRecord, IngestError>,
) {
    let result = result.and_then(|record| {
        if seen.insert(record.item.id.to_string()) {
            Ok(record)
        } else {
            Err(IngestError::DuplicateId { line, id: record.item.id.to_string() })
        }
    });
    out.push(line, result);
}
