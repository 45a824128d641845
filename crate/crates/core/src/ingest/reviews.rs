use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::{DatasetId, IngestError, Ingested, ItemRecord, RatingEvent, RatingScale, ScopedId};

/// Joins reviewerID and reviewerName into one user id. Amazon ids never
/// contain it.
pub const REVIEWER_SEPARATOR: char = '|';

#[derive(Deserialize)]
#[allow(non_snake_case)]
struct RawReview {
    reviewerID: Option<String>,
    asin: Option<String>,
    reviewerName: Option<String>,
    overall: Option<f64>,
    reviewText: Option<String>,
    summary: Option<String>,
    unixReviewTime: Option<u64>,
}

/// Read Amazon review JSON lines. The user id is `reviewerID|reviewerName`
/// (empty name component when the name is missing).
pub fn read_amazon_reviews(
    path: &Path,
    dataset: &DatasetId,
) -> Result<Ingested<RatingEvent>, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    read_from(BufReader::new(file), path, dataset)
}

fn read_from<R: BufRead>(
    input: R,
    path: &Path,
    dataset: &DatasetId,
) -> Result<Ingested<RatingEvent>, IngestError> {
    let mut out = Ingested::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| IngestError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(line_no, parse_line(&line, line_no, dataset));
    }
    Ok(out)
}

fn parse_line(line: &str, line_no: usize, dataset: &DatasetId) -> Result<RatingEvent, IngestError> {
    let raw: RawReview = serde_json::from_str(line).map_err(|e| IngestError::parse(line_no, e))?;
    let reviewer = raw
        .reviewerID
        .ok_or(IngestError::MissingField { line: line_no, field: "reviewerID" })?;
    let asin = raw.asin.ok_or(IngestError::MissingField { line: line_no, field: "asin" })?;
    let overall = raw.overall.ok_or(IngestError::MissingField { line: line_no, field: "overall" })?;
    let score = RatingScale::AMAZON.check(line_no, overall)?;
    let user = format!(
        "{reviewer}{REVIEWER_SEPARATOR}{}",
        raw.reviewerName.as_deref().unwrap_or("")
    );
    Ok(RatingEvent {
        user: dataset.scope(user),
        item: dataset.scope(asin),
        score,
        timestamp: raw.unixReviewTime.unwrap_or(0),
        review_text: raw.reviewText,
        summary: raw.summary,
    })
}

/// Item records for review-only datasets: the description is every review
/// text for the item, in file order, joined by newlines.
pub fn items_from_reviews(events: &[RatingEvent]) -> Vec<ItemRecord> {
    let mut order: Vec<&ScopedId> = Vec::new();
    let mut texts: BTreeMap<&ScopedId, Vec<&str>> = BTreeMap::new();
    for e in events {
        let entry = texts.entry(&e.item).or_insert_with(|| {
            order.push(&e.item);
            Vec::new()
        });
        if let Some(t) = e.review_text.as_deref().filter(|t| !t.trim().is_empty()) {
            entry.push(t);
        }
    }
    order
        .into_iter()
        .map(|item| {
            let parts = &texts[item];
            ItemRecord {
                item: item.clone(),
                title: item.id.to_string(),
                overview: (!parts.is_empty()).then(|| parts.join("\n")),
                vote_count: None,
                vote_average: None,
                external_id: None,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"reviewerID": "A2SUAM1J3GNN3B", "asin": "0000013714", "reviewerName": "J. McDonald", "vote": 5, "style": {"Format": "Hardcover"}, "reviewText": "I bought this for my husband who plays the piano. He is having a wonderful time playing these old hymns. The music is at times hard to read because we think the book was published for singing from more than playing from. Great purchase though!", "overall": 5.0, "summary": "Heavenly Highway Hymns", "unixReviewTime": 1252800000, "reviewTime": "09 13, 2009"}"#;

    fn read(text: &str) -> Ingested<RatingEvent> {
        read_from(text.as_bytes(), Path::new("x.json"), &DatasetId::new("digital_music", "music")).unwrap()
    }

    #[test]
    fn sample_record() {
        let got = read(SAMPLE);
        assert!(got.rejects.is_empty());
        let e = &got.records[0];
        assert_eq!(e.user, ScopedId::new("digital_music", "A2SUAM1J3GNN3B|J. McDonald"));
        assert_eq!(e.item, ScopedId::new("digital_music", "0000013714"));
        assert_eq!(e.score, 5.0);
        assert_eq!(e.timestamp, 1252800000);
        assert_eq!(e.summary.as_deref(), Some("Heavenly Highway Hymns"));
        assert!(e.review_text.as_deref().unwrap().starts_with("I bought this"));
    }

    #[test]
    fn missing_name_leaves_empty_component() {
        let line = SAMPLE.replace(r#""reviewerName": "J. McDonald", "#, "");
        let got = read(&line);
        assert_eq!(got.records[0].user.id.as_str(), "A2SUAM1J3GNN3B|");
    }

    #[test]
    fn missing_time_defaults_to_zero() {
        let got = read(r#"{"reviewerID": "A", "asin": "B", "overall": 3}"#);
        assert_eq!(got.records[0].timestamp, 0);
    }

    #[test]
    fn empty_input() {
        let got = read("");
        assert!(got.records.is_empty() && got.rejects.is_empty());
    }

    #[test]
    fn missing_fields_are_named() {
        let got = read("{\"asin\": \"B\", \"overall\": 3}\n{\"reviewerID\": \"A\", \"overall\": 3}\n{\"reviewerID\": \"A\", \"asin\": \"B\"}\nnot json\n{\"reviewerID\": \"A\", \"asin\": \"B\", \"overall\": 9}\n");
        let fields: Vec<String> = got.rejects.iter().map(|r| r.error.to_string()).collect();
        assert_eq!(got.records.len(), 0);
        assert!(fields[0].contains("reviewerID"));
        assert!(fields[1].contains("asin"));
        assert!(fields[2].contains("overall"));
        assert!(matches!(got.rejects[3].error, IngestError::Parse { line: 4, .. }));
        assert!(matches!(got.rejects[4].error, IngestError::ScaleViolation { line: 5, .. }));
    }

    #[test]
    fn review_texts_become_item_descriptions() {
        let got = read(
            "{\"reviewerID\": \"A\", \"asin\": \"X\", \"overall\": 3, \"reviewText\": \"one\"}\n\
             {\"reviewerID\": \"B\", \"asin\": \"Y\", \"overall\": 3}\n\
             {\"reviewerID\": \"C\", \"asin\": \"X\", \"overall\": 3, \"reviewText\": \"two\"}\n",
        );
        let items = items_from_reviews(&got.records);
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].item.id.as_str(), "X");
        assert_eq!(items[0].overview.as_deref(), Some("one\ntwo"));
        assert_eq!(items[1].overview, None);
    }
}
