//! Readers for the three source shapes: MovieLens-style rating tables,
//! item metadata (TMDb overviews, vote counts) and Amazon-style review
//! JSON lines. Everything comes out as scoped [`RatingEvent`]s and
//! [`ItemRecord`]s.
//!
//! Malformed rows are skipped and reported through [`Ingested::rejects`];
//! only unreadable files and bad headers abort a read.

mod ids;
mod metadata;
mod ratings;
mod reviews;

use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use ids::{DatasetId, EntityId, IdMap, ScopedId};
pub use metadata::read_item_metadata;
pub use ratings::read_ratings_table;
pub use reviews::{items_from_reviews, read_amazon_reviews, REVIEWER_SEPARATOR};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: bad header, expected `{expected}`, found `{found}`")]
    Header { path: PathBuf, expected: String, found: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: score {score} outside [{min}, {max}]")]
    ScaleViolation { line: usize, score: f64, min: f64, max: f64 },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("numeric id {0} was never assigned")]
    UnknownNumericId(u64),
    #[error("id pair ({raw}, {numeric}) conflicts with an existing mapping")]
    IdMapConflict { raw: String, numeric: u64 },
}

impl IngestError {
    fn io(path: &Path, source: io::Error) -> Self {
        IngestError::Io { path: path.to_path_buf(), source }
    }

    fn parse(line: usize, message: impl fmt::Display) -> Self {
        IngestError::Parse { line, message: message.to_string() }
    }
}

/// Inclusive score range a dataset declares for its ratings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl RatingScale {
    /// Half-star MovieLens scale.
    pub const MOVIELENS: RatingScale = RatingScale { min: 0.5, max: 5.0 };
    /// Amazon "overall" score.
    pub const AMAZON: RatingScale = RatingScale { min: 1.0, max: 5.0 };

    pub fn contains(&self, score: f64) -> bool {
        score.is_finite() && score >= self.min && score <= self.max
    }

    fn check(&self, line: usize, score: f64) -> Result<f64, IngestError> {
        if self.contains(score) {
            Ok(score)
        } else {
            Err(IngestError::ScaleViolation { line, score, min: self.min, max: self.max })
        }
    }
}

/// One user-item interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingEvent {
    pub user: ScopedId,
    pub item: ScopedId,
    pub score: f64,
    pub timestamp: u64,
    pub review_text: Option<String>,
    pub summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemRecord {
    pub item: ScopedId,
    pub title: String,
    pub overview: Option<String>,
    pub vote_count: Option<u64>,
    pub vote_average: Option<f64>,
    pub external_id: Option<String>,
}

/// A skipped source record.
#[derive(Debug)]
pub struct Rejection {
    pub line: usize,
    pub error: IngestError,
}

/// Records read from a file plus everything that was skipped.
#[derive(Debug)]
pub struct Ingested<T> {
    pub records: Vec<T>,
    pub rejects: Vec<Rejection>,
}

impl<T> Ingested<T> {
    fn new() -> Self {
        Self { records: Vec::new(), rejects: Vec::new() }
    }

    fn push(&mut self, line: usize, result: Result<T, IngestError>) {
        match result {
            Ok(record) => self.records.push(record),
            Err(error) => {
                log::warn!("skipping record: {error}");
                self.rejects.push(Rejection { line, error });
            }
        }
    }
}

impl IngestError {
    /// Source line the error refers to, when it has one.
    pub fn line(&self) -> Option<usize> {
        match self {
            IngestError::Parse { line, .. }
            | IngestError::ScaleViolation { line, .. }
            | IngestError::MissingField { line, .. }
            | IngestError::DuplicateId { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Write one line per rejection: `line <n>: <reason>`.
pub fn write_reject_report<W: Write>(mut out: W, rejects: &[Rejection]) -> io::Result<()> {
    for r in rejects {
        if r.error.line().is_some() {
            writeln!(out, "{}", r.error)?;
        } else {
            writeln!(out, "line {}: {}", r.line, r.error)?;
        }
    }
    Ok(())
}

/// Conventional report name for an input file: `<file name>.rejects.txt`.
pub fn reject_report_name(input: &Path) -> String {
    let name = input.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    format!("{name}.rejects.txt")
}
