//! Hit-rate evaluation and side-by-side top-N reports.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::io::{self, Write};

use thiserror::Error;

use crate::ingest::{RatingEvent, ScopedId};
use crate::recommend::{Recommendation, Recommender};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluationError {
    #[error("recommendation list is empty")]
    EmptyRecommendations,
    #[error("report needs at least one recommender column")]
    NoColumns,
    #[error("{recommender} column has {found} rows, expected {expected}")]
    ColumnLengthMismatch { recommender: Recommender, expected: usize, found: usize },
    #[error("{recommender} appears twice in the report")]
    DuplicateColumn { recommender: Recommender },
    #[error("user {user} has {count} events, a holdout split needs at least 2")]
    InsufficientHistory { user: ScopedId, count: usize },
    #[error("holdout fraction must be in (0, 1), got {0}")]
    BadFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitRate(f64);

impl HitRate {
    /// Unrounded percentage in [0, 100].
    pub fn percent(self) -> f64 {
        self.0
    }

    /// Whole percent, rounded half-up.
    pub fn rounded(self) -> u32 {
        (self.0 + 0.5).floor() as u32
    }
}

pub fn hit_rate(recs: &[Recommendation], relevant: &BTreeSet<ScopedId>) -> Result<HitRate, EvaluationError> {
    if recs.is_empty() {
        return Err(EvaluationError::EmptyRecommendations);
    }
    let hits = recs.iter().filter(|r| relevant.contains(&r.item)).count();
    Ok(HitRate(100.0 * hits as f64 / recs.len() as f64))
}

/// Training events and the held-out relevant items for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct Holdout {
    pub train: Vec<RatingEvent>,
    pub relevant: BTreeSet<ScopedId>,
}

/// Hold out the user's most recent `fraction` of events, ordered by
/// timestamp then item id. The held-out count is rounded up and kept in
/// [1, len - 1] so both sides are nonempty.
pub fn holdout_split(user: &ScopedId, events: &[RatingEvent], fraction: f64) -> Result<Holdout, EvaluationError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvaluationError::BadFraction(fraction));
    }
    let mut mine: Vec<&RatingEvent> = events.iter().filter(|e| &e.user == user).collect();
    if mine.len() < 2 {
        return Err(EvaluationError::InsufficientHistory { user: user.clone(), count: mine.len() });
    }
    mine.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.item.cmp(&b.item)));
    let held = ((mine.len() as f64 * fraction).ceil() as usize).clamp(1, mine.len() - 1);
    let cut = mine.len() - held;
    let relevant: BTreeSet<ScopedId> = mine[cut..].iter().map(|e| e.item.clone()).collect();
    // an item rated both before and after the cut stays held out
    let train = events
        .iter()
        .filter(|e| &e.user != user || !relevant.contains(&e.item))
        .cloned()
        .collect();
    Ok(Holdout { train, relevant })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub datasets: Vec<String>,
    pub tau: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportColumn {
    pub recommender: Recommender,
    pub items: Vec<ScopedId>,
    pub hit_rate: HitRate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub user: ScopedId,
    pub meta: ReportMeta,
    pub columns: Vec<ReportColumn>,
}

/// Lay recommender outputs side by side, in the fixed recommender order,
/// with a hit-rate row at the bottom.
pub fn build_report(
    user: &ScopedId,
    outputs: Vec<(Recommender, Vec<Recommendation>)>,
    relevant: &BTreeSet<ScopedId>,
    meta: ReportMeta,
) -> Result<EvaluationReport, EvaluationError> {
    let mut outputs = outputs;
    outputs.sort_by_key(|o| o.0);
    let Some(expected) = outputs.first().map(|o| o.1.len()) else {
        return Err(EvaluationError::NoColumns);
    };
    let mut seen = HashSet::new();
    let mut columns = Vec::with_capacity(outputs.len());
    for (recommender, recs) in outputs {
        if !seen.insert(recommender) {
            return Err(EvaluationError::DuplicateColumn { recommender });
        }
        if recs.len() != expected {
            return Err(EvaluationError::ColumnLengthMismatch { recommender, expected, found: recs.len() });
        }
        let hit_rate = hit_rate(&recs, relevant)?;
        columns.push(ReportColumn { recommender, items: recs.into_iter().map(|r| r.item).collect(), hit_rate });
    }
    Ok(EvaluationReport { user: user.clone(), meta, columns })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Text,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(ReportFormat::Csv),
            "text" => Some(ReportFormat::Text),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Text => "txt",
        }
    }
}

impl EvaluationReport {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.items.len())
    }

    fn grid(&self) -> Vec<Vec<String>> {
        let mut grid = Vec::with_capacity(self.rows() + 2);
        let mut header = vec!["rank".to_string()];
        header.extend(self.columns.iter().map(|c| c.recommender.tag().to_string()));
        grid.push(header);
        for r in 0..self.rows() {
            let mut row = vec![(r + 1).to_string()];
            row.extend(self.columns.iter().map(|c| c.items[r].id.to_string()));
            grid.push(row);
        }
        let mut hits = vec!["hit %".to_string()];
        hits.extend(self.columns.iter().map(|c| format!("{}%", c.hit_rate.rounded())));
        grid.push(hits);
        grid
    }

    fn meta_lines(&self) -> Vec<String> {
        vec![
            format!("user: {}", self.user),
            format!("datasets: {}", self.meta.datasets.join(";")),
            format!("tau: {}", self.meta.tau),
            format!("n: {}", self.meta.n),
        ]
    }

    pub fn write<W: Write>(&self, out: W, format: ReportFormat) -> io::Result<()> {
        match format {
            ReportFormat::Csv => self.write_csv(out),
            ReportFormat::Text => self.write_text(out),
        }
    }

    /// Metadata as `# ` lines, then the table.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for line in self.meta_lines() {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        for row in self.grid() {
            w.write_record(&row).map_err(io::Error::other)?;
        }
        w.flush()
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        let grid = self.grid();
        let cols = grid[0].len();
        let widths: Vec<usize> =
            (0..cols).map(|c| grid.iter().map(|row| row[c].chars().count()).max().unwrap_or(0)).collect();
        let mut text = String::new();
        for line in self.meta_lines() {
            writeln!(text, "{line}").unwrap();
        }
        text.push('\n');
        for (i, row) in grid.iter().enumerate() {
            let cells: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
            writeln!(text, "{}", cells.join("  ").trim_end()).unwrap();
            if i == 0 || i + 2 == grid.len() {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                writeln!(text, "{}", rule.join("  ")).unwrap();
            }
        }
        out.write_all(text.as_bytes())
    }
}
