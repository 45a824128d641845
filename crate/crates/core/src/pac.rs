//! Pseudo-association between entities of disjoint datasets.
//!
//! A probe profile is scored against every member of a frozen
//! [`CandidatePool`] by cosine similarity. The best-scoring member gives a
//! one-to-one link, every member above a threshold joins the probe's group,
//! and a user scored against item-level group profiles yields one-to-many
//! links.
//!
//! Scans are exact. Ranking uses a total order: higher AII first, then
//! ascending entity id, so scan output is identical across runs and across
//! sequential and parallel execution.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::{self, Write};

use thiserror::Error;

use crate::emotion::{inner, Aii, EmotionError, EmotionVector, ZERO_NORM_EPS};
use crate::exec::Execution;
use crate::ingest::ScopedId;
use crate::profiles::{GroupProfile, UserProfile};

/// Default AII threshold for group membership.
pub const DEFAULT_TAU: f64 = 0.98;

/// Number of best matches kept per probe in a run report.
pub const REPORT_TOP: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PacError {
    #[error("candidate pool `{0}` is empty")]
    EmptyPool(String),
    #[error("threshold {0} is outside (0, 1]")]
    InvalidTau(f64),
    #[error("pool `{pool}` already contains {id}")]
    DuplicateId { pool: String, id: ScopedId },
    #[error("{entity}: {source}")]
    Emotion { entity: ScopedId, source: EmotionError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkKind {
    OneToOne,
    GroupMember,
    OneToMany,
}

impl LinkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::OneToOne => "one_to_one",
            LinkKind::GroupMember => "group_member",
            LinkKind::OneToMany => "one_to_many",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "one_to_one" => Some(LinkKind::OneToOne),
            "group_member" => Some(LinkKind::GroupMember),
            "one_to_many" => Some(LinkKind::OneToMany),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacLink {
    pub source: ScopedId,
    pub target: ScopedId,
    pub aii: Aii,
    pub kind: LinkKind,
}

/// One scored pool member.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanHit {
    pub id: ScopedId,
    pub aii: Aii,
}

/// Higher AII first, then ascending id.
pub fn rank_order(a_aii: Aii, a_id: &ScopedId, b_aii: Aii, b_id: &ScopedId) -> Ordering {
    b_aii.cmp(&a_aii).then_with(|| a_id.cmp(b_id))
}

fn hit_order(a: &ScanHit, b: &ScanHit) -> Ordering {
    rank_order(a.aii, &a.id, b.aii, &b.id)
}

#[derive(Debug, Clone)]
struct PoolEntry {
    id: ScopedId,
    vector: EmotionVector,
    norm: f64,
}

/// Collects pool members; [`PoolBuilder::freeze`] makes them scannable.
#[derive(Debug, Clone)]
pub struct PoolBuilder {
    name: String,
    entries: Vec<PoolEntry>,
    seen: HashSet<ScopedId>,
}

impl PoolBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), entries: Vec::new(), seen: HashSet::new() }
    }

    /// Add a member. The vector is rescaled to sum to one.
    pub fn push(&mut self, id: ScopedId, vector: EmotionVector) -> Result<(), PacError> {
        if !self.seen.insert(id.clone()) {
            return Err(PacError::DuplicateId { pool: self.name.clone(), id });
        }
        let vector = vector
            .renormalized()
            .map_err(|source| PacError::Emotion { entity: id.clone(), source })?;
        let norm = vector.norm();
        self.entries.push(PoolEntry { id, vector, norm });
        Ok(())
    }

    pub fn freeze(self) -> CandidatePool {
        CandidatePool { name: self.name, entries: self.entries }
    }
}

/// Immutable set of candidate profiles.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    name: String,
    entries: Vec<PoolEntry>,
}

impl CandidatePool {
    /// Build and freeze in one go.
    pub fn from_entries<I>(name: impl Into<String>, entries: I) -> Result<Self, PacError>
    where
        I: IntoIterator<Item = (ScopedId, EmotionVector)>,
    {
        let mut b = PoolBuilder::new(name);
        for (id, v) in entries {
            b.push(id, v)?;
        }
        Ok(b.freeze())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Members in insertion order, as stored (normalized).
    pub fn iter(&self) -> impl Iterator<Item = (&ScopedId, &EmotionVector)> {
        self.entries.iter().map(|e| (&e.id, &e.vector))
    }

    fn check(&self) -> Result<(), PacError> {
        if self.entries.is_empty() {
            Err(PacError::EmptyPool(self.name.clone()))
        } else {
            Ok(())
        }
    }

    fn score_all(&self, probe: &EmotionVector, exec: Execution) -> Vec<ScanHit> {
        let probe_norm = probe.norm();
        exec.map(&self.entries, |e| ScanHit {
            id: e.id.clone(),
            aii: Aii::new((inner(probe, &e.vector) / (probe_norm * e.norm)).clamp(-1.0, 1.0))
                .expect("finite cosine"),
        })
    }
}

fn probe_norm_ok(probe_id: &ScopedId, probe: &EmotionVector) -> Result<(), PacError> {
    if probe.norm() <= ZERO_NORM_EPS {
        Err(PacError::Emotion { entity: probe_id.clone(), source: EmotionError::ZeroVector })
    } else {
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<(), PacError> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(PacError::InvalidTau(tau))
    }
}

/// Score the probe against every pool member, best first.
pub fn aii_scan(probe_id: &ScopedId, probe: &EmotionVector, pool: &CandidatePool) -> Result<Vec<ScanHit>, PacError> {
    aii_scan_with(probe_id, probe, pool, Execution::default())
}

pub fn aii_scan_with(
    probe_id: &ScopedId,
    probe: &EmotionVector,
    pool: &CandidatePool,
    exec: Execution,
) -> Result<Vec<ScanHit>, PacError> {
    pool.check()?;
    probe_norm_ok(probe_id, probe)?;
    let mut hits = pool.score_all(probe, exec);
    exec.sort_by(&mut hits, hit_order);
    Ok(hits)
}

/// Link the probe to the best-scoring pool member.
pub fn pac_top_match(probe_id: &ScopedId, probe: &EmotionVector, pool: &CandidatePool) -> Result<PacLink, PacError> {
    pac_top_match_with(probe_id, probe, pool, Execution::default())
}

pub fn pac_top_match_with(
    probe_id: &ScopedId,
    probe: &EmotionVector,
    pool: &CandidatePool,
    exec: Execution,
) -> Result<PacLink, PacError> {
    pool.check()?;
    probe_norm_ok(probe_id, probe)?;
    let best = pool
        .score_all(probe, exec)
        .into_iter()
        .min_by(hit_order)
        .expect("pool is nonempty");
    Ok(PacLink { source: probe_id.clone(), target: best.id, aii: best.aii, kind: LinkKind::OneToOne })
}

/// Every pool member whose AII reaches `tau`, best first.
pub fn pac_threshold_group(
    probe_id: &ScopedId,
    probe: &EmotionVector,
    pool: &CandidatePool,
    tau: f64,
) -> Result<Vec<PacLink>, PacError> {
    pac_threshold_group_with(probe_id, probe, pool, tau, Execution::default())
}

pub fn pac_threshold_group_with(
    probe_id: &ScopedId,
    probe: &EmotionVector,
    pool: &CandidatePool,
    tau: f64,
    exec: Execution,
) -> Result<Vec<PacLink>, PacError> {
    check_tau(tau)?;
    pool.check()?;
    probe_norm_ok(probe_id, probe)?;
    let mut hits: Vec<ScanHit> = pool
        .score_all(probe, exec)
        .into_iter()
        .filter(|h| h.aii.value() >= tau)
        .collect();
    exec.sort_by(&mut hits, hit_order);
    Ok(hits
        .into_iter()
        .map(|h| PacLink { source: probe_id.clone(), target: h.id, aii: h.aii, kind: LinkKind::GroupMember })
        .collect())
}

/// Link a user to every item-level group profile it matches.
pub fn pac_cross_domain_user_to_groups(
    user: &UserProfile,
    groups: &[GroupProfile],
    tau: f64,
) -> Result<Vec<PacLink>, PacError> {
    check_tau(tau)?;
    if groups.is_empty() {
        return Err(PacError::EmptyPool("groups".into()));
    }
    let mut hits = Vec::new();
    for g in groups {
        let aii = crate::emotion::cosine_similarity(user.uvec(), &g.group_uvec).map_err(|source| {
            let entity = if user.uvec().norm() <= ZERO_NORM_EPS { user.user() } else { &g.item };
            PacError::Emotion { entity: entity.clone(), source }
        })?;
        if aii.value() >= tau {
            hits.push(ScanHit { id: g.item.clone(), aii });
        }
    }
    hits.sort_by(hit_order);
    Ok(hits
        .into_iter()
        .map(|h| PacLink { source: user.user().clone(), target: h.id, aii: h.aii, kind: LinkKind::OneToMany })
        .collect())
}

/// Evidence for one probe against one pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PacReportRow {
    pub probe: ScopedId,
    pub pool: String,
    pub pool_size: usize,
    pub top: Vec<ScanHit>,
}

pub fn pac_report_row(probe_id: &ScopedId, probe: &EmotionVector, pool: &CandidatePool) -> Result<PacReportRow, PacError> {
    let mut hits = aii_scan(probe_id, probe, pool)?;
    hits.truncate(REPORT_TOP);
    Ok(PacReportRow { probe: probe_id.clone(), pool: pool.name.clone(), pool_size: pool.len(), top: hits })
}

pub fn write_pac_report<W: Write>(out: W, rows: &[PacReportRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["probe_dataset", "probe_id", "pool", "pool_size", "rank", "target_dataset", "target_id", "aii"])
        .map_err(io::Error::other)?;
    for row in rows {
        for (rank, hit) in row.top.iter().enumerate() {
            w.write_record([
                row.probe.dataset.as_str(),
                row.probe.id.as_str(),
                row.pool.as_str(),
                &row.pool_size.to_string(),
                &(rank + 1).to_string(),
                hit.id.dataset.as_str(),
                hit.id.id.as_str(),
                &hit.aii.to_string(),
            ])
            .map_err(io::Error::other)?;
        }
    }
    w.flush()
}
