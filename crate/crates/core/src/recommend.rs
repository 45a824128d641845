//! Top-N recommenders: item-based and user-based collaborative filtering,
//! emotion-aware ranking, and the cross-domain recommender that follows a
//! PAC link into another dataset.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::emotion::{affective_description, cosine_similarity, Aii, EmotionError};
use crate::exec::Execution;
use crate::ingest::{RatingEvent, ScopedId};
use crate::pac::PacLink;
use crate::profiles::{ItemProfile, UserProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecommendError {
    #[error("list length must be at least 1")]
    InvalidN,
    #[error("neighbor count must be at least 1")]
    InvalidK,
    #[error("user {0} has no ratings")]
    ColdStartUser(ScopedId),
    #[error("user {0} has no neighbor with positive similarity")]
    NoNeighbors(ScopedId),
    #[error("no candidate items")]
    NoCandidates,
    #[error("linked user {0} has no events in the target dataset")]
    EmptyTargetHistory(ScopedId),
    #[error("link starts at {link_source}, not at {user}")]
    LinkMismatch { user: ScopedId, link_source: ScopedId },
    #[error("{entity}: {source}")]
    Emotion { entity: ScopedId, source: EmotionError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Recommender {
    Ibcf,
    Ubcf,
    Ear,
    CrossDomain,
}

impl Recommender {
    pub fn tag(self) -> &'static str {
        match self {
            Recommender::Ibcf => "IBCF",
            Recommender::Ubcf => "UBCF",
            Recommender::Ear => "EAR",
            Recommender::CrossDomain => "CDR",
        }
    }
}

impl fmt::Display for Recommender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub rank: usize,
    pub item: ScopedId,
    pub score: f64,
    pub recommender: Recommender,
    pub explanation: Option<String>,
    pub link_aii: Option<Aii>,
}

/// Sparse user-by-item score matrix.
///
/// Users and items are indexed in ascending id order, so index order and id
/// order agree. One cell per (user, item): the latest event wins, then the
/// highest score.
#[derive(Debug, Clone, Default)]
pub struct RatingMatrix {
    users: Vec<ScopedId>,
    items: Vec<ScopedId>,
    user_index: HashMap<ScopedId, usize>,
    item_index: HashMap<ScopedId, usize>,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
    row_norms: Vec<f64>,
    col_norms: Vec<f64>,
}

impl RatingMatrix {
    pub fn from_events<'a, I>(events: I) -> Self
    where
        I: IntoIterator<Item = &'a RatingEvent>,
    {
        let mut cells: BTreeMap<(&ScopedId, &ScopedId), (u64, f64)> = BTreeMap::new();
        for e in events {
            let candidate = (e.timestamp, e.score);
            cells
                .entry((&e.user, &e.item))
                .and_modify(|cur| {
                    let newer = candidate.0.cmp(&cur.0).then(candidate.1.total_cmp(&cur.1));
                    if newer.is_gt() {
                        *cur = candidate;
                    }
                })
                .or_insert(candidate);
        }

        let users: Vec<ScopedId> = cells.keys().map(|k| k.0.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let items: Vec<ScopedId> = cells.keys().map(|k| k.1.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let user_index: HashMap<ScopedId, usize> = users.iter().cloned().enumerate().map(|(i, u)| (u, i)).collect();
        let item_index: HashMap<ScopedId, usize> = items.iter().cloned().enumerate().map(|(i, u)| (u, i)).collect();

        let mut rows = vec![Vec::new(); users.len()];
        let mut cols = vec![Vec::new(); items.len()];
        for ((u, i), (_, score)) in &cells {
            let (ui, ii) = (user_index[*u], item_index[*i]);
            rows[ui].push((ii, *score));
            cols[ii].push((ui, *score));
        }
        for r in rows.iter_mut() {
            r.sort_by_key(|c| c.0);
        }
        for c in cols.iter_mut() {
            c.sort_by_key(|c| c.0);
        }
        let norm = |v: &Vec<(usize, f64)>| v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        let row_norms = rows.iter().map(norm).collect();
        let col_norms = cols.iter().map(norm).collect();
        Self { users, items, user_index, item_index, rows, cols, row_norms, col_norms }
    }

    pub fn users(&self) -> &[ScopedId] {
        &self.users
    }

    pub fn items(&self) -> &[ScopedId] {
        &self.items
    }

    pub fn get(&self, user: &ScopedId, item: &ScopedId) -> Option<f64> {
        let (u, i) = (self.user_index.get(user)?, self.item_index.get(item)?);
        self.rows[*u].binary_search_by_key(i, |c| c.0).ok().map(|p| self.rows[*u][p].1)
    }

    /// Items the user has rated, in id order.
    pub fn rated_items(&self, user: &ScopedId) -> Vec<&ScopedId> {
        self.user_index
            .get(user)
            .map(|&u| self.rows[u].iter().map(|&(i, _)| &self.items[i]).collect())
            .unwrap_or_default()
    }

    fn user_row(&self, user: &ScopedId) -> Result<usize, RecommendError> {
        match self.user_index.get(user) {
            Some(&u) if !self.rows[u].is_empty() => Ok(u),
            _ => Err(RecommendError::ColdStartUser(user.clone())),
        }
    }

    fn item_cosine(&self, a: usize, b: usize) -> f64 {
        sparse_dot(&self.cols[a], &self.cols[b]) / (self.col_norms[a] * self.col_norms[b])
    }

    fn user_cosine(&self, a: usize, b: usize) -> f64 {
        sparse_dot(&self.rows[a], &self.rows[b]) / (self.row_norms[a] * self.row_norms[b])
    }
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Sort (index, score) by score descending then index ascending, keep `n`.
fn top_n(mut scored: Vec<(usize, f64)>, n: usize) -> Vec<(usize, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(n);
    scored
}

fn ranked(items: &[ScopedId], scored: Vec<(usize, f64)>, recommender: Recommender) -> Vec<Recommendation> {
    scored
        .into_iter()
        .enumerate()
        .map(|(r, (i, score))| Recommendation {
            rank: r + 1,
            item: items[i].clone(),
            score,
            recommender,
            explanation: None,
            link_aii: None,
        })
        .collect()
}

/// Item-based CF: a candidate's score is the similarity-weighted mean of
/// the user's own ratings over rated items with positive similarity.
pub fn ibcf_recommend(user: &ScopedId, matrix: &RatingMatrix, n: usize) -> Result<Vec<Recommendation>, RecommendError> {
    ibcf_recommend_with(user, matrix, n, Execution::default())
}

pub fn ibcf_recommend_with(
    user: &ScopedId,
    matrix: &RatingMatrix,
    n: usize,
    exec: Execution,
) -> Result<Vec<Recommendation>, RecommendError> {
    if n == 0 {
        return Err(RecommendError::InvalidN);
    }
    let u = matrix.user_row(user)?;
    let row = &matrix.rows[u];
    let rated: HashSet<usize> = row.iter().map(|c| c.0).collect();

    // only items co-rated with something the user rated can have sim > 0
    let mut candidates = BTreeSet::new();
    for &(j, _) in row {
        for &(v, _) in &matrix.cols[j] {
            for &(i, _) in &matrix.rows[v] {
                if !rated.contains(&i) {
                    candidates.insert(i);
                }
            }
        }
    }
    let candidates: Vec<usize> = candidates.into_iter().collect();
    let scored = exec.map(&candidates, |&i| {
        let (mut num, mut den) = (0.0, 0.0);
        for &(j, r) in row {
            let s = matrix.item_cosine(i, j);
            if s > 0.0 {
                num += s * r;
                den += s.abs();
            }
        }
        (den > 0.0).then(|| (i, num / den))
    });
    let scored = top_n(scored.into_iter().flatten().collect(), n);
    Ok(ranked(&matrix.items, scored, Recommender::Ibcf))
}

/// User-based CF over the `k` most similar users with positive similarity.
pub fn ubcf_recommend(
    user: &ScopedId,
    matrix: &RatingMatrix,
    n: usize,
    k_neighbors: usize,
) -> Result<Vec<Recommendation>, RecommendError> {
    ubcf_recommend_with(user, matrix, n, k_neighbors, Execution::default())
}

pub fn ubcf_recommend_with(
    user: &ScopedId,
    matrix: &RatingMatrix,
    n: usize,
    k_neighbors: usize,
    exec: Execution,
) -> Result<Vec<Recommendation>, RecommendError> {
    if n == 0 {
        return Err(RecommendError::InvalidN);
    }
    if k_neighbors == 0 {
        return Err(RecommendError::InvalidK);
    }
    let u = matrix.user_row(user)?;

    let mut others = BTreeSet::new();
    for &(j, _) in &matrix.rows[u] {
        others.extend(matrix.cols[j].iter().map(|c| c.0).filter(|&v| v != u));
    }
    let others: Vec<usize> = others.into_iter().collect();
    let sims: Vec<(usize, f64)> = exec
        .map(&others, |&v| (v, matrix.user_cosine(u, v)))
        .into_iter()
        .filter(|&(_, s)| s > 0.0)
        .collect();
    let neighbors = top_n(sims, k_neighbors);
    if neighbors.is_empty() {
        return Err(RecommendError::NoNeighbors(user.clone()));
    }

    let rated: HashSet<usize> = matrix.rows[u].iter().map(|c| c.0).collect();
    let mut acc: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for &(v, s) in &neighbors {
        for &(i, r) in &matrix.rows[v] {
            if !rated.contains(&i) {
                let e = acc.entry(i).or_insert((0.0, 0.0));
                e.0 += s * r;
                e.1 += s;
            }
        }
    }
    let scored = acc.into_iter().map(|(i, (num, den))| (i, num / den)).collect();
    Ok(ranked(&matrix.items, top_n(scored, n), Recommender::Ubcf))
}

/// Rank items by cosine similarity between the user's profile and theirs.
pub fn ear_recommend<'a, I>(
    user: &UserProfile,
    item_profiles: I,
    n: usize,
    exclude: &BTreeSet<ScopedId>,
) -> Result<Vec<Recommendation>, RecommendError>
where
    I: IntoIterator<Item = &'a ItemProfile>,
{
    ear_recommend_with(user, item_profiles, n, exclude, Execution::default())
}

pub fn ear_recommend_with<'a, I>(
    user: &UserProfile,
    item_profiles: I,
    n: usize,
    exclude: &BTreeSet<ScopedId>,
    exec: Execution,
) -> Result<Vec<Recommendation>, RecommendError>
where
    I: IntoIterator<Item = &'a ItemProfile>,
{
    if n == 0 {
        return Err(RecommendError::InvalidN);
    }
    let all: Vec<&ItemProfile> = item_profiles.into_iter().collect();
    if all.is_empty() {
        return Err(RecommendError::NoCandidates);
    }
    let mut candidates: Vec<&ItemProfile> = all.into_iter().filter(|p| !exclude.contains(p.item())).collect();
    candidates.sort_by(|a, b| a.item().cmp(b.item()));
    candidates.dedup_by(|a, b| a.item() == b.item());

    let scored: Vec<(usize, f64)> = exec
        .try_map(&candidates, |p| {
            cosine_similarity(user.uvec(), p.mvec())
                .map(|aii| aii.value())
                .map_err(|source| RecommendError::Emotion { entity: p.item().clone(), source })
        })?
        .into_iter()
        .enumerate()
        .collect();
    let ids: Vec<ScopedId> = candidates.iter().map(|p| p.item().clone()).collect();
    let mut recs = ranked(&ids, top_n(scored, n), Recommender::Ear);
    for rec in recs.iter_mut() {
        let profile = candidates[ids.binary_search(&rec.item).expect("ranked id comes from candidates")];
        rec.explanation = Some(affective_description(profile.mvec(), &rec.item.to_string()));
    }
    Ok(recs)
}

/// Recommend the linked user's top-rated items from the target dataset.
///
/// Candidates are the items the twin gave its maximum score, in the order
/// they first appear in `target_events`; repeated items count once.
pub fn cross_domain_recommend(
    source_user: &ScopedId,
    link: &PacLink,
    target_events: &[RatingEvent],
    n: usize,
) -> Result<Vec<Recommendation>, RecommendError> {
    if n == 0 {
        return Err(RecommendError::InvalidN);
    }
    if &link.source != source_user {
        return Err(RecommendError::LinkMismatch { user: source_user.clone(), link_source: link.source.clone() });
    }
    let history: Vec<&RatingEvent> = target_events.iter().filter(|e| e.user == link.target).collect();
    let best = history
        .iter()
        .map(|e| e.score)
        .max_by(f64::total_cmp)
        .ok_or_else(|| RecommendError::EmptyTargetHistory(link.target.clone()))?;

    let mut seen = HashSet::new();
    let explanation = format!("linked {} -> {} (AII {})", link.source, link.target, link.aii);
    Ok(history
        .into_iter()
        .filter(|e| e.score == best && seen.insert(&e.item))
        .take(n)
        .enumerate()
        .map(|(r, e)| Recommendation {
            rank: r + 1,
            item: e.item.clone(),
            score: best,
            recommender: Recommender::CrossDomain,
            explanation: Some(explanation.clone()),
            link_aii: Some(link.aii),
        })
        .collect())
}

/// `rank,item_id,score,recommender,aii_of_link`, scores to six decimals.
pub fn write_recommendations<W: Write>(out: W, recs: &[Recommendation]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "item_id", "score", "recommender", "aii_of_link"])
        .map_err(io::Error::other)?;
    for r in recs {
        w.write_record([
            r.rank.to_string().as_str(),
            r.item.id.as_str(),
            &format!("{:.6}", r.score),
            r.recommender.tag(),
            &r.link_aii.map(|a| a.to_string()).unwrap_or_default(),
        ])
        .map_err(io::Error::other)?;
    }
    w.flush()
}
