//! Independent brute-force reference implementations and generators.
//!
//! Nothing here calls the library's scoring code; the library is only used
//! for its data types.
#![allow(dead_code)]

use std::path::PathBuf;

use emolink::emotion::EmotionVector;
use emolink::ingest::{RatingEvent, ScopedId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

/// Plain nested-loop cosine, clamped to [-1, 1].
pub fn naive_cosine(a: &[f64; 7], b: &[f64; 7]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for k in 0..7 {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// `a` beats `b`: higher score, or equal score and smaller id.
fn beats<I: Ord>(a: (f64, &I), b: (f64, &I)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Order by repeated selection of the best remaining entry.
pub fn selection_rank<I: Ord + Clone>(mut scored: Vec<(I, f64)>) -> Vec<(I, f64)> {
    let mut out = Vec::with_capacity(scored.len());
    while !scored.is_empty() {
        let mut best = 0;
        for i in 1..scored.len() {
            if beats((scored[i].1, &scored[i].0), (scored[best].1, &scored[best].0)) {
                best = i;
            }
        }
        out.push(scored.swap_remove(best));
    }
    out
}

pub fn brute_scan(probe: &[f64; 7], pool: &[(ScopedId, [f64; 7])]) -> Vec<(ScopedId, f64)> {
    selection_rank(pool.iter().map(|(id, v)| (id.clone(), naive_cosine(probe, v))).collect())
}

pub fn brute_argmax(probe: &[f64; 7], pool: &[(ScopedId, [f64; 7])]) -> (ScopedId, f64) {
    let mut best: Option<(ScopedId, f64)> = None;
    for (id, v) in pool {
        let s = naive_cosine(probe, v);
        let better = match &best {
            None => true,
            Some((bid, bs)) => beats((s, id), (*bs, bid)),
        };
        if better {
            best = Some((id.clone(), s));
        }
    }
    best.expect("nonempty pool")
}

/// Dense user-by-item matrix; 0.0 marks a missing rating.
pub struct Dense {
    pub users: Vec<ScopedId>,
    pub items: Vec<ScopedId>,
    pub r: Vec<Vec<f64>>,
}

impl Dense {
    /// Last event per (user, item) by (timestamp, score).
    pub fn from_events(events: &[RatingEvent]) -> Self {
        let mut users: Vec<ScopedId> = events.iter().map(|e| e.user.clone()).collect();
        users.sort();
        users.dedup();
        let mut items: Vec<ScopedId> = events.iter().map(|e| e.item.clone()).collect();
        items.sort();
        items.dedup();
        let mut r = vec![vec![0.0; items.len()]; users.len()];
        let mut stamp = vec![vec![None::<(u64, f64)>; items.len()]; users.len()];
        for e in events {
            let u = users.binary_search(&e.user).unwrap();
            let i = items.binary_search(&e.item).unwrap();
            let newer = match stamp[u][i] {
                None => true,
                Some((t, s)) => e.timestamp > t || (e.timestamp == t && e.score > s),
            };
            if newer {
                stamp[u][i] = Some((e.timestamp, e.score));
                r[u][i] = e.score;
            }
        }
        Self { users, items, r }
    }

    fn col_cos(&self, a: usize, b: usize) -> f64 {
        let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
        for u in 0..self.users.len() {
            dot += self.r[u][a] * self.r[u][b];
        }
        for u in 0..self.users.len() {
            na += self.r[u][a] * self.r[u][a];
            nb += self.r[u][b] * self.r[u][b];
        }
        dot / (na.sqrt() * nb.sqrt())
    }

    fn row_cos(&self, a: usize, b: usize) -> f64 {
        let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
        for i in 0..self.items.len() {
            dot += self.r[a][i] * self.r[b][i];
        }
        for i in 0..self.items.len() {
            na += self.r[a][i] * self.r[a][i];
            nb += self.r[b][i] * self.r[b][i];
        }
        dot / (na.sqrt() * nb.sqrt())
    }

    pub fn ibcf(&self, user: &ScopedId, n: usize) -> Vec<(ScopedId, f64)> {
        let u = self.users.binary_search(user).unwrap();
        let mut scored = Vec::new();
        for i in 0..self.items.len() {
            if self.r[u][i] != 0.0 {
                continue;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..self.items.len() {
                if self.r[u][j] == 0.0 {
                    continue;
                }
                let s = self.col_cos(i, j);
                if s > 0.0 {
                    num += s * self.r[u][j];
                    den += s.abs();
                }
            }
            if den > 0.0 {
                scored.push((self.items[i].clone(), num / den));
            }
        }
        let mut ranked = selection_rank(scored);
        ranked.truncate(n);
        ranked
    }

    /// None when there is no positive-similarity neighbor.
    pub fn ubcf(&self, user: &ScopedId, n: usize, k: usize) -> Option<Vec<(ScopedId, f64)>> {
        let u = self.users.binary_search(user).unwrap();
        let mut sims = Vec::new();
        for v in 0..self.users.len() {
            if v != u {
                let s = self.row_cos(u, v);
                if s > 0.0 {
                    sims.push((v, s));
                }
            }
        }
        let mut neighbors = selection_rank(sims);
        neighbors.truncate(k);
        if neighbors.is_empty() {
            return None;
        }
        let mut scored = Vec::new();
        for i in 0..self.items.len() {
            if self.r[u][i] != 0.0 {
                continue;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for &(v, s) in &neighbors {
                if self.r[v][i] != 0.0 {
                    num += s * self.r[v][i];
                    den += s;
                }
            }
            if den > 0.0 {
                scored.push((self.items[i].clone(), num / den));
            }
        }
        let mut ranked = selection_rank(scored);
        ranked.truncate(n);
        Some(ranked)
    }
}

pub fn random_distribution(rng: &mut ChaCha8Rng) -> [f64; 7] {
    let mut v = [0.0; 7];
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = rng.random_range(0.001..1.0);
        total += *x;
    }
    v.map(|x| x / total)
}

pub fn random_vector(rng: &mut ChaCha8Rng) -> EmotionVector {
    EmotionVector::new(random_distribution(rng)).unwrap()
}

/// Random pool with a few exact duplicates, so ties get exercised.
pub fn random_pool(rng: &mut ChaCha8Rng, dataset: &str, size: usize) -> Vec<(ScopedId, [f64; 7])> {
    let mut pool: Vec<(ScopedId, [f64; 7])> = Vec::with_capacity(size);
    for i in 0..size {
        let v = if i > 0 && rng.random_bool(0.1) {
            pool[rng.random_range(0..i)].1
        } else {
            random_distribution(rng)
        };
        pool.push((ScopedId::new(dataset, rng.random_range(0..100_000u64).to_string() + &format!("x{i}")), v));
    }
    pool
}

/// Random half-star ratings over at most `users` x `items`.
pub fn random_events(rng: &mut ChaCha8Rng, users: usize, items: usize, density: f64) -> Vec<RatingEvent> {
    let mut events = Vec::new();
    for u in 0..users {
        for i in 0..items {
            if !rng.random_bool(density) {
                continue;
            }
            // occasionally rate the same item twice
            let times = if rng.random_bool(0.1) { 2 } else { 1 };
            for _ in 0..times {
                events.push(RatingEvent {
                    user: ScopedId::new("m", (u + 1) as u64),
                    item: ScopedId::new("m", (i + 1) as u64),
                    score: rng.random_range(1..=10) as f64 / 2.0,
                    timestamp: rng.random_range(0..5),
                    review_text: None,
                    summary: None,
                });
            }
        }
    }
    events
}
