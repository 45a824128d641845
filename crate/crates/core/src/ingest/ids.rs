use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Raw identifier as it appears in a source file.
///
/// Ordering is numeric-aware: all-digit ids compare by value (so "9" sorts
/// before "10") and come before alphanumeric ids, which compare as strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub struct EntityId {
    raw: String,
    numeric: Option<u64>,
}

impl EntityId {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let numeric = if !raw.is_empty() && raw.len() <= 19 && raw.bytes().all(|b| b.is_ascii_digit()) {
            raw.parse().ok()
        } else {
            None
        };
        Self { raw, numeric }
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }
}

impl From<String> for EntityId {
    fn from(s: String) -> Self {
        Self::new(s)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

impl From<u64> for EntityId {
    fn from(n: u64) -> Self {
        Self::new(n.to_string())
    }
}

impl From<EntityId> for String {
    fn from(id: EntityId) -> Self {
        id.raw
    }
}

impl Ord for EntityId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.numeric, other.numeric) {
            (Some(a), Some(b)) => a.cmp(&b).then_with(|| self.raw.cmp(&other.raw)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => self.raw.cmp(&other.raw),
        }
    }
}

impl PartialOrd for EntityId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// A named dataset plus the information domain it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DatasetId {
    pub name: String,
    pub domain: String,
}

impl DatasetId {
    pub fn new(name: impl Into<String>, domain: impl Into<String>) -> Self {
        Self { name: name.into(), domain: domain.into() }
    }

    pub fn scope(&self, id: impl Into<EntityId>) -> ScopedId {
        ScopedId::new(self.name.clone(), id)
    }
}

/// An entity id qualified by the dataset it came from.
///
/// Raw ids collide across datasets (user 400 in one ratings dump is not user
/// 400 in another), so everything downstream of ingestion works on these.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScopedId {
    pub dataset: String,
    pub id: EntityId,
}

impl ScopedId {
    pub fn new(dataset: impl Into<String>, id: impl Into<EntityId>) -> Self {
        Self { dataset: dataset.into(), id: id.into() }
    }
}

impl fmt::Display for ScopedId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.dataset, self.id)
    }
}

/// Bijection between alphanumeric source ids and dense numeric ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMap {
    by_raw: HashMap<String, u64>,
    by_numeric: BTreeMap<u64, String>,
    next: u64,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.by_numeric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_numeric.is_empty()
    }

    /// Numeric id for `raw`, assigning the next free value on first sight.
    pub fn to_numeric_id(&mut self, raw: &str) -> u64 {
        if let Some(&n) = self.by_raw.get(raw) {
            return n;
        }
        let n = self.next;
        self.by_raw.insert(raw.to_string(), n);
        self.by_numeric.insert(n, raw.to_string());
        self.next += 1;
        self.debug_check();
        n
    }

    pub fn get_numeric(&self, raw: &str) -> Option<u64> {
        self.by_raw.get(raw).copied()
    }

    pub fn to_raw_id(&self, numeric: u64) -> Result<&str, IngestError> {
        self.by_numeric
            .get(&numeric)
            .map(String::as_str)
            .ok_or(IngestError::UnknownNumericId(numeric))
    }

    /// Record an existing pair, e.g. when loading a persisted map.
    pub fn insert(&mut self, raw: &str, numeric: u64) -> Result<(), IngestError> {
        match (self.by_raw.get(raw), self.by_numeric.get(&numeric)) {
            (Some(&n), Some(r)) if n == numeric && r == raw => return Ok(()),
            (None, None) => {}
            _ => {
                return Err(IngestError::IdMapConflict { raw: raw.to_string(), numeric });
            }
        }
        self.by_raw.insert(raw.to_string(), numeric);
        self.by_numeric.insert(numeric, raw.to_string());
        self.next = self.next.max(numeric + 1);
        self.debug_check();
        Ok(())
    }

    /// Pairs in ascending numeric order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &str)> {
        self.by_numeric.iter().map(|(&n, r)| (n, r.as_str()))
    }

    fn debug_check(&self) {
        debug_assert_eq!(self.by_raw.len(), self.by_numeric.len());
        debug_assert!(self
            .by_numeric
            .iter()
            .all(|(n, r)| self.by_raw.get(r) == Some(n)));
    }
}
