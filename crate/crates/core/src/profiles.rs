//! Item, user and group emotion profiles.
//!
//! Item profiles are fixed once classified. A user profile is the mean of
//! the item profiles the user consumed and moves with every new item. A
//! group profile stands for the average user among an item's voters.

use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classifier::{ClassifierId, EmotionClassifier};
use crate::emotion::{mean, normalize_distribution, EmotionError, EmotionVector, NUM_EMOTIONS};
use crate::ingest::{ItemRecord, ScopedId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("item {0} has no overview or description text")]
    NoText(ScopedId),
    #[error("user {0} has no consumed item with a profile")]
    NoConsumption(ScopedId),
    #[error("user {user} already consumed {item}")]
    DuplicateConsumption { user: ScopedId, item: ScopedId },
    #[error("item {0} has zero votes")]
    ZeroVotes(ScopedId),
    #[error("item {0} already has a profile built from different text")]
    Conflict(ScopedId),
    #[error("{entity}: {source}")]
    Emotion { entity: ScopedId, source: EmotionError },
}

/// Hex SHA-256 of the classifier input.
pub fn text_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemProfile {
    item: ScopedId,
    mvec: EmotionVector,
    classifier: ClassifierId,
    source_hash: String,
}

impl ItemProfile {
    /// Wrap a vector produced outside the crate's classifiers.
    pub fn from_vector(item: ScopedId, mvec: EmotionVector, classifier: ClassifierId, source_hash: String) -> Self {
        Self { item, mvec, classifier, source_hash }
    }

    pub fn item(&self) -> &ScopedId {
        &self.item
    }

    pub fn mvec(&self) -> &EmotionVector {
        &self.mvec
    }

    pub fn classifier(&self) -> &ClassifierId {
        &self.classifier
    }

    pub fn source_hash(&self) -> &str {
        &self.source_hash
    }
}

pub fn build_item_profile(item: &ItemRecord, classifier: &dyn EmotionClassifier) -> Result<ItemProfile, ProfileError> {
    let text = item
        .overview
        .as_deref()
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| ProfileError::NoText(item.item.clone()))?;
    Ok(ItemProfile {
        item: item.item.clone(),
        mvec: classifier.classify(text),
        classifier: classifier.id().clone(),
        source_hash: text_digest(text),
    })
}

/// Item profiles keyed by item. Existing entries are never overwritten.
#[derive(Debug, Clone, Default)]
pub struct ItemProfileSet {
    profiles: BTreeMap<ScopedId, ItemProfile>,
}

impl ItemProfileSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a profile. Re-inserting the same source text is a no-op; a
    /// different text for a known item is a conflict.
    pub fn insert(&mut self, profile: ItemProfile) -> Result<(), ProfileError> {
        match self.profiles.get(&profile.item) {
            Some(existing) if existing.source_hash == profile.source_hash => Ok(()),
            Some(_) => Err(ProfileError::Conflict(profile.item)),
            None => {
                self.profiles.insert(profile.item.clone(), profile);
                Ok(())
            }
        }
    }

    pub fn get(&self, item: &ScopedId) -> Option<&ItemProfile> {
        self.profiles.get(item)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ItemProfile> {
        self.profiles.values()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    user: ScopedId,
    uvec: EmotionVector,
    item_count: usize,
    consumed: BTreeSet<ScopedId>,
}

impl UserProfile {
    /// A profile loaded from storage, without its consumption history.
    pub fn from_vector(user: ScopedId, uvec: EmotionVector, item_count: usize) -> Self {
        Self { user, uvec, item_count: item_count.max(1), consumed: BTreeSet::new() }
    }

    pub fn user(&self) -> &ScopedId {
        &self.user
    }

    pub fn uvec(&self) -> &EmotionVector {
        &self.uvec
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn consumed(&self) -> &BTreeSet<ScopedId> {
        &self.consumed
    }
}

/// Mean of the distinct consumed items' vectors; repeats count once.
pub fn build_user_profile(user: &ScopedId, items: &[&ItemProfile]) -> Result<UserProfile, ProfileError> {
    let mut consumed = BTreeSet::new();
    let mut vectors = Vec::with_capacity(items.len());
    for p in items {
        if consumed.insert(p.item.clone()) {
            vectors.push(p.mvec);
        }
    }
    let uvec = mean(&vectors).map_err(|_| ProfileError::NoConsumption(user.clone()))?;
    Ok(UserProfile { user: user.clone(), uvec, item_count: consumed.len(), consumed })
}

/// Fold one more item into a running mean.
pub fn update_user_profile(profile: &UserProfile, new_item: &ItemProfile) -> Result<UserProfile, ProfileError> {
    if profile.consumed.contains(&new_item.item) {
        return Err(ProfileError::DuplicateConsumption {
            user: profile.user.clone(),
            item: new_item.item.clone(),
        });
    }
    let n = profile.item_count as f64;
    let mut values = [0.0; NUM_EMOTIONS];
    for ((slot, u), m) in values.iter_mut().zip(profile.uvec.values()).zip(new_item.mvec.values()) {
        *slot = (u * n + m) / (n + 1.0);
    }
    let uvec = EmotionVector::new(values).map_err(|source| ProfileError::Emotion {
        entity: profile.user.clone(),
        source,
    })?;
    let mut consumed = profile.consumed.clone();
    consumed.insert(new_item.item.clone());
    Ok(UserProfile { user: profile.user.clone(), uvec, item_count: profile.item_count + 1, consumed })
}

/// What a group-profile input vector represents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupInput {
    /// Sum of per-voter profiles; divided by the vote count, then normalized.
    Aggregate([f64; NUM_EMOTIONS]),
    /// Already a distribution (an item profile); the group mean equals it.
    Distribution(EmotionVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupProfile {
    pub item: ScopedId,
    pub group_uvec: EmotionVector,
    pub vote_count: u64,
}

pub fn group_profile(item: &ScopedId, input: GroupInput, vote_count: u64) -> Result<GroupProfile, ProfileError> {
    if vote_count == 0 {
        return Err(ProfileError::ZeroVotes(item.clone()));
    }
    let group_uvec = match input {
        GroupInput::Aggregate(sum) => {
            let per_voter = sum.map(|x| x / vote_count as f64);
            normalize_distribution(per_voter).map_err(|source| ProfileError::Emotion {
                entity: item.clone(),
                source,
            })?
        }
        GroupInput::Distribution(v) => v,
    };
    Ok(GroupProfile { item: item.clone(), group_uvec, vote_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{EmotionLexicon, LexiconClassifier};
    use crate::emotion::EmotionLabel;

    fn classifier() -> LexiconClassifier {
        let mut entries: Vec<(EmotionLabel, &str)> = EmotionLabel::ALL.iter().map(|&l| (l, l.name())).collect();
        entries.extend([(EmotionLabel::Happiness, "sunny"), (EmotionLabel::Happiness, "cheer")]);
        LexiconClassifier::new(EmotionLexicon::new(entries, 1.0).unwrap())
    }

    fn record(id: &str, overview: Option<&str>) -> ItemRecord {
        ItemRecord {
            item: ScopedId::new("tmdb", id),
            title: id.into(),
            overview: overview.map(String::from),
            vote_count: None,
            vote_average: None,
            external_id: None,
        }
    }

    fn profile(id: &str, v: [f64; 7]) -> ItemProfile {
        ItemProfile::from_vector(
            ScopedId::new("mlsm", id),
            EmotionVector::new(v).unwrap(),
            ClassifierId::new("test", "0"),
            id.into(),
        )
    }

    #[test]
    fn no_text_is_an_error() {
        let c = classifier();
        assert!(matches!(build_item_profile(&record("1", None), &c), Err(ProfileError::NoText(_))));
        assert!(matches!(build_item_profile(&record("1", Some("  \n")), &c), Err(ProfileError::NoText(_))));
    }

    #[test]
    fn item_profile_is_deterministic_and_tagged() {
        let c = classifier();
        let r = record("7", Some("A sunny day, cheer and happiness."));
        let a = build_item_profile(&r, &c).unwrap();
        let b = build_item_profile(&r, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mvec().dominant(), EmotionLabel::Happiness);
        assert_eq!(a.classifier().name, "lexicon");
        assert_eq!(a.source_hash(), text_digest("A sunny day, cheer and happiness."));
    }

    #[test]
    fn profile_set_is_append_only() {
        let c = classifier();
        let mut set = ItemProfileSet::new();
        let first = build_item_profile(&record("1", Some("sunny")), &c).unwrap();
        set.insert(first.clone()).unwrap();
        set.insert(first.clone()).unwrap();
        let other = build_item_profile(&record("1", Some("anger")), &c).unwrap();
        assert!(matches!(set.insert(other), Err(ProfileError::Conflict(_))));
        assert_eq!(set.get(first.item()).unwrap(), &first);
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn single_item_user() {
        let p = profile("1", [0.1, 0.2, 0.3, 0.1, 0.1, 0.1, 0.1]);
        let u = build_user_profile(&ScopedId::new("mlsm", "400"), &[&p]).unwrap();
        assert_eq!(u.uvec(), p.mvec());
        assert_eq!(u.item_count(), 1);
    }

    #[test]
    fn forty_three_items_counted() {
        let items: Vec<ItemProfile> = (0..43).map(|i| profile(&i.to_string(), [1.0 / 7.0; 7])).collect();
        let mut refs: Vec<&ItemProfile> = items.iter().collect();
        refs.push(&items[0]);
        let u = build_user_profile(&ScopedId::new("mlsm", "400"), &refs).unwrap();
        assert_eq!(u.item_count(), 43);
    }

    #[test]
    fn no_consumption() {
        assert!(matches!(
            build_user_profile(&ScopedId::new("mlsm", "1"), &[]),
            Err(ProfileError::NoConsumption(_))
        ));
    }

    #[test]
    fn update_with_same_vector_is_stable() {
        let v = [0.2, 0.1, 0.1, 0.2, 0.1, 0.2, 0.1];
        let a = profile("1", v);
        let b = profile("2", v);
        let u = build_user_profile(&ScopedId::new("mlsm", "9"), &[&a]).unwrap();
        let u2 = update_user_profile(&u, &b).unwrap();
        assert_eq!(u2.item_count(), 2);
        for (x, y) in u2.uvec().values().iter().zip(v) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(matches!(update_user_profile(&u2, &a), Err(ProfileError::DuplicateConsumption { .. })));
    }

    #[test]
    fn group_from_aggregate() {
        let v = EmotionVector::new([0.1, 0.2, 0.3, 0.1, 0.1, 0.1, 0.1]).unwrap();
        let item = ScopedId::new("tmdb", "2");
        let g = group_profile(&item, GroupInput::Aggregate(v.values().map(|x| 3.0 * x)), 3).unwrap();
        for (a, b) in g.group_uvec.values().iter().zip(v.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        let g = group_profile(&item, GroupInput::Distribution(v), 100).unwrap();
        assert_eq!(g.group_uvec, v);
        assert_eq!(g.vote_count, 100);
        assert!(matches!(group_profile(&item, GroupInput::Distribution(v), 0), Err(ProfileError::ZeroVotes(_))));
    }
}
