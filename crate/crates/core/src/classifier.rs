//! Text to emotion-vector classification.
//!
//! [`LexiconClassifier`] is a deterministic bag-of-words baseline: it counts
//! tokens that appear in each label's word list, adds a smoothing constant
//! and normalizes. Vectors produced elsewhere (a neural model, say) enter
//! through [`load_precomputed`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::emotion::{normalize_distribution, EmotionLabel, EmotionVector, NORMALIZED_TOL, NUM_EMOTIONS};
use crate::ingest::EntityId;
use crate::store::{self, StoreError};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("cannot read lexicon {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("lexicon line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("word `{word}` is listed under both {first} and {second}")]
    OverlappingSets { word: String, first: EmotionLabel, second: EmotionLabel },
    #[error("lexicon has no words for {0}")]
    EmptySet(EmotionLabel),
    #[error("smoothing alpha must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("{0}")]
    Store(#[from] StoreError),
    #[error("entity {id}: {message}")]
    BadVector { id: String, message: String },
}

/// Names the model that produced a profile.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClassifierId {
    pub name: String,
    pub version: String,
}

impl ClassifierId {
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        let (name, version) = (name.into(), version.into());
        assert!(!name.is_empty() && !version.is_empty(), "classifier id parts must be nonempty");
        Self { name, version }
    }
}

impl fmt::Display for ClassifierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.version)
    }
}

pub trait EmotionClassifier: Sync {
    fn id(&self) -> &ClassifierId;
    fn classify(&self, text: &str) -> EmotionVector;
}

/// Per-label word sets plus the additive smoothing constant.
#[derive(Debug, Clone)]
pub struct EmotionLexicon {
    words: HashMap<String, EmotionLabel>,
    alpha: f64,
}

impl EmotionLexicon {
    /// Build from (label, word) pairs. Words are lowercased; sets must be
    /// pairwise disjoint and every label needs at least one word.
    pub fn new<I, S>(entries: I, alpha: f64) -> Result<Self, ClassifierError>
    where
        I: IntoIterator<Item = (EmotionLabel, S)>,
        S: AsRef<str>,
    {
        let mut words = HashMap::new();
        for (label, word) in entries {
            Self::insert(&mut words, label, word.as_ref())?;
        }
        Self::finish(words, alpha)
    }

    /// Parse `label<TAB>word` lines; `#` starts a comment.
    pub fn parse(text: &str, alpha: f64) -> Result<Self, ClassifierError> {
        let mut words = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (label, word) = content.split_once('\t').ok_or_else(|| ClassifierError::Parse {
                line,
                message: "expected `label<TAB>word`".into(),
            })?;
            let label: EmotionLabel = label.parse().map_err(|e: crate::emotion::EmotionError| {
                ClassifierError::Parse { line, message: e.to_string() }
            })?;
            let word = word.trim();
            if word.is_empty() || !word.chars().all(char::is_alphanumeric) {
                return Err(ClassifierError::Parse {
                    line,
                    message: format!("`{word}` is not a single alphanumeric token"),
                });
            }
            Self::insert(&mut words, label, word)?;
        }
        Self::finish(words, alpha)
    }

    pub fn load(path: &Path, alpha: f64) -> Result<Self, ClassifierError> {
        let text = fs::read_to_string(path)
            .map_err(|source| ClassifierError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, alpha)
    }

    fn insert(words: &mut HashMap<String, EmotionLabel>, label: EmotionLabel, word: &str) -> Result<(), ClassifierError> {
        let word = word.to_lowercase();
        match words.get(&word) {
            Some(&existing) if existing != label => Err(ClassifierError::OverlappingSets {
                word,
                first: existing,
                second: label,
            }),
            _ => {
                words.insert(word, label);
                Ok(())
            }
        }
    }

    fn finish(words: HashMap<String, EmotionLabel>, alpha: f64) -> Result<Self, ClassifierError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ClassifierError::BadAlpha(alpha));
        }
        for label in EmotionLabel::ALL {
            if !words.values().any(|&l| l == label) {
                return Err(ClassifierError::EmptySet(label));
            }
        }
        Ok(Self { words, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn label_of(&self, token: &str) -> Option<EmotionLabel> {
        self.words.get(token).copied()
    }

    /// Raw matched-token counts, before smoothing.
    pub fn counts(&self, text: &str) -> [usize; NUM_EMOTIONS] {
        let mut counts = [0; NUM_EMOTIONS];
        for token in tokenize(text) {
            if let Some(label) = self.label_of(&token) {
                counts[label.index()] += 1;
            }
        }
        counts
    }

    pub fn classify(&self, text: &str) -> EmotionVector {
        let counts = self.counts(text);
        let mut raw = [0.0; NUM_EMOTIONS];
        for (r, c) in raw.iter_mut().zip(counts) {
            *r = c as f64 + self.alpha;
        }
        normalize_distribution(raw).expect("smoothed counts are strictly positive")
    }
}

/// Lowercase, then split on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

pub struct LexiconClassifier {
    id: ClassifierId,
    lexicon: EmotionLexicon,
}

impl LexiconClassifier {
    pub fn new(lexicon: EmotionLexicon) -> Self {
        Self { id: ClassifierId::new("lexicon", env!("CARGO_PKG_VERSION")), lexicon }
    }

    pub fn lexicon(&self) -> &EmotionLexicon {
        &self.lexicon
    }
}

impl EmotionClassifier for LexiconClassifier {
    fn id(&self) -> &ClassifierId {
        &self.id
    }

    fn classify(&self, text: &str) -> EmotionVector {
        self.lexicon.classify(text)
    }
}

/// Load externally produced profiles from a profile file.
///
/// Every vector is rescaled to sum to one; a warning is logged when the
/// stored sum was off by more than the normalization tolerance.
pub fn load_precomputed(path: &Path) -> Result<BTreeMap<EntityId, EmotionVector>, ClassifierError> {
    let raw = store::load_profiles(path)?;
    let mut out = BTreeMap::new();
    for (id, v) in raw {
        let sum = v.sum();
        if (sum - 1.0).abs() > NORMALIZED_TOL {
            log::warn!("{}: profile {id} sums to {sum}, renormalizing", path.display());
        }
        let v = v.renormalized().map_err(|e| ClassifierError::BadVector {
            id: id.to_string(),
            message: e.to_string(),
        })?;
        out.insert(id, v);
    }
    Ok(out)
}
