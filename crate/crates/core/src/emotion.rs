//! Seven-emotion vectors and the similarity math built on them.
//!
//! Every profile in the crate, whether it describes an item, a user or a
//! group of voters, is an [`EmotionVector`]: a probability distribution over
//! the seven [`EmotionLabel`]s in a fixed canonical order. Affinity between
//! two profiles is their cosine similarity, carried as an [`Aii`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Number of emotion components in every profile vector.
pub const NUM_EMOTIONS: usize = 7;

/// Norms at or below this are treated as "no emotional signal".
pub const ZERO_NORM_EPS: f64 = 1e-12;

/// Tolerance on the component sum for a vector to count as normalized.
pub const NORMALIZED_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmotionError {
    #[error("component {index} is not a finite number ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("component {index} is negative ({value})")]
    Negative { index: usize, value: f64 },
    #[error("vector has zero norm; the entity carries no emotional signal")]
    ZeroVector,
    #[error("no positive mass left after clamping negatives")]
    DegenerateInput,
    #[error("cannot average an empty list of vectors")]
    EmptyInput,
    #[error("unknown emotion label `{0}`")]
    UnknownLabel(String),
}

/// The seven emotion classes, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmotionLabel {
    Neutral,
    Happiness,
    Sadness,
    Hate,
    Anger,
    Disgust,
    Surprise,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; NUM_EMOTIONS] = [
        EmotionLabel::Neutral,
        EmotionLabel::Happiness,
        EmotionLabel::Sadness,
        EmotionLabel::Hate,
        EmotionLabel::Anger,
        EmotionLabel::Disgust,
        EmotionLabel::Surprise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Canonical lowercase name, as used in file headers.
    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Happiness => "happiness",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Hate => "hate",
            EmotionLabel::Anger => "anger",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Surprise => "surprise",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = EmotionError;

    /// Accepts canonical names plus the common aliases found in source tables
    /// ("fear" for hate, "joy"/"happy" for happiness, "sad", "angry").
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let label = match s.trim().to_ascii_lowercase().as_str() {
            "neutral" => EmotionLabel::Neutral,
            "happiness" | "happy" | "joy" => EmotionLabel::Happiness,
            "sadness" | "sad" => EmotionLabel::Sadness,
            "hate" | "fear" => EmotionLabel::Hate,
            "anger" | "angry" => EmotionLabel::Anger,
            "disgust" => EmotionLabel::Disgust,
            "surprise" => EmotionLabel::Surprise,
            _ => return Err(EmotionError::UnknownLabel(s.to_string())),
        };
        Ok(label)
    }
}

/// Nonnegative, finite 7-component emotion profile.
///
/// Construction validates finiteness and sign but not the sum; use
/// [`EmotionVector::is_normalized`] or [`normalize_distribution`] when a
/// proper distribution is required.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionVector([f64; NUM_EMOTIONS]);

impl EmotionVector {
    pub fn new(values: [f64; NUM_EMOTIONS]) -> Result<Self, EmotionError> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(EmotionError::NonFinite { index, value });
            }
            if value < 0.0 {
                return Err(EmotionError::Negative { index, value });
            }
        }
        Ok(Self(values))
    }

    pub fn uniform() -> Self {
        Self([1.0 / NUM_EMOTIONS as f64; NUM_EMOTIONS])
    }

    /// Point mass on a single label.
    pub fn basis(label: EmotionLabel) -> Self {
        let mut values = [0.0; NUM_EMOTIONS];
        values[label.index()] = 1.0;
        Self(values)
    }

    pub fn values(&self) -> &[f64; NUM_EMOTIONS] {
        &self.0
    }

    pub fn get(&self, label: EmotionLabel) -> f64 {
        self.0[label.index()]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        inner(self, self).sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.sum() - 1.0).abs() <= NORMALIZED_TOL
    }

    /// Rescale so the components sum to one.
    pub fn renormalized(&self) -> Result<Self, EmotionError> {
        normalize_distribution(self.0)
    }

    pub fn dominant(&self) -> EmotionLabel {
        rank_moods(self)[0].0
    }
}

/// Affective index indicator: cosine similarity between two profiles.
///
/// Always finite, so the ordering is total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aii(f64);

impl Aii {
    /// Wraps a raw score, e.g. one read back from a link file.
    pub fn new(value: f64) -> Option<Self> {
        (value.is_finite() && (-1.0..=1.0).contains(&value)).then_some(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Eq for Aii {}

impl PartialOrd for Aii {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Aii {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Aii {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

pub fn inner(x: &EmotionVector, y: &EmotionVector) -> f64 {
    x.0.iter().zip(y.0.iter()).map(|(a, b)| a * b).sum()
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine_similarity(x: &EmotionVector, y: &EmotionVector) -> Result<Aii, EmotionError> {
    let nx = x.norm();
    let ny = y.norm();
    if nx <= ZERO_NORM_EPS || ny <= ZERO_NORM_EPS {
        return Err(EmotionError::ZeroVector);
    }
    Ok(Aii((inner(x, y) / (nx * ny)).clamp(-1.0, 1.0)))
}

/// Clamp negatives to zero and divide by the total mass.
pub fn normalize_distribution(raw: [f64; NUM_EMOTIONS]) -> Result<EmotionVector, EmotionError> {
    let mut clamped = [0.0; NUM_EMOTIONS];
    for (index, (&value, slot)) in raw.iter().zip(clamped.iter_mut()).enumerate() {
        if !value.is_finite() {
            return Err(EmotionError::NonFinite { index, value });
        }
        *slot = value.max(0.0);
    }
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        return Err(EmotionError::DegenerateInput);
    }
    for slot in clamped.iter_mut() {
        *slot /= total;
    }
    Ok(EmotionVector(clamped))
}

/// Component-wise arithmetic mean.
pub fn mean(vectors: &[EmotionVector]) -> Result<EmotionVector, EmotionError> {
    if vectors.is_empty() {
        return Err(EmotionError::EmptyInput);
    }
    let mut acc = [0.0; NUM_EMOTIONS];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v.0.iter()) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    for a in acc.iter_mut() {
        *a /= n;
    }
    Ok(EmotionVector(acc))
}

/// Labels ordered by descending value; ties keep canonical label order.
pub fn rank_moods(v: &EmotionVector) -> Vec<(EmotionLabel, f64)> {
    let mut ranked: Vec<(EmotionLabel, f64)> =
        EmotionLabel::ALL.iter().map(|&l| (l, v.get(l))).collect();
    // stable sort keeps canonical order among equal values
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}

/// Short prose reciting the mood ranking, dominant mood first.
pub fn affective_description(v: &EmotionVector, subject: &str) -> String {
    let ranked = rank_moods(v);
    let pct = |x: f64| format!("{:.1}%", x * 100.0);
    let (top, top_value) = ranked[0];
    let (last, last_value) = ranked[NUM_EMOTIONS - 1];
    let middle: Vec<String> = ranked[1..NUM_EMOTIONS - 1]
        .iter()
        .map(|(l, x)| format!("{} ({})", l, pct(*x)))
        .collect();
    format!(
        "{subject} is dominated by {top} ({}), followed by {}, and shows the least {last} ({}).",
        pct(top_value),
        middle.join(", "),
        pct(last_value),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(values: [f64; 7]) -> EmotionVector {
        EmotionVector::new(values).unwrap()
    }

    const MOVIE_4470: [f64; 7] = [
        0.15705037, 0.08608995, 0.15583897, 0.07506061, 0.08469571, 0.26612538, 0.17513901,
    ];
    const MOVIE_189111: [f64; 7] = [
        0.11876434, 0.05086204, 0.12669845, 0.3391073, 0.13069303, 0.13746719, 0.096407644,
    ];

    #[test]
    fn label_order_is_canonical() {
        let names: Vec<_> = EmotionLabel::ALL.iter().map(|l| l.name()).collect();
        assert_eq!(
            names,
            ["neutral", "happiness", "sadness", "hate", "anger", "disgust", "surprise"]
        );
        for (i, l) in EmotionLabel::ALL.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(EmotionLabel::from_index(i), Some(*l));
        }
    }

    #[test]
    fn aliases_parse() {
        assert_eq!("fear".parse::<EmotionLabel>().unwrap(), EmotionLabel::Hate);
        assert_eq!("Joy".parse::<EmotionLabel>().unwrap(), EmotionLabel::Happiness);
        assert_eq!("happy".parse::<EmotionLabel>().unwrap(), EmotionLabel::Happiness);
        assert_eq!("sad".parse::<EmotionLabel>().unwrap(), EmotionLabel::Sadness);
        assert!("love".parse::<EmotionLabel>().is_err());
    }

    #[test]
    fn rejects_bad_components() {
        assert!(matches!(
            EmotionVector::new([0.0, -0.1, 0.0, 0.0, 0.0, 0.0, 1.0]),
            Err(EmotionError::Negative { index: 1, .. })
        ));
        assert!(matches!(
            EmotionVector::new([f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
            Err(EmotionError::NonFinite { index: 0, .. })
        ));
    }

    #[test]
    fn inner_on_basis() {
        let e0 = EmotionVector::basis(EmotionLabel::Neutral);
        let e1 = EmotionVector::basis(EmotionLabel::Happiness);
        assert_eq!(inner(&e0, &e0), 1.0);
        assert_eq!(inner(&e0, &e1), 0.0);
    }

    #[test]
    fn cosine_of_self_is_one() {
        let x = v(MOVIE_4470);
        assert!((cosine_similarity(&x, &x).unwrap().value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_known_pair() {
        let mlsm_400 = v([0.16353, 0.08874, 0.12709, 0.20332, 0.11934, 0.15881, 0.13918]);
        let ml20m_66274 = v([0.16250, 0.08609, 0.12654, 0.20701, 0.11776, 0.16005, 0.14005]);
        let aii = cosine_similarity(&mlsm_400, &ml20m_66274).unwrap().value();
        assert!((aii - 0.99992).abs() < 1e-4, "{aii}");
    }

    #[test]
    fn cosine_zero_vector_is_an_error() {
        let zero = v([0.0; 7]);
        let x = EmotionVector::uniform();
        assert_eq!(cosine_similarity(&zero, &x), Err(EmotionError::ZeroVector));
        assert_eq!(cosine_similarity(&x, &zero), Err(EmotionError::ZeroVector));
    }

    #[test]
    fn normalize_examples() {
        let a = normalize_distribution([2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(a, EmotionVector::basis(EmotionLabel::Neutral));

        let b = normalize_distribution([1.0; 7]).unwrap();
        for x in b.values() {
            assert!((x - 1.0 / 7.0).abs() < 1e-15);
        }

        // clamp -0.2 to 0, then divide by 0.5
        let c = normalize_distribution([0.1, -0.2, 0.3, 0.0, 0.0, 0.0, 0.1]).unwrap();
        let want = [0.2, 0.0, 0.6, 0.0, 0.0, 0.0, 0.2];
        for (x, w) in c.values().iter().zip(want) {
            assert!((x - w).abs() < 1e-15);
        }
        assert!((c.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalize_degenerate() {
        assert_eq!(normalize_distribution([0.0; 7]), Err(EmotionError::DegenerateInput));
        assert_eq!(
            normalize_distribution([-1.0, 0.0, -2.0, 0.0, 0.0, 0.0, 0.0]),
            Err(EmotionError::DegenerateInput)
        );
    }

    #[test]
    fn mean_examples() {
        let x = v(MOVIE_4470);
        assert_eq!(mean(&[x]).unwrap(), x);
        let m = mean(&[x, x]).unwrap();
        for (a, b) in m.values().iter().zip(x.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(mean(&[]), Err(EmotionError::EmptyInput));
    }

    #[test]
    fn dominant_moods_of_tmdb_examples() {
        assert_eq!(v(MOVIE_4470).dominant(), EmotionLabel::Disgust);
        let ranked = rank_moods(&v(MOVIE_189111));
        assert_eq!(ranked[0], (EmotionLabel::Hate, 0.3391073));
    }

    #[test]
    fn uniform_ranks_in_canonical_order() {
        let ranked: Vec<_> = rank_moods(&EmotionVector::uniform()).into_iter().map(|r| r.0).collect();
        assert_eq!(ranked, EmotionLabel::ALL.to_vec());
    }

    fn label_order_in(text: &str) -> Vec<EmotionLabel> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter_map(|w| {
                EmotionLabel::ALL.iter().copied().find(|l| l.name() == w)
            })
            .collect()
    }

    #[test]
    fn description_follows_ranking() {
        let x = v(MOVIE_4470);
        let text = affective_description(&x, "Movie 4470");
        assert!(text.starts_with("Movie 4470 is dominated by disgust"), "{text}");
        let order = label_order_in(&text);
        let ranked: Vec<_> = rank_moods(&x).into_iter().map(|r| r.0).collect();
        assert_eq!(order, ranked);

        let uniform = affective_description(&EmotionVector::uniform(), "It");
        assert_eq!(label_order_in(&uniform), EmotionLabel::ALL.to_vec());
    }
}
