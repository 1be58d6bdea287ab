//! Pure fuzzy-aggregation math: per-class membership degrees, local
//! max-aggregation over keywords, and weighted global fusion.
//!
//! Everything in this module is deterministic and side-effect free. Membership
//! degrees are independent per class and deliberately *not* a probability
//! simplex: a text can belong strongly to several classes at once, or to none.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Absolute tolerance for real-number equality checks throughout the crate.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum FuzzyError {
    #[error("class set needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("class name must be non-empty")]
    EmptyClassName,
    #[error("duplicate class name `{0}`")]
    DuplicateClass(String),
    #[error("membership degree {0} outside [0,1]")]
    DegreeOutOfRange(f64),
    #[error("keyword set is empty")]
    EmptyKeywordSet,
    #[error("keyword surface must be non-empty")]
    EmptySurface,
    #[error("all raw weights are zero for class column {0}")]
    AllZeroWeights(usize),
    #[error("negative raw weight {0}")]
    NegativeWeight(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A sentiment class, identified by a short name such as `positive`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SentimentClass {
    name: String,
}

impl SentimentClass {
    pub fn new(name: impl Into<String>) -> Result<Self, FuzzyError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(FuzzyError::EmptyClassName);
        }
        Ok(Self { name })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Display for SentimentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// An ordered set of sentiment classes. The order is stable and defines the
/// layout of every [`MembershipVector`] built against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSet {
    classes: Vec<SentimentClass>,
    includes_other: bool,
}

impl ClassSet {
    /// Builds a class set from names. Requires at least two distinct,
    /// non-empty names. `includes_other` marks the last class as the
    /// catch-all bucket for sentiment not covered by the polar classes.
    pub fn new<I, S>(names: I, includes_other: bool) -> Result<Self, FuzzyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut classes = Vec::new();
        for name in names {
            let class = SentimentClass::new(name)?;
            if classes.contains(&class) {
                return Err(FuzzyError::DuplicateClass(class.name));
            }
            classes.push(class);
        }
        if classes.len() < 2 {
            return Err(FuzzyError::TooFewClasses(classes.len()));
        }
        Ok(Self {
            classes,
            includes_other,
        })
    }

    /// The binary `positive` / `negative` set used by the sentiment
    /// experiments.
    pub fn positive_negative() -> Self {
        Self::new(["positive", "negative"], false).expect("static class set")
    }

    /// `positive` / `negative` / `other`, with `other` as the catch-all.
    pub fn positive_negative_other() -> Self {
        Self::new(["positive", "negative", "other"], true).expect("static class set")
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn includes_other(&self) -> bool {
        self.includes_other
    }

    pub fn classes(&self) -> &[SentimentClass] {
        &self.classes
    }

    pub fn names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }

    /// The catch-all class, when the set declares one.
    pub fn other_class(&self) -> Option<&SentimentClass> {
        if self.includes_other {
            self.classes.last()
        } else {
            None
        }
    }
}

/// Per-class membership degrees in `[0,1]`, laid out in [`ClassSet`] order.
///
/// Values are independent across classes and are not required to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MembershipVector {
    values: Vec<f64>,
}

impl MembershipVector {
    /// Validates that every degree is finite and in `[0,1]`.
    pub fn new(values: Vec<f64>) -> Result<Self, FuzzyError> {
        for &v in &values {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(FuzzyError::DegreeOutOfRange(v));
            }
        }
        Ok(Self { values })
    }

    /// Clamps every value into `[0,1]`, mapping non-finite input to 0.
    pub fn clamped(values: Vec<f64>) -> Self {
        Self {
            values: values
                .into_iter()
                .map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 })
                .collect(),
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, class_index: usize) -> f64 {
        self.values[class_index]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// A sentiment-bearing span extracted from the input, with its per-class
/// membership degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub surface: String,
    pub memberships: MembershipVector,
}

impl Keyword {
    pub fn new(surface: impl Into<String>, memberships: MembershipVector) -> Result<Self, FuzzyError> {
        let surface = surface.into();
        if surface.trim().is_empty() {
            return Err(FuzzyError::EmptySurface);
        }
        Ok(Self {
            surface,
            memberships,
        })
    }
}

/// A portion of the input text without emotional overlap, carrying the
/// keywords found inside it and the membership degrees aggregated from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubUnit {
    pub text: String,
    pub keywords: Vec<Keyword>,
    pub memberships: MembershipVector,
}

impl SubUnit {
    /// Builds a sub-unit whose memberships are the per-class max over its
    /// keywords ([`aggregate_local`]).
    pub fn from_keywords(
        text: impl Into<String>,
        keywords: Vec<Keyword>,
        classes: &ClassSet,
    ) -> Result<Self, FuzzyError> {
        let memberships = aggregate_local(&keywords, classes)?;
        Ok(Self {
            text: text.into(),
            keywords,
            memberships,
        })
    }

    /// A sub-unit with no extracted keywords. It carries an all-zeros
    /// membership vector and still participates in fusion with its own
    /// weight row.
    pub fn keywordless(text: impl Into<String>, classes: &ClassSet) -> Self {
        Self {
            text: text.into(),
            keywords: Vec::new(),
            memberships: MembershipVector::zeros(classes.len()),
        }
    }
}

/// Class-specific fusion weights: one nonnegative weight per (sub-unit,
/// class), with each class column summing to 1 within [`TOLERANCE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightMatrix {
    // values[sub_unit][class]
    values: Vec<Vec<f64>>,
}

impl WeightMatrix {
    /// Number of sub-unit rows.
    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn class_count(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn get(&self, sub_unit: usize, class: usize) -> f64 {
        self.values[sub_unit][class]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// Per-class max over the keyword memberships: the strongest sentiment
/// influence among the keywords determines the sub-unit's degree.
///
/// Errors with [`FuzzyError::EmptyKeywordSet`] when `keywords` is empty;
/// keywordless sub-units are modelled by [`SubUnit::keywordless`] instead.
pub fn aggregate_local(
    keywords: &[Keyword],
    classes: &ClassSet,
) -> Result<MembershipVector, FuzzyError> {
    if keywords.is_empty() {
        return Err(FuzzyError::EmptyKeywordSet);
    }
    let dim = classes.len();
    for kw in keywords {
        if kw.memberships.len() != dim {
            return Err(FuzzyError::DimensionMismatch {
                expected: dim,
                got: kw.memberships.len(),
            });
        }
    }
    let values = (0..dim)
        .map(|c| {
            keywords
                .iter()
                .map(|kw| kw.memberships.get(c))
                .fold(0.0_f64, f64::max)
        })
        .collect();
    MembershipVector::new(values)
}

/// Scales each class column of raw nonnegative weights to sum to 1,
/// preserving relative proportions. Input layout is `raw[sub_unit][class]`.
pub fn normalize_weights(raw: &[Vec<f64>]) -> Result<WeightMatrix, FuzzyError> {
    let m = raw.len();
    if m == 0 {
        return Err(FuzzyError::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    let dim = raw[0].len();
    for row in raw {
        if row.len() != dim {
            return Err(FuzzyError::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        for &w in row {
            if !w.is_finite() || w < 0.0 {
                return Err(FuzzyError::NegativeWeight(w));
            }
        }
    }
    let mut values = vec![vec![0.0; dim]; m];
    for c in 0..dim {
        let sum: f64 = raw.iter().map(|row| row[c]).sum();
        if sum <= 0.0 {
            return Err(FuzzyError::AllZeroWeights(c));
        }
        for (j, row) in raw.iter().enumerate() {
            values[j][c] = row[c] / sum;
        }
    }
    Ok(WeightMatrix { values })
}

/// Global decision fusion: per class, the weighted sum of sub-unit degrees
/// under that class's weight column. The result is clamped into `[0,1]` to
/// absorb floating-point rounding.
pub fn fuse_global(
    subunits: &[SubUnit],
    weights: &WeightMatrix,
) -> Result<MembershipVector, FuzzyError> {
    if weights.m() != subunits.len() {
        return Err(FuzzyError::DimensionMismatch {
            expected: subunits.len(),
            got: weights.m(),
        });
    }
    let dim = weights.class_count();
    for su in subunits {
        if su.memberships.len() != dim {
            return Err(FuzzyError::DimensionMismatch {
                expected: dim,
                got: su.memberships.len(),
            });
        }
    }
    let mut fused = vec![0.0; dim];
    for (c, slot) in fused.iter_mut().enumerate() {
        *slot = subunits
            .iter()
            .enumerate()
            .map(|(j, su)| weights.get(j, c) * su.memberships.get(c))
            .sum();
    }
    Ok(MembershipVector::clamped(fused))
}
