//! Evaluation metrics: robustness score, monotonicity score, macro F1 with
//! the clear/ambiguous split, and the empirical stability (Lipschitz-style)
//! estimate.
//!
//! All metric computations are pure folds over immutable pair lists and are
//! safe to parallelize; robustness uses compensated summation so results are
//! reproducible to well below the crate tolerance regardless of fold order.

use crate::fuzzy::{MembershipVector, TOLERANCE};
use crate::text;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("pair set is empty")]
    EmptyPairSet,
    #[error("pair {0} is missing shift labels")]
    MissingShiftLabels(usize),
    #[error("class index {index} out of range for {dim}-class pairs")]
    ClassOutOfRange { index: usize, dim: usize },
    #[error("expected exactly 2 polar classes, got {0}")]
    WrongClassCount(usize),
    #[error("prediction and gold lengths differ: {predictions} vs {gold}")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("every pair has zero distance")]
    ZeroDistancePairOnly,
}

/// An original/perturbed vector pair, optionally carrying per-class shift
/// direction labels for monotonicity scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub original: Vec<f64>,
    pub perturbed: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_labels: Option<Vec<i8>>,
}

impl EvalPair {
    pub fn new(original: Vec<f64>, perturbed: Vec<f64>) -> Self {
        Self {
            original,
            perturbed,
            shift_labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<i8>) -> Self {
        self.shift_labels = Some(labels);
        self
    }
}

/// Sign with a dead band: deltas smaller than [`TOLERANCE`] count as zero,
/// so "no change" labels are matchable at floating point.
pub fn sgn(delta: f64) -> i8 {
    if delta.abs() < TOLERANCE {
        0
    } else if delta > 0.0 {
        1
    } else {
        -1
    }
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for v in values {
        let y = v - compensation;
        let t = sum + y;
        compensation = (t - sum) - y;
        sum = t;
    }
    sum
}

fn check_class(pairs: &[EvalPair], class_index: usize) -> Result<(), EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyPairSet);
    }
    let dim = pairs[0].original.len();
    if class_index >= dim {
        return Err(EvalError::ClassOutOfRange {
            index: class_index,
            dim,
        });
    }
    Ok(())
}

/// Robustness score for one class: `1 − mean |μ_C(X) − μ_C(X′)|` over the
/// pairs. 1 means perturbations left the degrees untouched.
pub fn robustness_score(pairs: &[EvalPair], class_index: usize) -> Result<f64, EvalError> {
    check_class(pairs, class_index)?;
    let total = kahan_sum(
        pairs
            .iter()
            .map(|p| (p.original[class_index] - p.perturbed[class_index]).abs()),
    );
    Ok(1.0 - total / pairs.len() as f64)
}

/// Monotonicity score for one class: the fraction of pairs whose membership
/// change direction matches the annotated shift label.
pub fn monotonicity_score(pairs: &[EvalPair], class_index: usize) -> Result<f64, EvalError> {
    check_class(pairs, class_index)?;
    let mut hits = 0usize;
    for (i, pair) in pairs.iter().enumerate() {
        let labels = pair
            .shift_labels
            .as_ref()
            .ok_or(EvalError::MissingShiftLabels(i))?;
        let delta = pair.perturbed[class_index] - pair.original[class_index];
        if sgn(delta) == labels[class_index] {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

/// Which side of the ambiguity threshold a binary prediction falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    Clear,
    Ambiguous,
}

/// Argmax labeling over exactly the two polar classes, with the
/// clear/ambiguous split. Returns `None` (neutral) when the degrees tie
/// within [`TOLERANCE`]; the bucket is `Clear` only when the absolute
/// difference strictly exceeds `threshold`.
pub fn classify_and_split(
    memberships: &MembershipVector,
    threshold: f64,
) -> Result<(Option<usize>, Bucket), EvalError> {
    if memberships.len() != 2 {
        return Err(EvalError::WrongClassCount(memberships.len()));
    }
    let diff = memberships.get(0) - memberships.get(1);
    let label = match sgn(diff) {
        0 => None,
        1 => Some(0),
        _ => Some(1),
    };
    let bucket = if diff.abs() > threshold {
        Bucket::Clear
    } else {
        Bucket::Ambiguous
    };
    Ok((label, bucket))
}

/// Macro-averaged F1 over the classes present in `gold`. A `None`
/// prediction (neutral) against a polar gold label counts as a false
/// negative for that gold class.
pub fn f1_score(predictions: &[Option<String>], gold: &[String]) -> Result<f64, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::EmptyPairSet);
    }
    let mut classes: Vec<&String> = gold.iter().collect();
    classes.sort();
    classes.dedup();
    let mut f1_sum = 0.0;
    for class in &classes {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (pred, g) in predictions.iter().zip(gold) {
            let predicted_this = pred.as_deref() == Some(class.as_str());
            let gold_this = g == *class;
            match (predicted_this, gold_this) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        f1_sum += f1;
    }
    Ok(f1_sum / classes.len() as f64)
}

/// Text distance used by the stability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Levenshtein over lowercase tokens, divided by the larger token count.
    #[default]
    TokenLevenshtein,
    /// Levenshtein over characters, divided by the larger character count.
    CharLevenshtein,
}

impl DistanceKind {
    pub fn distance(&self, a: &str, b: &str) -> f64 {
        match self {
            DistanceKind::TokenLevenshtein => text::token_distance(a, b),
            DistanceKind::CharLevenshtein => {
                let ca: Vec<char> = a.to_lowercase().chars().collect();
                let cb: Vec<char> = b.to_lowercase().chars().collect();
                let max_len = ca.len().max(cb.len());
                if max_len == 0 {
                    return 0.0;
                }
                char_levenshtein(&ca, &cb) as f64 / max_len as f64
            }
        }
    }
}

fn char_levenshtein(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ai) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, bj) in b.iter().enumerate() {
            let cost = usize::from(ai != bj);
            curr[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// A text pair with its membership vectors, input to [`estimate_stability`].
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityPair {
    pub original_text: String,
    pub perturbed_text: String,
    pub pair: EvalPair,
}

/// Empirical stability estimate: per pair, the worst-class membership delta
/// divided by the text distance; `k_hat` is the maximum ratio observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityEstimate {
    pub k_hat: f64,
    pub per_pair_ratios: Vec<f64>,
    pub distance_kind: DistanceKind,
}

pub fn estimate_stability(
    pairs: &[StabilityPair],
    distance_kind: DistanceKind,
) -> Result<StabilityEstimate, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyPairSet);
    }
    let mut ratios = Vec::with_capacity(pairs.len());
    for p in pairs {
        let d = distance_kind.distance(&p.original_text, &p.perturbed_text);
        if d <= 0.0 {
            continue;
        }
        let delta = p
            .pair
            .original
            .iter()
            .zip(&p.pair.perturbed)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        ratios.push(delta / d);
    }
    if ratios.is_empty() {
        return Err(EvalError::ZeroDistancePairOnly);
    }
    let k_hat = ratios.iter().copied().fold(0.0_f64, f64::max);
    Ok(StabilityEstimate {
        k_hat,
        per_pair_ratios: ratios,
        distance_kind,
    })
}

/// Per-method aggregates for the comparison report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MethodReport {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rs_by_level: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ms_by_class: BTreeMap<String, f64>,
    pub ms_avg: Option<f64>,
    pub f1_clear: Option<f64>,
    pub f1_ambiguous: Option<f64>,
    pub f1_avg: Option<f64>,
    pub n_clear: usize,
    pub n_ambiguous: usize,
}

/// Cross-method evaluation report, emitted both as a table on standard
/// output and as a machine-readable JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_fingerprint: String,
    pub config_snapshot: String,
    pub methods: BTreeMap<String, MethodReport>,
}

impl EvalReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width comparison table, one row per method.
    pub fn render_table(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
        }
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>7} {:>7}\n",
            "method",
            "rs_low",
            "rs_med",
            "rs_high",
            "ms_avg",
            "f1_clear",
            "f1_amb",
            "f1_avg",
            "n_clear",
            "n_amb",
            "total"
        ));
        for (name, m) in &self.methods {
            out.push_str(&format!(
                "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>7} {:>7}\n",
                name,
                cell(m.rs_by_level.get("low").copied()),
                cell(m.rs_by_level.get("medium").copied()),
                cell(m.rs_by_level.get("high").copied()),
                cell(m.ms_avg),
                cell(m.f1_clear),
                cell(m.f1_ambiguous),
                cell(m.f1_avg),
                m.n_clear,
                m.n_ambiguous,
                m.n_clear + m.n_ambiguous,
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rs_is_one_on_identical_pairs() {
        let pairs = vec![EvalPair::new(vec![0.4, 0.6], vec![0.4, 0.6]); 10];
        assert_eq!(robustness_score(&pairs, 0).unwrap(), 1.0);
        assert_eq!(robustness_score(&pairs, 1).unwrap(), 1.0);
    }

    #[test]
    fn rs_single_pair_forced_arithmetic() {
        let pairs = vec![EvalPair::new(vec![0.9], vec![0.8])];
        let rs = robustness_score(&pairs, 0).unwrap();
        assert!((rs - 0.9).abs() < 1e-12);
    }

    #[test]
    fn rs_matches_brute_force_mean_absolute_deviation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pairs: Vec<EvalPair> = (0..200)
            .map(|_| {
                EvalPair::new(
                    vec![rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0)],
                    vec![rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0)],
                )
            })
            .collect();
        for c in 0..2 {
            // independent plain-summation oracle
            let mut total = 0.0;
            for p in &pairs {
                total += (p.original[c] - p.perturbed[c]).abs();
            }
            let expected = 1.0 - total / pairs.len() as f64;
            let got = robustness_score(&pairs, c).unwrap();
            assert!((got - expected).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&got));
        }
    }

    #[test]
    fn ms_all_hits_is_one() {
        let pairs: Vec<EvalPair> = (0..10)
            .map(|_| EvalPair::new(vec![0.5], vec![0.6]).with_labels(vec![1]))
            .collect();
        assert_eq!(monotonicity_score(&pairs, 0).unwrap(), 1.0);
    }

    #[test]
    fn ms_zero_delta_matches_zero_label() {
        let pairs = vec![EvalPair::new(vec![0.5], vec![0.5]).with_labels(vec![0])];
        assert_eq!(monotonicity_score(&pairs, 0).unwrap(), 1.0);
    }

    #[test]
    fn ms_matches_brute_force_tally_on_mixed_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pairs: Vec<EvalPair> = (0..100)
            .map(|_| {
                let original = rng.gen_range(0.0..=1.0);
                let perturbed = rng.gen_range(0.0..=1.0);
                let label = *[-1i8, 0, 1].get(rng.gen_range(0..3)).unwrap();
                EvalPair::new(vec![original], vec![perturbed]).with_labels(vec![label])
            })
            .collect();
        // independent per-pair tally
        let mut hits = 0;
        for p in &pairs {
            let delta = p.perturbed[0] - p.original[0];
            let s = if delta.abs() < 1e-9 {
                0
            } else if delta > 0.0 {
                1
            } else {
                -1
            };
            if s == p.shift_labels.as_ref().unwrap()[0] {
                hits += 1;
            }
        }
        let expected = hits as f64 / 100.0;
        assert_eq!(monotonicity_score(&pairs, 0).unwrap(), expected);
    }

    #[test]
    fn ms_requires_labels() {
        let pairs = vec![EvalPair::new(vec![0.5], vec![0.6])];
        assert_eq!(
            monotonicity_score(&pairs, 0),
            Err(EvalError::MissingShiftLabels(0))
        );
    }

    #[test]
    fn classify_and_split_cases() {
        let t = 0.3;
        let mk = |a: f64, b: f64| MembershipVector::clamped(vec![a, b]);
        // conflict example: tie, ambiguous
        assert_eq!(
            classify_and_split(&mk(0.905, 0.905), t).unwrap(),
            (None, Bucket::Ambiguous)
        );
        assert_eq!(
            classify_and_split(&mk(0.9, 0.1), t).unwrap(),
            (Some(0), Bucket::Clear)
        );
        // diff 0.25 is at-or-below the threshold
        assert_eq!(
            classify_and_split(&mk(0.6, 0.35), t).unwrap(),
            (Some(0), Bucket::Ambiguous)
        );
        // boundary: diff exactly 0.3 stays ambiguous
        assert_eq!(
            classify_and_split(&mk(0.6, 0.3), t).unwrap(),
            (Some(0), Bucket::Ambiguous)
        );
        assert!(classify_and_split(&MembershipVector::clamped(vec![0.1]), t).is_err());
    }

    #[test]
    fn f1_perfect_and_all_wrong() {
        let gold: Vec<String> = ["positive", "negative", "positive", "negative"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let perfect: Vec<Option<String>> = gold.iter().cloned().map(Some).collect();
        assert_eq!(f1_score(&perfect, &gold).unwrap(), 1.0);
        let wrong: Vec<Option<String>> = gold
            .iter()
            .map(|g| {
                Some(if g == "positive" { "negative" } else { "positive" }.to_string())
            })
            .collect();
        assert_eq!(f1_score(&wrong, &gold).unwrap(), 0.0);
    }

    #[test]
    fn f1_neutral_counts_as_false_negative() {
        let gold: Vec<String> = vec!["positive".into(), "positive".into()];
        let predictions: Vec<Option<String>> = vec![Some("positive".into()), None];
        // tp=1, fp=0, fn=1 -> p=1, r=0.5, f1=2/3
        let f1 = f1_score(&predictions, &gold).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn f1_matches_confusion_matrix_hand_computation_three_classes() {
        // 30 samples over 3 classes with a fixed confusion pattern
        let classes = ["a", "b", "c"];
        let mut gold = Vec::new();
        let mut predictions = Vec::new();
        for (i, class) in classes.iter().enumerate() {
            for j in 0..10 {
                gold.push(class.to_string());
                // 7 correct, 2 into the next class, 1 neutral
                let pred = match j {
                    0..=6 => Some(classes[i].to_string()),
                    7 | 8 => Some(classes[(i + 1) % 3].to_string()),
                    _ => None,
                };
                predictions.push(pred);
            }
        }
        // per class: tp=7, fp=2, fn=3 -> p=7/9, r=7/10, f1=2*(7/9)*(7/10)/((7/9)+(7/10))
        let p: f64 = 7.0 / 9.0;
        let r: f64 = 7.0 / 10.0;
        let expected = 2.0 * p * r / (p + r);
        let f1 = f1_score(&predictions, &gold).unwrap();
        assert!((f1 - expected).abs() < 1e-12);
    }

    #[test]
    fn f1_rejects_length_mismatch() {
        let gold = vec!["a".to_string()];
        assert!(matches!(
            f1_score(&[], &gold),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn stability_identical_vectors_give_zero_ratio() {
        let pairs = vec![StabilityPair {
            original_text: "the food was good".into(),
            perturbed_text: "the food was tasty".into(),
            pair: EvalPair::new(vec![0.6, 0.0], vec![0.6, 0.0]),
        }];
        let est = estimate_stability(&pairs, DistanceKind::TokenLevenshtein).unwrap();
        assert_eq!(est.k_hat, 0.0);
    }

    #[test]
    fn stability_single_pair_forced_arithmetic() {
        // delta 0.2 over distance 0.5 -> ratio 0.4
        let pairs = vec![StabilityPair {
            original_text: "a b".into(),
            perturbed_text: "a c".into(),
            pair: EvalPair::new(vec![0.5], vec![0.7]),
        }];
        let est = estimate_stability(&pairs, DistanceKind::TokenLevenshtein).unwrap();
        assert!((est.k_hat - 0.4).abs() < 1e-12);
    }

    #[test]
    fn stability_scales_linearly_with_deltas() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base: Vec<StabilityPair> = (0..50)
            .map(|i| {
                let original = rng.gen_range(0.2..0.8);
                let delta: f64 = rng.gen_range(0.0..0.2);
                StabilityPair {
                    original_text: format!("sample text number {i}"),
                    perturbed_text: format!("sample text item {i}"),
                    pair: EvalPair::new(vec![original], vec![original + delta]),
                }
            })
            .collect();
        let halved: Vec<StabilityPair> = base
            .iter()
            .map(|p| StabilityPair {
                original_text: p.original_text.clone(),
                perturbed_text: p.perturbed_text.clone(),
                pair: EvalPair::new(
                    p.pair.original.clone(),
                    p.pair
                        .original
                        .iter()
                        .zip(&p.pair.perturbed)
                        .map(|(o, q)| o + (q - o) * 0.5)
                        .collect(),
                ),
            })
            .collect();
        let full = estimate_stability(&base, DistanceKind::TokenLevenshtein).unwrap();
        let half = estimate_stability(&halved, DistanceKind::TokenLevenshtein).unwrap();
        assert!((half.k_hat - full.k_hat * 0.5).abs() < 1e-12);
    }

    #[test]
    fn stability_rejects_all_zero_distances() {
        let pairs = vec![StabilityPair {
            original_text: "same".into(),
            perturbed_text: "same".into(),
            pair: EvalPair::new(vec![0.5], vec![0.6]),
        }];
        assert_eq!(
            estimate_stability(&pairs, DistanceKind::TokenLevenshtein),
            Err(EvalError::ZeroDistancePairOnly)
        );
    }

    #[test]
    fn report_serializes_and_renders() {
        let mut methods = BTreeMap::new();
        methods.insert(
            "frc".to_string(),
            MethodReport {
                rs_by_level: BTreeMap::from([("low".to_string(), 0.98)]),
                ms_by_class: BTreeMap::from([("positive".to_string(), 1.0)]),
                ms_avg: Some(1.0),
                f1_clear: Some(0.9),
                f1_ambiguous: None,
                f1_avg: Some(0.9),
                n_clear: 8,
                n_ambiguous: 2,
            },
        );
        let report = EvalReport {
            dataset_fingerprint: "sha256:abc".into(),
            config_snapshot: String::new(),
            methods,
        };
        let json = report.to_json_pretty();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        let table = report.render_table();
        assert!(table.contains("frc"));
        assert!(table.contains("0.9800"));
        assert!(table.contains('-'));
    }
}
