//! Robustness and monotonicity perturbation generators.
//!
//! Two generator families sit behind one trait: [`DeterministicGenerator`]
//! rewrites text from a synonym table and the lexicon (used by CI and every
//! offline property), and [`LlmGenerator`] asks a chat backend for realistic
//! rewrites. Monotonic perturbations from the deterministic generator are
//! verified against the lexicon-oracle pipeline before they are emitted, so
//! their shift labels are sound by construction.

use crate::backend::{HttpBackend, Lexicon, LexiconBackend};
use crate::fuzzy::ClassSet;
use crate::pipeline::{self, PipelineError};
use crate::text::{self, Token};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("generation failed: {0}")]
    GenerationFailed(String),
    #[error("no synonym-table hits in the text")]
    NoSwapCandidates,
    #[error("text has no sentiment-bearing token for the target class")]
    NoSentimentToken,
    #[error("direction must be +1 or -1, got {0}")]
    ZeroDirection(i8),
    #[error("class `{0}` not in the class set")]
    UnknownClass(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Backend(#[from] crate::backend::BackendError),
}

/// Perturbation category, as recorded in output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    RobustLow,
    RobustMedium,
    RobustHigh,
    Monotonic,
}

impl PerturbKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PerturbKind::RobustLow => "robust_low",
            PerturbKind::RobustMedium => "robust_medium",
            PerturbKind::RobustHigh => "robust_high",
            PerturbKind::Monotonic => "monotonic",
        }
    }
}

/// Sentiment-preserving perturbation strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustLevel {
    Low,
    Medium,
    High,
}

impl RobustLevel {
    pub fn kind(&self) -> PerturbKind {
        match self {
            RobustLevel::Low => PerturbKind::RobustLow,
            RobustLevel::Medium => PerturbKind::RobustMedium,
            RobustLevel::High => PerturbKind::RobustHigh,
        }
    }

    /// Synonym tier: higher levels reach for farther synonyms.
    fn tier(&self) -> usize {
        match self {
            RobustLevel::Low => 0,
            RobustLevel::Medium => 1,
            RobustLevel::High => 2,
        }
    }
}

/// An original/perturbed text pair. `shift_labels` is present exactly when
/// the record is a monotonic perturbation, one direction per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedRecord {
    pub id: String,
    pub source_id: String,
    pub original_text: String,
    pub perturbed_text: String,
    pub kind: PerturbKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_labels: Option<BTreeMap<String, i8>>,
}

/// A perturbation source: either table-driven rewrites or a model.
/// Implementations hold no mutable state, so generation over a dataset is
/// embarrassingly parallel.
pub trait Generator: Send + Sync {
    fn robust(&self, input: &str, level: RobustLevel) -> Result<String, PerturbError>;

    /// Returns the perturbed text and the per-class shift labels.
    fn monotonic(
        &self,
        input: &str,
        target_class: &str,
        direction: i8,
    ) -> Result<(String, BTreeMap<String, i8>), PerturbError>;
}

/// Generates one sentiment-preserving perturbed record. The perturbed text
/// must differ from the original; an echoing generator is rejected.
pub fn perturb_robust(
    source_id: &str,
    input: &str,
    level: RobustLevel,
    generator: &dyn Generator,
) -> Result<PerturbedRecord, PerturbError> {
    let perturbed = generator.robust(input, level)?;
    if text::normalize(&perturbed) == text::normalize(input) {
        return Err(PerturbError::GenerationFailed(
            "perturbation must differ from the original".to_string(),
        ));
    }
    Ok(PerturbedRecord {
        id: format!("{source_id}:{}", level.kind().as_str()),
        source_id: source_id.to_string(),
        original_text: input.to_string(),
        perturbed_text: perturbed,
        kind: level.kind(),
        shift_labels: None,
    })
}

/// Generates one intensity-shifting record with per-class direction labels.
/// Direction is relative to `target_class`: +1 moves the text toward it,
/// -1 away from it.
pub fn perturb_monotonic(
    source_id: &str,
    input: &str,
    target_class: &str,
    direction: i8,
    generator: &dyn Generator,
) -> Result<PerturbedRecord, PerturbError> {
    if direction != 1 && direction != -1 {
        return Err(PerturbError::ZeroDirection(direction));
    }
    let (perturbed, labels) = generator.monotonic(input, target_class, direction)?;
    if labels.values().any(|&l| l != 0) && text::normalize(&perturbed) == text::normalize(input) {
        return Err(PerturbError::GenerationFailed(
            "monotonic perturbation with nonzero labels must change the text".to_string(),
        ));
    }
    let sign = if direction > 0 { "+1" } else { "-1" };
    Ok(PerturbedRecord {
        id: format!("{source_id}:monotonic:{target_class}:{sign}"),
        source_id: source_id.to_string(),
        original_text: input.to_string(),
        perturbed_text: perturbed,
        kind: PerturbKind::Monotonic,
        shift_labels: Some(labels),
    })
}

/// Synonym ladder per surface form, ordered near to far.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SynonymTable {
    pub entries: BTreeMap<String, Vec<String>>,
}

impl SynonymTable {
    pub fn from_json_str(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, PerturbError> {
        let json = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            PerturbError::GenerationFailed(format!(
                "cannot read synonym table {}: {e}",
                path.as_ref().display()
            ))
        })?;
        Self::from_json_str(&json)
            .map_err(|e| PerturbError::GenerationFailed(format!("bad synonym table: {e}")))
    }

    /// Synonym at `tier`, falling back to the deepest available.
    fn synonym(&self, token: &str, tier: usize) -> Option<&str> {
        let ladder = self.entries.get(token)?;
        ladder
            .get(tier)
            .or_else(|| ladder.last())
            .map(String::as_str)
    }
}

/// Table-driven generator. All randomness (which tokens to swap at the low
/// level) is derived from the seed and the input text, so records are
/// reproducible independently of processing order.
pub struct DeterministicGenerator {
    synonyms: SynonymTable,
    lexicon: Lexicon,
    classes: ClassSet,
    backend: LexiconBackend,
    seed: u64,
    intensifier: String,
    diminisher: String,
}

impl DeterministicGenerator {
    pub fn new(
        synonyms: SynonymTable,
        lexicon: Lexicon,
        classes: ClassSet,
        seed: u64,
    ) -> Result<Self, PerturbError> {
        let intensifier = lexicon
            .modifiers
            .iter()
            .filter(|(_, &f)| f > 1.0)
            .map(|(w, _)| w.clone())
            .next()
            .ok_or_else(|| {
                PerturbError::GenerationFailed("lexicon has no intensifying modifier".to_string())
            })?;
        let diminisher = lexicon
            .modifiers
            .iter()
            .filter(|(_, &f)| f < 1.0)
            .map(|(w, _)| w.clone())
            .next()
            .ok_or_else(|| {
                PerturbError::GenerationFailed("lexicon has no diminishing modifier".to_string())
            })?;
        let backend = LexiconBackend::new(lexicon.clone());
        Ok(Self {
            synonyms,
            lexicon,
            classes,
            backend,
            seed,
            intensifier,
            diminisher,
        })
    }

    /// Overrides the modifier words inserted by monotonic perturbations.
    pub fn with_modifier_words(
        mut self,
        intensifier: impl Into<String>,
        diminisher: impl Into<String>,
    ) -> Self {
        self.intensifier = intensifier.into();
        self.diminisher = diminisher.into();
        self
    }

    fn rng_for(&self, input: &str, salt: &str) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(salt.as_bytes());
        hasher.update(input.as_bytes());
        let digest = hasher.finalize();
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        ChaCha8Rng::seed_from_u64(u64::from_le_bytes(word))
    }

    /// Replaces the tokens at `chosen` indices with their tier synonyms,
    /// preserving all non-token characters.
    fn apply_swaps(&self, input: &str, tokens: &[Token], chosen: &[usize], tier: usize) -> String {
        let mut out = String::with_capacity(input.len());
        let mut cursor = 0usize;
        for (i, token) in tokens.iter().enumerate() {
            if chosen.contains(&i) {
                if let Some(synonym) = self.synonyms.synonym(&token.text, tier) {
                    out.push_str(&input[cursor..token.start]);
                    out.push_str(synonym);
                    cursor = token.end;
                }
            }
        }
        out.push_str(&input[cursor..]);
        out
    }

    /// Moves the first comma-separated clause to the end. Texts without a
    /// comma are returned unchanged.
    fn reorder_clauses(input: &str) -> String {
        if let Some(split_at) = input.find(',') {
            let head = input[..split_at].trim();
            let tail = input[split_at + 1..].trim();
            if !head.is_empty() && !tail.is_empty() {
                return format!("{tail}, {head}");
            }
        }
        input.to_string()
    }

    fn swap_candidates(&self, tokens: &[Token]) -> Vec<usize> {
        tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| self.synonyms.entries.contains_key(&t.text))
            .map(|(i, _)| i)
            .collect()
    }

    fn fused(&self, input: &str) -> Result<Vec<f64>, PerturbError> {
        let trace = pipeline::run_frc(input, &self.classes, &self.backend, None)?;
        Ok(trace.fused.values().to_vec())
    }
}

impl Generator for DeterministicGenerator {
    fn robust(&self, input: &str, level: RobustLevel) -> Result<String, PerturbError> {
        let tokens = text::tokenize_with_offsets(input);
        let candidates = self.swap_candidates(&tokens);
        match level {
            RobustLevel::Low => {
                // 1-2 near-synonym swaps
                if candidates.is_empty() {
                    return Err(PerturbError::NoSwapCandidates);
                }
                let mut rng = self.rng_for(input, "robust_low");
                let want = 1 + usize::from(candidates.len() > 1 && rng.gen_bool(0.5));
                let mut order = candidates.clone();
                order.shuffle(&mut rng);
                let chosen: Vec<usize> = order.into_iter().take(want).collect();
                Ok(self.apply_swaps(input, &tokens, &chosen, level.tier()))
            }
            RobustLevel::Medium => {
                // clause reorder plus as many swaps as the table offers
                if candidates.is_empty() {
                    return Err(PerturbError::GenerationFailed(
                        "no swappable tokens for medium perturbation".to_string(),
                    ));
                }
                let swapped = self.apply_swaps(input, &tokens, &candidates, level.tier());
                Ok(Self::reorder_clauses(&swapped))
            }
            RobustLevel::High => {
                // full rewrite: far synonyms everywhere, clauses reordered,
                // wrapped in a paraphrase frame
                if candidates.is_empty() {
                    return Err(PerturbError::GenerationFailed(
                        "no swappable tokens for high perturbation".to_string(),
                    ));
                }
                let swapped = self.apply_swaps(input, &tokens, &candidates, level.tier());
                let reordered = Self::reorder_clauses(&swapped);
                let body = reordered.trim_end_matches(['.', '!', '?']).trim();
                Ok(format!("all in all, {body}."))
            }
        }
    }

    fn monotonic(
        &self,
        input: &str,
        target_class: &str,
        direction: i8,
    ) -> Result<(String, BTreeMap<String, i8>), PerturbError> {
        if direction != 1 && direction != -1 {
            return Err(PerturbError::ZeroDirection(direction));
        }
        if self.classes.index_of(target_class).is_none() {
            return Err(PerturbError::UnknownClass(target_class.to_string()));
        }
        let tokens = text::tokenize_with_offsets(input);
        let bearing: Vec<&Token> = tokens
            .iter()
            .filter(|t| {
                self.lexicon
                    .entries
                    .get(&t.text)
                    .and_then(|m| m.get(target_class))
                    .is_some_and(|&s| s > 0.0)
            })
            .collect();
        if bearing.is_empty() {
            return Err(PerturbError::NoSentimentToken);
        }
        let word = if direction > 0 {
            &self.intensifier
        } else {
            &self.diminisher
        };
        let mut labels = BTreeMap::new();
        for class in self.classes.classes() {
            labels.insert(class.name().to_string(), 0);
        }
        labels.insert(target_class.to_string(), direction);
        let expected: Vec<i8> = self
            .classes
            .classes()
            .iter()
            .map(|c| if c.name() == target_class { direction } else { 0 })
            .collect();

        let original_fused = self.fused(input)?;
        // insert the modifier before each candidate token in turn and keep
        // the first insertion whose pipeline-level shift matches the labels
        for token in bearing {
            let perturbed = format!(
                "{}{} {}",
                &input[..token.start],
                word,
                &input[token.start..]
            );
            let perturbed_fused = self.fused(&perturbed)?;
            let matches = original_fused
                .iter()
                .zip(&perturbed_fused)
                .zip(&expected)
                .all(|((o, p), e)| crate::eval::sgn(p - o) == *e);
            if matches {
                return Ok((perturbed, labels));
            }
        }
        Err(PerturbError::GenerationFailed(format!(
            "no modifier insertion shifts `{target_class}` by {direction} under the oracle"
        )))
    }
}

const ROBUST_TEMPLATE: &str = include_str!("../templates/perturb_robust.txt");
const MONOTONIC_TEMPLATE: &str = include_str!("../templates/perturb_monotonic.txt");

/// Model-backed generator for realistic perturbations. Not used by CI; the
/// deterministic generator covers every offline property.
pub struct LlmGenerator {
    backend: HttpBackend,
    classes: ClassSet,
    attempts: u32,
}

impl LlmGenerator {
    pub fn new(backend: HttpBackend, classes: ClassSet) -> Self {
        Self {
            backend,
            classes,
            attempts: 2,
        }
    }

    fn rewrite(&self, prompt: &str) -> Result<String, PerturbError> {
        let mut last = String::new();
        for _ in 0..self.attempts.max(1) {
            let content = self
                .backend
                .chat(&[crate::backend::ChatMessage::user(prompt)])?;
            if let Some(value) = crate::backend::extract_first_json(&content) {
                if let Some(perturbed) = value.get("perturbed").and_then(|v| v.as_str()) {
                    if !perturbed.trim().is_empty() {
                        return Ok(perturbed.trim().to_string());
                    }
                }
            }
            last = content;
        }
        Err(PerturbError::GenerationFailed(format!(
            "model did not return a usable rewrite: {last}"
        )))
    }
}

impl Generator for LlmGenerator {
    fn robust(&self, input: &str, level: RobustLevel) -> Result<String, PerturbError> {
        let (name, instructions) = match level {
            RobustLevel::Low => ("low", "Replace 1-2 words with close synonyms."),
            RobustLevel::Medium => (
                "medium",
                "Restructure the sentence and replace several words.",
            ),
            RobustLevel::High => (
                "high",
                "Rewrite the whole sentence, changing its structure significantly while \
                 keeping the sentiment.",
            ),
        };
        let prompt = ROBUST_TEMPLATE
            .replace("{{level}}", name)
            .replace("{{level_instructions}}", instructions)
            .replace("{{text}}", input);
        self.rewrite(&prompt)
    }

    fn monotonic(
        &self,
        input: &str,
        target_class: &str,
        direction: i8,
    ) -> Result<(String, BTreeMap<String, i8>), PerturbError> {
        if direction != 1 && direction != -1 {
            return Err(PerturbError::ZeroDirection(direction));
        }
        if self.classes.index_of(target_class).is_none() {
            return Err(PerturbError::UnknownClass(target_class.to_string()));
        }
        let direction_word = if direction > 0 {
            "stronger (more intense)"
        } else {
            "weaker (less intense)"
        };
        let prompt = MONOTONIC_TEMPLATE
            .replace("{{class}}", target_class)
            .replace("{{direction_word}}", direction_word)
            .replace("{{text}}", input);
        let perturbed = self.rewrite(&prompt)?;
        let mut labels = BTreeMap::new();
        for class in self.classes.classes() {
            labels.insert(class.name().to_string(), 0);
        }
        labels.insert(target_class.to_string(), direction);
        Ok((perturbed, labels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::lexicon_membership;

    fn lexicon() -> Lexicon {
        Lexicon::from_json_str(
            r#"{
                "entries": {
                    "good": {"positive": 0.6, "negative": 0.0},
                    "tasty": {"positive": 0.57, "negative": 0.0},
                    "decent": {"positive": 0.52, "negative": 0.0},
                    "passable": {"positive": 0.47, "negative": 0.0},
                    "awful": {"positive": 0.0, "negative": 0.85},
                    "dire": {"positive": 0.0, "negative": 0.82},
                    "grim": {"positive": 0.0, "negative": 0.77},
                    "bleak": {"positive": 0.0, "negative": 0.72}
                },
                "modifiers": {"very": 1.5, "slightly": 0.5},
                "negators": ["not"]
            }"#,
        )
        .unwrap()
    }

    fn synonyms() -> SynonymTable {
        SynonymTable::from_json_str(
            r#"{
                "good": ["tasty", "decent", "passable"],
                "awful": ["dire", "grim", "bleak"],
                "food": ["meal", "cuisine", "fare"],
                "was": ["seemed", "felt", "appeared"]
            }"#,
        )
        .unwrap()
    }

    fn generator() -> DeterministicGenerator {
        DeterministicGenerator::new(
            synonyms(),
            lexicon(),
            ClassSet::positive_negative(),
            42,
        )
        .unwrap()
    }

    #[test]
    fn low_swaps_from_the_synonym_table() {
        let record = perturb_robust(
            "r1",
            "the food was good",
            RobustLevel::Low,
            &generator(),
        )
        .unwrap();
        assert_ne!(record.perturbed_text, record.original_text);
        assert_eq!(record.kind, PerturbKind::RobustLow);
        assert!(record.shift_labels.is_none());
        // swapped words come from tier 0 of the table
        for word in text::tokenize(&record.perturbed_text) {
            assert!(
                ["the", "food", "meal", "was", "seemed", "good", "tasty"].contains(&word.as_str()),
                "unexpected token {word}"
            );
        }
    }

    #[test]
    fn low_fails_without_table_hits() {
        let err = perturb_robust("r1", "unknown words only", RobustLevel::Low, &generator())
            .unwrap_err();
        assert!(matches!(err, PerturbError::NoSwapCandidates));
    }

    #[test]
    fn echoing_generator_is_rejected() {
        struct Echo;
        impl Generator for Echo {
            fn robust(&self, input: &str, _: RobustLevel) -> Result<String, PerturbError> {
                Ok(input.to_string())
            }
            fn monotonic(
                &self,
                input: &str,
                target: &str,
                direction: i8,
            ) -> Result<(String, BTreeMap<String, i8>), PerturbError> {
                Ok((
                    input.to_string(),
                    BTreeMap::from([(target.to_string(), direction)]),
                ))
            }
        }
        assert!(matches!(
            perturb_robust("r1", "the food was good", RobustLevel::Low, &Echo),
            Err(PerturbError::GenerationFailed(_))
        ));
        assert!(matches!(
            perturb_monotonic("r1", "the food was good", "positive", 1, &Echo),
            Err(PerturbError::GenerationFailed(_))
        ));
    }

    #[test]
    fn levels_move_progressively_farther() {
        // single-clause input: reorder is a no-op, so the distance ladder
        // comes from swap count (low vs medium) and the paraphrase frame
        let generator = generator();
        let input = "the food was good";
        let low = generator.robust(input, RobustLevel::Low).unwrap();
        let medium = generator.robust(input, RobustLevel::Medium).unwrap();
        let high = generator.robust(input, RobustLevel::High).unwrap();
        let d_low = text::token_distance(input, &low);
        let d_medium = text::token_distance(input, &medium);
        let d_high = text::token_distance(input, &high);
        assert!(d_low < d_medium, "low {d_low} vs medium {d_medium}");
        assert!(d_medium < d_high, "medium {d_medium} vs high {d_high}");
    }

    #[test]
    fn monotonic_intensifies_toward_the_class() {
        let record =
            perturb_monotonic("r1", "the food was good", "positive", 1, &generator()).unwrap();
        assert_eq!(record.perturbed_text, "the food was very good");
        let labels = record.shift_labels.unwrap();
        assert_eq!(labels["positive"], 1);
        assert_eq!(labels["negative"], 0);
    }

    #[test]
    fn monotonic_diminishes_away_from_the_class() {
        let classes = ClassSet::positive_negative();
        let record =
            perturb_monotonic("r1", "the food was good", "positive", -1, &generator()).unwrap();
        assert_eq!(record.perturbed_text, "the food was slightly good");
        // oracle strength drops 0.6 -> 0.3
        let lex = lexicon();
        let before = lexicon_membership(&record.original_text, &classes, &lex);
        let after = lexicon_membership(&record.perturbed_text, &classes, &lex);
        assert!((before.get(0) - 0.6).abs() < 1e-12);
        assert!((after.get(0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn monotonic_rejects_zero_direction_and_missing_tokens() {
        assert!(matches!(
            perturb_monotonic("r1", "the food was good", "positive", 0, &generator()),
            Err(PerturbError::ZeroDirection(0))
        ));
        assert!(matches!(
            perturb_monotonic("r1", "nothing here", "positive", 1, &generator()),
            Err(PerturbError::NoSentimentToken)
        ));
        // a positive-only sentence has no negative-bearing token
        assert!(matches!(
            perturb_monotonic("r1", "the food was good", "negative", 1, &generator()),
            Err(PerturbError::NoSentimentToken)
        ));
    }

    #[test]
    fn labels_are_sound_under_the_oracle_pipeline() {
        let generator = generator();
        let classes = ClassSet::positive_negative();
        let backend = LexiconBackend::new(lexicon());
        let inputs = [
            ("the food was good", "positive"),
            ("awful service", "negative"),
            ("good food, awful service", "positive"),
            ("good food, awful service", "negative"),
        ];
        for (input, class) in inputs {
            for direction in [1i8, -1] {
                let record =
                    perturb_monotonic("r", input, class, direction, &generator).unwrap();
                let original =
                    pipeline::run_frc(input, &classes, &backend, None).unwrap();
                let perturbed =
                    pipeline::run_frc(&record.perturbed_text, &classes, &backend, None).unwrap();
                let labels = record.shift_labels.unwrap();
                for (c, name) in classes.names().iter().enumerate() {
                    let delta = perturbed.fused.get(c) - original.fused.get(c);
                    assert_eq!(
                        crate::eval::sgn(delta),
                        labels[name],
                        "input `{input}` class {name} direction {direction}"
                    );
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed_and_text() {
        let a = generator();
        let b = generator();
        for level in [RobustLevel::Low, RobustLevel::Medium, RobustLevel::High] {
            assert_eq!(
                a.robust("the food was good, awful service", level).unwrap(),
                b.robust("the food was good, awful service", level).unwrap()
            );
        }
        // a different seed may pick different low-level swaps
        let c = DeterministicGenerator::new(
            synonyms(),
            lexicon(),
            ClassSet::positive_negative(),
            43,
        )
        .unwrap();
        let _ = c.robust("the food was good", RobustLevel::Low).unwrap();
    }

    #[test]
    fn records_round_trip_bit_identically() {
        let record = perturb_monotonic(
            "r9",
            "good food, awful service",
            "negative",
            1,
            &generator(),
        )
        .unwrap();
        let line = serde_json::to_string(&record).unwrap();
        let back: PerturbedRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, record);
        assert_eq!(serde_json::to_string(&back).unwrap(), line);
    }
}
