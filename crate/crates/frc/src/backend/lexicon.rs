//! Deterministic lexicon oracle.
//!
//! Stands in for a language model during offline runs: membership degrees
//! come from a seeded lexicon of per-class base strengths, multiplicative
//! intensity modifiers, and polarity-swapping negators. Identical inputs
//! always produce bit-identical outputs.

use super::{
    Backend, BackendError, ElicitationRequest, ElicitationResponse, RequestKind, SubUnitContext,
};
use crate::fuzzy::{ClassSet, MembershipVector};
use crate::text::{self, Token};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// How many preceding tokens a modifier or negator may sit away from the
/// entry token it scales.
const MODIFIER_WINDOW: usize = 2;

/// Clause boundaries for sub-unit segmentation: sentence punctuation plus
/// contrastive conjunctions that open a new emotional unit.
const BOUNDARY_PUNCT: &[char] = &[
    ',', ';', '.', '!', '?', ':', '，', '。', '！', '？', '；', '：',
];
const CONTRAST_MARKERS: &[&str] = &[
    "but", "though", "although", "however", "yet", "whereas", "但", "但是", "虽然", "however",
];

/// Seeded sentiment lexicon: surface form → per-class base strength,
/// plus intensity modifiers and negators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    /// lowercase surface → class name → base strength in [0,1]
    pub entries: BTreeMap<String, BTreeMap<String, f64>>,
    /// surface → multiplicative intensity factor in (0,2]
    #[serde(default)]
    pub modifiers: BTreeMap<String, f64>,
    /// surfaces that swap polarity between the first two classes
    #[serde(default)]
    pub negators: BTreeSet<String>,
}

impl Lexicon {
    pub fn from_json_str(json: &str) -> Result<Self, LexiconError> {
        let lexicon: Lexicon = serde_json::from_str(json)?;
        lexicon.validate()?;
        Ok(lexicon)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let json = std::fs::read_to_string(path.as_ref()).map_err(|e| LexiconError::Io {
            path: path.as_ref().display().to_string(),
            source: e,
        })?;
        Self::from_json_str(&json)
    }

    pub fn validate(&self) -> Result<(), LexiconError> {
        for (surface, strengths) in &self.entries {
            for (class, &s) in strengths {
                if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                    return Err(LexiconError::BadStrength {
                        surface: surface.clone(),
                        class: class.clone(),
                        value: s,
                    });
                }
            }
        }
        for (surface, &f) in &self.modifiers {
            if !f.is_finite() || f <= 0.0 || f > 2.0 {
                return Err(LexiconError::BadFactor {
                    surface: surface.clone(),
                    value: f,
                });
            }
        }
        Ok(())
    }

    /// Short content hash, stable across runs with the same lexicon.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("lexicon serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in &digest[..8] {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    fn entry_strength(&self, token: &str, class_name: &str) -> f64 {
        self.entries
            .get(token)
            .and_then(|m| m.get(class_name))
            .copied()
            .unwrap_or(0.0)
    }

    fn is_entry(&self, token: &str, classes: &ClassSet) -> bool {
        classes
            .classes()
            .iter()
            .any(|c| self.entry_strength(token, c.name()) > 0.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("failed to read lexicon at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("lexicon is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("entry `{surface}` has strength {value} for class `{class}` outside [0,1]")]
    BadStrength {
        surface: String,
        class: String,
        value: f64,
    },
    #[error("modifier `{surface}` has factor {value} outside (0,2]")]
    BadFactor { surface: String, value: f64 },
}

/// The contiguous run of modifier/negator tokens immediately preceding
/// `index`, capped at [`MODIFIER_WINDOW`]. Returns the start index of the
/// run, the combined intensity factor, and whether a negator participates.
fn modifier_run(tokens: &[Token], index: usize, lexicon: &Lexicon) -> (usize, f64, bool) {
    let mut start = index;
    let mut factor = 1.0;
    let mut negated = false;
    while start > 0 && index - start < MODIFIER_WINDOW {
        let prev = &tokens[start - 1].text;
        if let Some(&f) = lexicon.modifiers.get(prev) {
            factor *= f;
            start -= 1;
        } else if lexicon.negators.contains(prev) {
            negated = true;
            start -= 1;
        } else {
            break;
        }
    }
    (start, factor, negated)
}

/// Membership degrees of a text unit under the lexicon: per class, the max
/// over matched entry strengths, each scaled by adjacent intensity modifiers
/// and polarity-swapped between the first two classes when negated.
/// Unknown text yields an all-zeros vector.
pub fn lexicon_membership(text_unit: &str, classes: &ClassSet, lexicon: &Lexicon) -> MembershipVector {
    let tokens = text::tokenize_with_offsets(text_unit);
    let mut best = vec![0.0_f64; classes.len()];
    for (i, token) in tokens.iter().enumerate() {
        if !lexicon.is_entry(&token.text, classes) {
            continue;
        }
        let (_, factor, negated) = modifier_run(&tokens, i, lexicon);
        let mut scaled: Vec<f64> = classes
            .classes()
            .iter()
            .map(|c| (lexicon.entry_strength(&token.text, c.name()) * factor).clamp(0.0, 1.0))
            .collect();
        if negated && scaled.len() >= 2 {
            scaled.swap(0, 1);
        }
        for (slot, v) in best.iter_mut().zip(&scaled) {
            if *v > *slot {
                *slot = *v;
            }
        }
    }
    MembershipVector::clamped(best)
}

/// The deterministic backend. Keyword spans are entry tokens together with
/// their adjacent modifier/negator run, so the membership of an extracted
/// span reproduces the in-context reading of the token.
pub struct LexiconBackend {
    lexicon: Lexicon,
    id: String,
}

impl LexiconBackend {
    pub fn new(lexicon: Lexicon) -> Self {
        let id = format!("lexicon:{}", lexicon.fingerprint());
        Self { lexicon, id }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        Ok(Self::new(Lexicon::from_path(path)?))
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    fn extract_keywords(&self, request: &ElicitationRequest) -> Vec<String> {
        let tokens = text::tokenize_with_offsets(&request.text);
        // (first occurrence position, surface)
        let mut found: Vec<(usize, String)> = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, token) in tokens.iter().enumerate() {
            if !self.lexicon.is_entry(&token.text, &request.classes) {
                continue;
            }
            let (start, _, _) = modifier_run(&tokens, i, &self.lexicon);
            let surface = tokens[start..=i]
                .iter()
                .map(|t| t.text.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            if seen.insert(surface.clone()) {
                found.push((tokens[start].start, surface));
            }
        }
        // injected knowledge extends extraction with any known surface
        // present in the text
        if let Some(bundle) = &request.injected_knowledge {
            for entry in &bundle.keyword_knowledge {
                let surface = text::normalize(&entry.surface);
                if surface.is_empty() || seen.contains(&surface) {
                    continue;
                }
                if text::contains_token_seq(&request.text, &surface) {
                    seen.insert(surface.clone());
                    found.push((position_of(&tokens, &surface), surface));
                }
            }
        }
        found.sort();
        found.into_iter().map(|(_, s)| s).collect()
    }

    fn segment(&self, input: &str) -> Vec<String> {
        let tokens = text::tokenize_with_offsets(input);
        if tokens.is_empty() {
            return Vec::new();
        }
        let mut clauses: Vec<(usize, usize)> = Vec::new(); // token index ranges
        let mut clause_start = 0usize;
        for i in 0..tokens.len() {
            let is_last = i + 1 == tokens.len();
            let gap_has_punct = !is_last
                && input[tokens[i].end..tokens[i + 1].start]
                    .chars()
                    .any(|c| BOUNDARY_PUNCT.contains(&c));
            let next_is_contrast =
                !is_last && CONTRAST_MARKERS.contains(&tokens[i + 1].text.as_str());
            if is_last || gap_has_punct || next_is_contrast {
                clauses.push((clause_start, i));
                clause_start = i + 1;
            }
        }
        clauses
            .into_iter()
            .map(|(a, b)| input[tokens[a].start..tokens[b].end].to_string())
            .collect()
    }

    fn assign_weights(&self, subunits: &[SubUnitContext], classes: &ClassSet) -> ElicitationResponse {
        let dim = classes.len();
        let mut raw = Vec::with_capacity(subunits.len());
        let mut notes = Vec::with_capacity(subunits.len());
        for (j, su) in subunits.iter().enumerate() {
            let row: Vec<f64> = (0..dim)
                .map(|c| su.memberships.get(c).copied().unwrap_or(0.0).max(0.0))
                .collect();
            let dominant = classes
                .classes()
                .iter()
                .zip(&row)
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
                .map(|(c, v)| format!("{} {:.2}", c.name(), v))
                .unwrap_or_else(|| "none".to_string());
            notes.push(format!(
                "sub-unit {}: weight follows local evidence (strongest: {})",
                j + 1,
                dominant
            ));
            raw.push(row);
        }
        // a class with no evidence anywhere falls back to uniform emphasis
        for c in 0..dim {
            if raw.iter().all(|row| row[c] <= 0.0) {
                for row in &mut raw {
                    row[c] = 1.0;
                }
            }
        }
        ElicitationResponse::Weights { raw, notes }
    }

    fn cot(&self, request: &ElicitationRequest) -> ElicitationResponse {
        let m = lexicon_membership(&request.text, &request.classes, &self.lexicon);
        let sum: f64 = m.values().iter().sum();
        let probabilities: Vec<f64> = if sum > 0.0 {
            m.values().iter().map(|v| v / sum).collect()
        } else {
            vec![1.0 / request.classes.len() as f64; request.classes.len()]
        };
        let summary = request
            .classes
            .classes()
            .iter()
            .zip(&probabilities)
            .map(|(c, p)| format!("{} {:.3}", c.name(), p))
            .collect::<Vec<_>>()
            .join(", ");
        let step_notes = vec![
            "identify sentiment-bearing words".to_string(),
            "assess each part of the text".to_string(),
            "weigh the evidence across parts".to_string(),
            format!("assign class probabilities: {summary}"),
        ];
        ElicitationResponse::CotProbabilities {
            probabilities,
            step_notes,
        }
    }

    fn dp(&self, request: &ElicitationRequest) -> Result<ElicitationResponse, BackendError> {
        let m = lexicon_membership(&request.text, &request.classes, &self.lexicon);
        let mut best = 0usize;
        let mut tie = false;
        for (i, &v) in m.values().iter().enumerate().skip(1) {
            if v > m.get(best) + crate::fuzzy::TOLERANCE {
                best = i;
                tie = false;
            } else if (v - m.get(best)).abs() <= crate::fuzzy::TOLERANCE {
                tie = true;
            }
        }
        if tie || m.get(best) <= 0.0 {
            return match request.classes.other_class() {
                Some(other) => Ok(ElicitationResponse::DpLabel(other.name().to_string())),
                None => Err(BackendError::MalformedResponse {
                    kind: request.kind.as_str().to_string(),
                    message: "no dominant class and no catch-all available".to_string(),
                }),
            };
        }
        Ok(ElicitationResponse::DpLabel(
            request.classes.classes()[best].name().to_string(),
        ))
    }
}

fn position_of(tokens: &[Token], surface: &str) -> usize {
    let needle: Vec<&str> = surface.split(' ').collect();
    if needle.is_empty() || tokens.len() < needle.len() {
        return usize::MAX;
    }
    for w in 0..=(tokens.len() - needle.len()) {
        if tokens[w..w + needle.len()]
            .iter()
            .zip(&needle)
            .all(|(t, n)| t.text == *n)
        {
            return tokens[w].start;
        }
    }
    usize::MAX
}

impl Backend for LexiconBackend {
    fn elicit(&self, request: &ElicitationRequest) -> Result<ElicitationResponse, BackendError> {
        match request.kind {
            RequestKind::KeywordExtraction => {
                Ok(ElicitationResponse::Keywords(self.extract_keywords(request)))
            }
            RequestKind::KeywordMembership => Ok(ElicitationResponse::Membership(
                lexicon_membership(&request.text, &request.classes, &self.lexicon),
            )),
            RequestKind::SubunitSegmentation => {
                Ok(ElicitationResponse::SubUnits(self.segment(&request.text)))
            }
            RequestKind::WeightAssignment => {
                Ok(self.assign_weights(&request.subunits, &request.classes))
            }
            RequestKind::CotProbabilities => Ok(self.cot(request)),
            RequestKind::DpLabel => self.dp(request),
        }
    }

    fn id(&self) -> String {
        self.id.clone()
    }

    fn concurrency_limit(&self) -> usize {
        8
    }

    fn deterministic(&self) -> bool {
        true
    }
}
