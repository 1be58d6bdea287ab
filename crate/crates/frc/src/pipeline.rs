//! End-to-end reasoning pipelines.
//!
//! [`run_frc`] drives the three-stage fuzzy chain (keyword memberships →
//! local max-aggregation → weighted global fusion) against any [`Backend`].
//! [`run_cot`] and [`run_dp`] are the probability-simplex and single-label
//! baselines. Teacher traces can be distilled into a [`KnowledgeBundle`] and
//! injected into a student run, which reuses the teacher's degrees for
//! matching keywords and sub-units instead of re-eliciting them.

use crate::backend::{
    prompts, Backend, BackendError, ElicitationRequest, ElicitationResponse, RequestKind,
    SubUnitContext,
};
use crate::fuzzy::{
    self, ClassSet, FuzzyError, Keyword, MembershipVector, SubUnit, WeightMatrix, TOLERANCE,
};
use crate::text;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error("input text has no tokens")]
    DegenerateInput,
    #[error("probabilities sum to {sum:.4}, beyond renormalizable drift")]
    SimplexViolation { sum: f64 },
    #[error("label `{0}` is not in the class set")]
    LabelOutsideClassSet(String),
    #[error("backend returned an unexpected response variant (wanted {expected})")]
    UnexpectedResponse { expected: &'static str },
    #[error("trace set is empty")]
    EmptyTraceSet,
    #[error("traces come from different backends: `{first}` vs `{second}`")]
    MixedTraceBackends { first: String, second: String },
    #[error("trace is inconsistent: {0}")]
    InconsistentTrace(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// How far a third-party backend's probability vector may drift from
/// summing to 1 before [`run_cot`] refuses to renormalize it.
const COT_DRIFT: f64 = 0.05;

/// Wall-clock bookkeeping, recorded only for non-deterministic backends so
/// deterministic runs stay byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceTimestamps {
    pub started_unix_ms: u64,
    pub elapsed_ms: u64,
}

/// Full record of one fuzzy-chain run: everything needed to recompute the
/// fused memberships from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrcTrace {
    pub input_text: String,
    pub classes: Vec<String>,
    /// all scored keywords, flattened in sub-unit order
    pub keywords: Vec<Keyword>,
    pub subunits: Vec<SubUnit>,
    /// normalized class-specific fusion weights, rows = sub-units
    pub weights: WeightMatrix,
    /// one rationale line per weight row
    pub adjustment_notes: Vec<String>,
    pub fused: MembershipVector,
    pub backend_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<TraceTimestamps>,
}

/// One chain-of-thought baseline run. Probabilities live on the class
/// simplex, unlike fuzzy memberships.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotTrace {
    pub input_text: String,
    pub classes: Vec<String>,
    pub step_notes: Vec<String>,
    pub probabilities: Vec<f64>,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordKnowledge {
    pub surface: String,
    pub memberships: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubUnitKnowledge {
    pub text: String,
    pub memberships: Vec<f64>,
}

/// Keyword- and sub-unit-level degrees extracted from a teacher's traces,
/// injectable into a student's prompts. Either part may be empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBundle {
    pub teacher_model: String,
    #[serde(default)]
    pub keyword_knowledge: Vec<KeywordKnowledge>,
    #[serde(default)]
    pub subunit_knowledge: Vec<SubUnitKnowledge>,
}

impl KnowledgeBundle {
    pub fn empty(teacher_model: impl Into<String>) -> Self {
        Self {
            teacher_model: teacher_model.into(),
            keyword_knowledge: Vec::new(),
            subunit_knowledge: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.keyword_knowledge.is_empty() && self.subunit_knowledge.is_empty()
    }

    /// Keeps only the keyword part (the "keyword knowledge" configuration).
    pub fn keywords_only(&self) -> Self {
        Self {
            teacher_model: self.teacher_model.clone(),
            keyword_knowledge: self.keyword_knowledge.clone(),
            subunit_knowledge: Vec::new(),
        }
    }

    /// Keeps only the sub-unit part.
    pub fn subunits_only(&self) -> Self {
        Self {
            teacher_model: self.teacher_model.clone(),
            keyword_knowledge: Vec::new(),
            subunit_knowledge: self.subunit_knowledge.clone(),
        }
    }

    fn keyword_degrees(&self, normalized_surface: &str) -> Option<&[f64]> {
        self.keyword_knowledge
            .iter()
            .find(|k| k.surface == normalized_surface)
            .map(|k| k.memberships.as_slice())
    }

    fn subunit_degrees(&self, normalized_text: &str) -> Option<&[f64]> {
        self.subunit_knowledge
            .iter()
            .find(|s| text::normalize(&s.text) == normalized_text)
            .map(|s| s.memberships.as_slice())
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let json = std::fs::read_to_string(path.as_ref()).map_err(|e| PipelineError::Io {
            path: path.as_ref().display().to_string(),
            source: e,
        })?;
        Ok(serde_json::from_str(&json)?)
    }

    pub fn to_path(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path.as_ref(), json).map_err(|e| PipelineError::Io {
            path: path.as_ref().display().to_string(),
            source: e,
        })
    }
}

fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Runs the full fuzzy reasoning chain on one text.
///
/// Stage order: keyword extraction, sub-unit segmentation, per-keyword
/// membership, local aggregation, weight elicitation + normalization,
/// global fusion. When `injected` knowledge is present it is rendered into
/// the extraction and membership prompts, and any keyword or sub-unit that
/// matches a bundle entry (exact lowercased token match) reuses the injected
/// degrees without re-elicitation.
pub fn run_frc(
    input: &str,
    classes: &ClassSet,
    backend: &dyn Backend,
    injected: Option<&KnowledgeBundle>,
) -> Result<FrcTrace, PipelineError> {
    let started = now_unix_ms();
    let input = input.trim();
    if text::tokenize(input).is_empty() {
        return Err(PipelineError::DegenerateInput);
    }
    let bundle = injected.filter(|b| !b.is_empty());

    // stage 1: keyword extraction
    let request = ElicitationRequest::new(RequestKind::KeywordExtraction, input, classes.clone())
        .with_knowledge(bundle.cloned());
    let surfaces = match backend.elicit(&request)? {
        ElicitationResponse::Keywords(list) => list,
        _ => return Err(PipelineError::UnexpectedResponse { expected: "keywords" }),
    };
    let mut seen = std::collections::BTreeSet::new();
    let surfaces: Vec<String> = surfaces
        .into_iter()
        .map(|s| text::normalize(&s))
        .filter(|s| !s.is_empty() && seen.insert(s.clone()))
        .collect();

    // stage 2: segmentation into emotionally non-overlapping sub-units
    let request =
        ElicitationRequest::new(RequestKind::SubunitSegmentation, input, classes.clone());
    let spans = match backend.elicit(&request)? {
        ElicitationResponse::SubUnits(list) => list,
        _ => return Err(PipelineError::UnexpectedResponse { expected: "subunits" }),
    };
    let spans: Vec<String> = spans
        .into_iter()
        .filter(|s| !text::tokenize(s).is_empty())
        .collect();
    let spans = if spans.is_empty() {
        vec![input.to_string()]
    } else {
        spans
    };

    // assign each keyword to the first sub-unit containing it; leftovers go
    // to a trailing catch-all sub-unit
    let mut per_span: Vec<Vec<String>> = vec![Vec::new(); spans.len()];
    let mut orphans: Vec<String> = Vec::new();
    for surface in surfaces {
        match spans
            .iter()
            .position(|span| text::contains_token_seq(span, &surface))
        {
            Some(i) => per_span[i].push(surface),
            None => orphans.push(surface),
        }
    }
    let mut span_texts = spans;
    if !orphans.is_empty() {
        span_texts.push(orphans.join("; "));
        per_span.push(orphans);
    }

    // stage 3: keyword memberships + local aggregation, reusing injected
    // degrees where surfaces or whole sub-units match
    let mut subunits = Vec::with_capacity(span_texts.len());
    for (span, surfaces) in span_texts.iter().zip(per_span) {
        if let Some(degrees) = bundle.and_then(|b| b.subunit_degrees(&text::normalize(span))) {
            subunits.push(SubUnit {
                text: span.clone(),
                keywords: Vec::new(),
                memberships: fit_degrees(degrees, classes.len()),
            });
            continue;
        }
        let mut keywords = Vec::with_capacity(surfaces.len());
        for surface in surfaces {
            let memberships = match bundle.and_then(|b| b.keyword_degrees(&surface)) {
                Some(degrees) => fit_degrees(degrees, classes.len()),
                None => {
                    let request = ElicitationRequest::new(
                        RequestKind::KeywordMembership,
                        &surface,
                        classes.clone(),
                    )
                    .with_knowledge(bundle.cloned());
                    match backend.elicit(&request)? {
                        ElicitationResponse::Membership(m) => fit_degrees(m.values(), classes.len()),
                        _ => {
                            return Err(PipelineError::UnexpectedResponse {
                                expected: "membership",
                            })
                        }
                    }
                }
            };
            keywords.push(Keyword::new(surface, memberships)?);
        }
        if keywords.is_empty() {
            subunits.push(SubUnit::keywordless(span.clone(), classes));
        } else {
            subunits.push(SubUnit::from_keywords(span.clone(), keywords, classes)?);
        }
    }

    // stage 4: class-specific weights, normalized locally, then fusion
    let contexts: Vec<SubUnitContext> = subunits
        .iter()
        .map(|su| SubUnitContext {
            text: su.text.clone(),
            memberships: su.memberships.values().to_vec(),
        })
        .collect();
    let request = ElicitationRequest::new(RequestKind::WeightAssignment, input, classes.clone())
        .with_subunits(contexts);
    let (raw, notes) = match backend.elicit(&request)? {
        ElicitationResponse::Weights { raw, notes } => (raw, notes),
        _ => return Err(PipelineError::UnexpectedResponse { expected: "weights" }),
    };
    let weights = fuzzy::normalize_weights(&raw)?;
    let fused = fuzzy::fuse_global(&subunits, &weights)?;

    let keywords = subunits
        .iter()
        .flat_map(|su| su.keywords.iter().cloned())
        .collect();
    let timestamps = (!backend.deterministic()).then(|| TraceTimestamps {
        started_unix_ms: started,
        elapsed_ms: now_unix_ms().saturating_sub(started),
    });
    Ok(FrcTrace {
        input_text: input.to_string(),
        classes: classes.names(),
        keywords,
        subunits,
        weights,
        adjustment_notes: notes,
        fused,
        backend_id: backend.id(),
        timestamps,
    })
}

fn fit_degrees(degrees: &[f64], dim: usize) -> MembershipVector {
    let mut values = degrees.to_vec();
    values.resize(dim, 0.0);
    MembershipVector::clamped(values)
}

/// Runs the chain-of-thought baseline: same reasoning skeleton, but the
/// output is a probability vector on the class simplex.
pub fn run_cot(
    input: &str,
    classes: &ClassSet,
    backend: &dyn Backend,
) -> Result<CotTrace, PipelineError> {
    let input = input.trim();
    if text::tokenize(input).is_empty() {
        return Err(PipelineError::DegenerateInput);
    }
    let request = ElicitationRequest::new(RequestKind::CotProbabilities, input, classes.clone());
    let (probabilities, step_notes) = match backend.elicit(&request)? {
        ElicitationResponse::CotProbabilities {
            probabilities,
            step_notes,
        } => (probabilities, step_notes),
        _ => {
            return Err(PipelineError::UnexpectedResponse {
                expected: "probabilities",
            })
        }
    };
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > COT_DRIFT || sum <= 0.0 {
        return Err(PipelineError::SimplexViolation { sum });
    }
    let probabilities = probabilities.into_iter().map(|p| p / sum).collect();
    Ok(CotTrace {
        input_text: input.to_string(),
        classes: classes.names(),
        step_notes,
        probabilities,
        backend_id: backend.id(),
    })
}

/// Runs the direct-prompting baseline: one elicitation, one label.
pub fn run_dp(
    input: &str,
    classes: &ClassSet,
    backend: &dyn Backend,
) -> Result<String, PipelineError> {
    let input = input.trim();
    if text::tokenize(input).is_empty() {
        return Err(PipelineError::DegenerateInput);
    }
    let request = ElicitationRequest::new(RequestKind::DpLabel, input, classes.clone());
    let label = match backend.elicit(&request)? {
        ElicitationResponse::DpLabel(label) => label,
        _ => return Err(PipelineError::UnexpectedResponse { expected: "label" }),
    };
    classes
        .classes()
        .iter()
        .find(|c| c.name().eq_ignore_ascii_case(label.trim()))
        .map(|c| c.name().to_string())
        .ok_or(PipelineError::LabelOutsideClassSet(label))
}

/// Distills teacher traces into an injectable bundle: keyword and sub-unit
/// entries deduplicated by lowercased surface form, keeping the entry with
/// the highest max-class degree on collision.
pub fn extract_knowledge(traces: &[FrcTrace]) -> Result<KnowledgeBundle, PipelineError> {
    let first = traces.first().ok_or(PipelineError::EmptyTraceSet)?;
    for trace in traces {
        if trace.backend_id != first.backend_id {
            return Err(PipelineError::MixedTraceBackends {
                first: first.backend_id.clone(),
                second: trace.backend_id.clone(),
            });
        }
    }
    fn peak(values: &[f64]) -> f64 {
        values.iter().copied().fold(0.0, f64::max)
    }
    let mut keywords: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    let mut subunits: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for trace in traces {
        for kw in &trace.keywords {
            let key = text::normalize(&kw.surface);
            let candidate = kw.memberships.values().to_vec();
            match keywords.get(&key) {
                Some(existing) if peak(existing) >= peak(&candidate) => {}
                _ => {
                    keywords.insert(key, candidate);
                }
            }
        }
        for su in &trace.subunits {
            let key = text::normalize(&su.text);
            if key.is_empty() {
                continue;
            }
            let candidate = su.memberships.values().to_vec();
            match subunits.get(&key) {
                Some(existing) if peak(existing) >= peak(&candidate) => {}
                _ => {
                    subunits.insert(key, candidate);
                }
            }
        }
    }
    Ok(KnowledgeBundle {
        teacher_model: first.backend_id.clone(),
        keyword_knowledge: keywords
            .into_iter()
            .map(|(surface, memberships)| KeywordKnowledge {
                surface,
                memberships,
            })
            .collect(),
        subunit_knowledge: subunits
            .into_iter()
            .map(|(text, memberships)| SubUnitKnowledge { text, memberships })
            .collect(),
    })
}

/// Renders the student-side prompt for a request with a bundle injected.
/// With an empty bundle the result is byte-identical to the baseline prompt.
pub fn build_student_prompt(request: &ElicitationRequest, bundle: &KnowledgeBundle) -> String {
    let request = request.clone().with_knowledge(Some(bundle.clone()));
    prompts::render(&request)
}

/// Recomputes local aggregation and global fusion from the raw trace fields
/// and checks them against the stored values within [`TOLERANCE`].
pub fn verify_trace(trace: &FrcTrace) -> Result<(), PipelineError> {
    let dim = trace.classes.len();
    for (j, su) in trace.subunits.iter().enumerate() {
        if !su.keywords.is_empty() {
            for c in 0..dim {
                let max = su
                    .keywords
                    .iter()
                    .map(|k| k.memberships.get(c))
                    .fold(0.0_f64, f64::max);
                if (max - su.memberships.get(c)).abs() > TOLERANCE {
                    return Err(PipelineError::InconsistentTrace(format!(
                        "sub-unit {j} class {c}: stored {} vs recomputed max {max}",
                        su.memberships.get(c)
                    )));
                }
            }
        }
    }
    for c in 0..dim {
        let sum: f64 = (0..trace.weights.m()).map(|j| trace.weights.get(j, c)).sum();
        if (sum - 1.0).abs() > TOLERANCE {
            return Err(PipelineError::InconsistentTrace(format!(
                "weight column {c} sums to {sum}"
            )));
        }
    }
    let fused = fuzzy::fuse_global(&trace.subunits, &trace.weights)?;
    for c in 0..dim {
        if (fused.get(c) - trace.fused.get(c)).abs() > TOLERANCE {
            return Err(PipelineError::InconsistentTrace(format!(
                "fused class {c}: stored {} vs recomputed {}",
                trace.fused.get(c),
                fused.get(c)
            )));
        }
    }
    let flattened: Vec<&str> = trace
        .subunits
        .iter()
        .flat_map(|su| su.keywords.iter().map(|k| k.surface.as_str()))
        .collect();
    let listed: Vec<&str> = trace.keywords.iter().map(|k| k.surface.as_str()).collect();
    if flattened != listed {
        return Err(PipelineError::InconsistentTrace(
            "keyword list does not match sub-unit assignment".to_string(),
        ));
    }
    Ok(())
}

/// Runs `work` over `items` with up to `concurrency` worker threads.
/// Results come back in input order regardless of completion order.
pub fn run_parallel<T, R, F>(items: &[T], concurrency: usize, work: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let concurrency = concurrency.clamp(1, items.len().max(1));
    if concurrency == 1 {
        return items.iter().map(&work).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<R>>> =
        items.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..concurrency {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let result = work(&items[i]);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}
