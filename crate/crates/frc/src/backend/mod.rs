//! Pluggable model backends.
//!
//! Two implementations ship with the crate: [`HttpBackend`] speaks the
//! OpenAI-compatible chat-completions wire protocol, and [`LexiconBackend`]
//! is a deterministic oracle backed by a seeded lexicon, which makes every
//! pipeline property testable offline.

mod http;
mod lexicon;
pub mod prompts;

pub use http::{extract_first_json, ChatMessage, HttpBackend};
pub use lexicon::{lexicon_membership, Lexicon, LexiconBackend, LexiconError};

use crate::fuzzy::{ClassSet, MembershipVector};
use crate::pipeline::KnowledgeBundle;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use thiserror::Error;

/// Connection and budget settings for a model backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Sampling temperature; 0 keeps identical requests byte-identical.
    pub temperature: f64,
    /// Total transport attempts per elicitation (not counting the single
    /// reprompt allowed on a malformed response).
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub concurrency_limit: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint_url: String::new(),
            model_name: String::new(),
            temperature: 0.0,
            max_retries: 3,
            timeout_secs: 30,
            concurrency_limit: 4,
        }
    }
}

/// What the pipeline is asking the model for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    KeywordExtraction,
    KeywordMembership,
    SubunitSegmentation,
    WeightAssignment,
    CotProbabilities,
    DpLabel,
}

impl RequestKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RequestKind::KeywordExtraction => "keyword_extraction",
            RequestKind::KeywordMembership => "keyword_membership",
            RequestKind::SubunitSegmentation => "subunit_segmentation",
            RequestKind::WeightAssignment => "weight_assignment",
            RequestKind::CotProbabilities => "cot_probabilities",
            RequestKind::DpLabel => "dp_label",
        }
    }
}

/// Context passed along with a weight-assignment request: the sub-units the
/// weights are for, with their locally aggregated degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubUnitContext {
    pub text: String,
    pub memberships: Vec<f64>,
}

/// A single structured elicitation. `kind` determines which response schema
/// the backend must produce.
#[derive(Debug, Clone, PartialEq)]
pub struct ElicitationRequest {
    pub kind: RequestKind,
    pub text: String,
    pub classes: ClassSet,
    pub injected_knowledge: Option<KnowledgeBundle>,
    /// Present only for [`RequestKind::WeightAssignment`].
    pub subunits: Vec<SubUnitContext>,
}

impl ElicitationRequest {
    pub fn new(kind: RequestKind, text: impl Into<String>, classes: ClassSet) -> Self {
        Self {
            kind,
            text: text.into(),
            classes,
            injected_knowledge: None,
            subunits: Vec::new(),
        }
    }

    pub fn with_knowledge(mut self, bundle: Option<KnowledgeBundle>) -> Self {
        self.injected_knowledge = bundle;
        self
    }

    pub fn with_subunits(mut self, subunits: Vec<SubUnitContext>) -> Self {
        self.subunits = subunits;
        self
    }
}

/// Parsed, schema-checked backend output. Every degree has been clamped
/// into `[0,1]` before it gets here.
#[derive(Debug, Clone, PartialEq)]
pub enum ElicitationResponse {
    Keywords(Vec<String>),
    Membership(MembershipVector),
    SubUnits(Vec<String>),
    Weights {
        /// raw[sub_unit][class], nonnegative importance scores
        raw: Vec<Vec<f64>>,
        /// one rationale line per sub-unit row
        notes: Vec<String>,
    },
    CotProbabilities {
        probabilities: Vec<f64>,
        step_notes: Vec<String>,
    },
    DpLabel(String),
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed response for {kind}: {message}")]
    MalformedResponse { kind: String, message: String },
    #[error("schema violation for {kind}: {message}")]
    SchemaViolation { kind: String, message: String },
}

/// A model backend that answers structured elicitations.
///
/// Implementations must be shareable across threads; per-request state is
/// never shared.
pub trait Backend: Send + Sync {
    fn elicit(&self, request: &ElicitationRequest) -> Result<ElicitationResponse, BackendError>;

    /// Stable identifier recorded in traces (model name, or lexicon hash).
    fn id(&self) -> String;

    /// Maximum number of in-flight requests batch runners may issue.
    fn concurrency_limit(&self) -> usize {
        1
    }

    /// Whether identical inputs always yield bit-identical outputs. Traces
    /// from deterministic backends omit wall-clock timestamps so reruns stay
    /// byte-identical.
    fn deterministic(&self) -> bool {
        false
    }
}

/// Wraps a backend and counts elicitations per request kind. Useful for
/// asserting call budgets, e.g. that injected knowledge suppresses
/// keyword-membership calls.
pub struct CountingBackend<B> {
    inner: B,
    counts: [AtomicUsize; 6],
}

impl<B: Backend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            counts: Default::default(),
        }
    }

    pub fn count(&self, kind: RequestKind) -> usize {
        self.counts[Self::slot(kind)].load(Ordering::SeqCst)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|c| c.load(Ordering::SeqCst)).sum()
    }

    fn slot(kind: RequestKind) -> usize {
        match kind {
            RequestKind::KeywordExtraction => 0,
            RequestKind::KeywordMembership => 1,
            RequestKind::SubunitSegmentation => 2,
            RequestKind::WeightAssignment => 3,
            RequestKind::CotProbabilities => 4,
            RequestKind::DpLabel => 5,
        }
    }
}

impl<B: Backend> Backend for CountingBackend<B> {
    fn elicit(&self, request: &ElicitationRequest) -> Result<ElicitationResponse, BackendError> {
        self.counts[Self::slot(request.kind)].fetch_add(1, Ordering::SeqCst);
        self.inner.elicit(request)
    }

    fn id(&self) -> String {
        self.inner.id()
    }

    fn concurrency_limit(&self) -> usize {
        self.inner.concurrency_limit()
    }

    fn deterministic(&self) -> bool {
        self.inner.deterministic()
    }
}
