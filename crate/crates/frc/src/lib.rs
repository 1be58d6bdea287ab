//! Fuzzy reasoning chains for sentiment analysis.
//!
//! This crate elicits continuous fuzzy membership degrees from a pluggable
//! model backend and aggregates them in three stages: per-keyword degrees,
//! local max-aggregation into sub-units, and class-specific weighted fusion
//! into a final membership vector. Unlike probability-based chain-of-thought
//! output, the degrees are independent per class, so a text can carry strong
//! positive *and* strong negative sentiment at once.
//!
//! Alongside the pipeline the crate ships a deterministic lexicon oracle for
//! fully offline runs, perturbation generators, an evaluation harness
//! (robustness, monotonicity, macro F1 with a clear/ambiguous split, and an
//! empirical stability estimate), and teacher-to-student knowledge transfer
//! by prompt injection.
//!
//! ```
//! use frc::backend::{Lexicon, LexiconBackend};
//! use frc::fuzzy::ClassSet;
//! use frc::pipeline::run_frc;
//!
//! let lexicon = Lexicon::from_json_str(r#"{
//!     "entries": {
//!         "dissatisfied": {"positive": 0.0, "negative": 0.8},
//!         "acceptable":   {"positive": 0.75, "negative": 0.0}
//!     },
//!     "modifiers": {"very": 1.5},
//!     "negators": ["not"]
//! }"#)?;
//! let backend = LexiconBackend::new(lexicon);
//! let classes = ClassSet::positive_negative();
//!
//! let trace = run_frc("Though dissatisfied, still acceptable.", &classes, &backend, None)?;
//! // both classes stay strong: the conflict is preserved, not averaged away
//! assert!(trace.fused.get(0) > 0.7 && trace.fused.get(1) > 0.7);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod backend;
pub mod commands;
pub mod dataset;
pub mod eval;
pub mod fuzzy;
pub mod perturb;
pub mod pipeline;
pub mod text;

pub mod guide;

pub use fuzzy::{ClassSet, MembershipVector, SentimentClass};
