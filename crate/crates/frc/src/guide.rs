//! Doc-tested mirror of the book (`book/src/`). Each chapter is included
//! verbatim as module documentation, so the Rust snippets in the guide run
//! under `cargo test` and the narrative can never drift from the code.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/membership-aggregation.md")]
pub mod membership_aggregation {}

#[doc = include_str!("../../../book/src/lexicon-oracle.md")]
pub mod lexicon_oracle {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline_chapter {}

#[doc = include_str!("../../../book/src/perturbations.md")]
pub mod perturbations {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/knowledge-transfer.md")]
pub mod knowledge_transfer {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/file-formats.md")]
pub mod file_formats {}
