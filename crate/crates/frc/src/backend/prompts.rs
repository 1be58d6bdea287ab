//! Prompt rendering.
//!
//! Templates are versioned text assets compiled into the binary. Every
//! prompt instructs the model to answer with a single JSON object; a
//! tolerant extractor on the response side pulls the first well-formed
//! object out of any surrounding prose.

use super::{ElicitationRequest, RequestKind};
use crate::pipeline::KnowledgeBundle;

/// Bumped whenever any template text changes.
pub const PROMPT_VERSION: &str = "v1";

const KEYWORD_EXTRACTION: &str = include_str!("../../templates/frc_keyword_extraction.txt");
const KEYWORD_MEMBERSHIP: &str = include_str!("../../templates/frc_keyword_membership.txt");
const SUBUNIT_SEGMENTATION: &str = include_str!("../../templates/frc_subunit_segmentation.txt");
const WEIGHT_ASSIGNMENT: &str = include_str!("../../templates/frc_weight_assignment.txt");
const COT: &str = include_str!("../../templates/cot.txt");
const DP: &str = include_str!("../../templates/dp.txt");

/// Renders the full prompt for a request, including knowledge blocks when
/// injected knowledge is present. An absent or empty bundle renders to the
/// byte-identical baseline prompt.
pub fn render(request: &ElicitationRequest) -> String {
    let template = match request.kind {
        RequestKind::KeywordExtraction => KEYWORD_EXTRACTION,
        RequestKind::KeywordMembership => KEYWORD_MEMBERSHIP,
        RequestKind::SubunitSegmentation => SUBUNIT_SEGMENTATION,
        RequestKind::WeightAssignment => WEIGHT_ASSIGNMENT,
        RequestKind::CotProbabilities => COT,
        RequestKind::DpLabel => DP,
    };
    let classes = request.classes.names().join(", ");
    let knowledge = request
        .injected_knowledge
        .as_ref()
        .map(|b| knowledge_block(b, &request.classes.names()))
        .unwrap_or_default();
    let subunits = request
        .subunits
        .iter()
        .enumerate()
        .map(|(i, su)| {
            let degrees = request
                .classes
                .names()
                .iter()
                .zip(&su.memberships)
                .map(|(name, v)| format!("{name} {v:.2}"))
                .collect::<Vec<_>>()
                .join(", ");
            format!("{}. \"{}\" — {}", i + 1, su.text, degrees)
        })
        .collect::<Vec<_>>()
        .join("\n");
    template
        .replace("{{classes}}", &classes)
        .replace("{{text}}", &request.text)
        .replace("{{subunits}}", &subunits)
        .replace("{{knowledge}}", &knowledge)
}

/// Renders the injected-knowledge section: a keyword block when the bundle
/// has keyword knowledge, then a sub-unit block when it has sub-unit
/// knowledge. An empty bundle renders to an empty string.
fn knowledge_block(bundle: &KnowledgeBundle, class_names: &[String]) -> String {
    let mut out = String::new();
    if !bundle.keyword_knowledge.is_empty() {
        out.push_str("\nKnown keyword degrees from a prior analysis:\n");
        for entry in &bundle.keyword_knowledge {
            out.push_str(&format!(
                "- \"{}\": {}\n",
                entry.surface,
                degrees_line(class_names, &entry.memberships)
            ));
        }
    }
    if !bundle.subunit_knowledge.is_empty() {
        out.push_str("\nKnown sub-unit degrees from a prior analysis:\n");
        for entry in &bundle.subunit_knowledge {
            out.push_str(&format!(
                "- \"{}\": {}\n",
                entry.text,
                degrees_line(class_names, &entry.memberships)
            ));
        }
    }
    out
}

fn degrees_line(class_names: &[String], memberships: &[f64]) -> String {
    class_names
        .iter()
        .zip(memberships)
        .map(|(name, v)| format!("{name} {v:.2}"))
        .collect::<Vec<_>>()
        .join(", ")
}
