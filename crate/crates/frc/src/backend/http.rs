//! OpenAI-compatible chat-completions client.
//!
//! Wire shape: `POST {endpoint_url}/v1/chat/completions` with `model`,
//! `messages`, `temperature`; the answer is read from
//! `choices[0].message.content`. A bearer token is taken from the
//! `FRC_API_KEY` environment variable when present.
//!
//! Budget: each logical request gets at most `max_retries` transport
//! attempts. When a response arrives but cannot be parsed into the requested
//! schema, exactly one corrective reprompt is sent before giving up with
//! [`BackendError::MalformedResponse`].

use super::{prompts, Backend, BackendError, ElicitationRequest, ElicitationResponse, RequestKind};
use super::BackendConfig;
use crate::fuzzy::MembershipVector;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::time::Duration;

const API_KEY_ENV: &str = "FRC_API_KEY";

/// How far a returned probability vector may drift from summing to 1 and
/// still be renormalized instead of rejected.
const SIMPLEX_DRIFT: f64 = 0.05;

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".to_string(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".to_string(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

pub struct HttpBackend {
    config: BackendConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport {
                attempts: 0,
                message: format!("failed to build HTTP client: {e}"),
            })?;
        Ok(Self {
            config,
            client,
            api_key: std::env::var(API_KEY_ENV).ok(),
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Sends one chat exchange and returns the assistant's text, retrying
    /// transport failures up to `max_retries` attempts.
    pub fn chat(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let url = format!(
            "{}/v1/chat/completions",
            self.config.endpoint_url.trim_end_matches('/')
        );
        let body = ChatRequest {
            model: &self.config.model_name,
            messages,
            temperature: self.config.temperature,
        };
        let attempts = self.config.max_retries.max(1);
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            let mut req = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let parsed: ChatResponse =
                            response.json().map_err(|e| BackendError::Transport {
                                attempts: attempt,
                                message: format!("invalid completion envelope: {e}"),
                            })?;
                        let content = parsed
                            .choices
                            .into_iter()
                            .next()
                            .and_then(|c| c.message.content);
                        return content.ok_or_else(|| BackendError::Transport {
                            attempts: attempt,
                            message: "completion had no message content".to_string(),
                        });
                    }
                    // retry server-side congestion, fail fast on client errors
                    if status.is_server_error() || status.as_u16() == 429 {
                        last_error = format!("HTTP {status}");
                    } else {
                        return Err(BackendError::Transport {
                            attempts: attempt,
                            message: format!("HTTP {status}"),
                        });
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(BackendError::Transport {
            attempts,
            message: last_error,
        })
    }

    fn parse_response(
        &self,
        request: &ElicitationRequest,
        content: &str,
    ) -> Result<ElicitationResponse, BackendError> {
        let value = extract_first_json(content).ok_or_else(|| malformed(request, "no JSON object found"))?;
        match request.kind {
            RequestKind::KeywordExtraction => {
                let list = string_list(&value, "keywords")
                    .ok_or_else(|| malformed(request, "missing `keywords` array"))?;
                Ok(ElicitationResponse::Keywords(list))
            }
            RequestKind::SubunitSegmentation => {
                let list = string_list(&value, "subunits")
                    .ok_or_else(|| malformed(request, "missing `subunits` array"))?;
                if list.is_empty() {
                    return Err(malformed(request, "empty sub-unit list"));
                }
                Ok(ElicitationResponse::SubUnits(list))
            }
            RequestKind::KeywordMembership => {
                let map = value
                    .get("memberships")
                    .and_then(Value::as_object)
                    .ok_or_else(|| malformed(request, "missing `memberships` object"))?;
                let mut degrees = Vec::with_capacity(request.classes.len());
                for class in request.classes.classes() {
                    let v = map.get(class.name()).map_or(Ok(0.0), |v| {
                        v.as_f64()
                            .ok_or_else(|| malformed(request, "non-numeric degree"))
                    })?;
                    degrees.push(v);
                }
                Ok(ElicitationResponse::Membership(MembershipVector::clamped(
                    degrees,
                )))
            }
            RequestKind::WeightAssignment => {
                let rows = value
                    .get("rows")
                    .and_then(Value::as_array)
                    .ok_or_else(|| malformed(request, "missing `rows` array"))?;
                if rows.len() != request.subunits.len() {
                    return Err(BackendError::SchemaViolation {
                        kind: request.kind.as_str().to_string(),
                        message: format!(
                            "expected {} weight rows, got {}",
                            request.subunits.len(),
                            rows.len()
                        ),
                    });
                }
                let mut raw = Vec::with_capacity(rows.len());
                let mut notes = Vec::with_capacity(rows.len());
                for row in rows {
                    let scores = row
                        .get("scores")
                        .and_then(Value::as_object)
                        .ok_or_else(|| malformed(request, "row missing `scores`"))?;
                    let mut weights = Vec::with_capacity(request.classes.len());
                    for class in request.classes.classes() {
                        let v = scores.get(class.name()).map_or(Ok(0.0), |v| {
                            v.as_f64()
                                .ok_or_else(|| malformed(request, "non-numeric score"))
                        })?;
                        weights.push(v.max(0.0));
                    }
                    raw.push(weights);
                    notes.push(
                        row.get("note")
                            .and_then(Value::as_str)
                            .unwrap_or("")
                            .to_string(),
                    );
                }
                Ok(ElicitationResponse::Weights { raw, notes })
            }
            RequestKind::CotProbabilities => {
                let map = value
                    .get("probabilities")
                    .and_then(Value::as_object)
                    .ok_or_else(|| malformed(request, "missing `probabilities` object"))?;
                let mut probabilities = Vec::with_capacity(request.classes.len());
                for class in request.classes.classes() {
                    let v = map.get(class.name()).map_or(Ok(0.0), |v| {
                        v.as_f64()
                            .ok_or_else(|| malformed(request, "non-numeric probability"))
                    })?;
                    probabilities.push(v.clamp(0.0, 1.0));
                }
                let sum: f64 = probabilities.iter().sum();
                if (sum - 1.0).abs() > SIMPLEX_DRIFT || sum <= 0.0 {
                    return Err(malformed(
                        request,
                        &format!("probabilities sum to {sum:.3}, outside tolerated drift"),
                    ));
                }
                for p in &mut probabilities {
                    *p /= sum;
                }
                let step_notes = string_list(&value, "steps").unwrap_or_default();
                Ok(ElicitationResponse::CotProbabilities {
                    probabilities,
                    step_notes,
                })
            }
            RequestKind::DpLabel => {
                let label = value
                    .get("label")
                    .and_then(Value::as_str)
                    .ok_or_else(|| malformed(request, "missing `label` string"))?;
                let canonical = request
                    .classes
                    .classes()
                    .iter()
                    .find(|c| c.name().eq_ignore_ascii_case(label.trim()))
                    .map(|c| c.name().to_string())
                    .ok_or_else(|| {
                        malformed(request, &format!("label `{label}` not in class set"))
                    })?;
                Ok(ElicitationResponse::DpLabel(canonical))
            }
        }
    }
}

fn malformed(request: &ElicitationRequest, message: &str) -> BackendError {
    BackendError::MalformedResponse {
        kind: request.kind.as_str().to_string(),
        message: message.to_string(),
    }
}

fn string_list(value: &Value, field: &str) -> Option<Vec<String>> {
    let array = value.get(field)?.as_array()?;
    let mut out = Vec::with_capacity(array.len());
    for item in array {
        out.push(item.as_str()?.to_string());
    }
    Some(out)
}

/// Pulls the first balanced, parseable JSON object or array out of free-form
/// model output. String-escape aware so braces inside strings don't confuse
/// the depth count.
pub fn extract_first_json(content: &str) -> Option<Value> {
    let bytes = content.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let open = bytes[i];
        if open == b'{' || open == b'[' {
            let close = if open == b'{' { b'}' } else { b']' };
            let mut depth = 0usize;
            let mut in_string = false;
            let mut escaped = false;
            for (j, &b) in bytes.iter().enumerate().skip(i) {
                if in_string {
                    if escaped {
                        escaped = false;
                    } else if b == b'\\' {
                        escaped = true;
                    } else if b == b'"' {
                        in_string = false;
                    }
                    continue;
                }
                match b {
                    b'"' => in_string = true,
                    b if b == open => depth += 1,
                    b if b == close => {
                        depth -= 1;
                        if depth == 0 {
                            if let Ok(v) = serde_json::from_slice(&bytes[i..=j]) {
                                return Some(v);
                            }
                            break;
                        }
                    }
                    _ => {}
                }
            }
        }
        i += 1;
    }
    None
}

impl Backend for HttpBackend {
    fn elicit(&self, request: &ElicitationRequest) -> Result<ElicitationResponse, BackendError> {
        let prompt = prompts::render(request);
        let mut messages = vec![ChatMessage::user(&prompt)];
        let first = self.chat(&messages)?;
        match self.parse_response(request, &first) {
            Ok(response) => Ok(response),
            Err(BackendError::MalformedResponse { .. }) => {
                // exactly one corrective reprompt, then hard error
                messages.push(ChatMessage::assistant(&first));
                messages.push(ChatMessage::user(
                    "Your previous answer could not be parsed. Reply again with ONLY \
                     the single JSON object in the required schema, no other text.",
                ));
                let second = self.chat(&messages)?;
                self.parse_response(request, &second)
            }
            Err(other) => Err(other),
        }
    }

    fn id(&self) -> String {
        self.config.model_name.clone()
    }

    fn concurrency_limit(&self) -> usize {
        self.config.concurrency_limit.max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_object_from_surrounding_prose() {
        let content = "Sure! Here is the answer:\n{\"label\": \"positive\"}\nHope that helps.";
        let v = extract_first_json(content).unwrap();
        assert_eq!(v["label"], "positive");
    }

    #[test]
    fn extraction_handles_braces_inside_strings() {
        let content = r#"noise {"keywords": ["a } b", "c"]} trailing"#;
        let v = extract_first_json(content).unwrap();
        assert_eq!(v["keywords"][0], "a } b");
    }

    #[test]
    fn extraction_skips_unbalanced_prefix() {
        let content = r#"broken { not json ... {"label": "negative"}"#;
        let v = extract_first_json(content).unwrap();
        assert_eq!(v["label"], "negative");
    }

    #[test]
    fn extraction_returns_none_without_json() {
        assert!(extract_first_json("no structured output at all").is_none());
    }
}
