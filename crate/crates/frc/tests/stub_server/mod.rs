//! Minimal chat-completions stub for wire-conformance tests: a raw TCP
//! HTTP/1.1 server that answers `POST /v1/chat/completions` with canned
//! content routed by the prompt's stage marker.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

#[derive(Clone, Copy)]
pub enum Mode {
    /// Answers every stage with schema-correct JSON wrapped in prose.
    Wellformed,
    /// Never returns anything parseable.
    Malformed,
}

pub struct StubServer {
    port: u16,
    requests: Arc<AtomicUsize>,
}

impl StubServer {
    pub fn start(mode: Mode) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let port = listener.local_addr().unwrap().port();
        let requests = Arc::new(AtomicUsize::new(0));
        let counter = requests.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                counter.fetch_add(1, Ordering::SeqCst);
                let body = match read_request(&mut stream) {
                    Some(body) => body,
                    None => continue,
                };
                let content = respond_to(mode, &body);
                let payload = serde_json::json!({
                    "id": "stub",
                    "object": "chat.completion",
                    "created": 0,
                    "model": "stub-model",
                    "choices": [{
                        "index": 0,
                        "message": {"role": "assistant", "content": content},
                        "finish_reason": "stop"
                    }]
                })
                .to_string();
                let response = format!(
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    payload.len(),
                    payload
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        Self { port, requests }
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

fn read_request(stream: &mut std::net::TcpStream) -> Option<String> {
    let mut buffer = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end;
    loop {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            return None;
        }
        buffer.extend_from_slice(&chunk[..n]);
        if let Some(pos) = find_header_end(&buffer) {
            header_end = pos;
            break;
        }
    }
    let headers = String::from_utf8_lossy(&buffer[..header_end]).to_string();
    let content_length: usize = headers
        .lines()
        .find_map(|line| {
            let (name, value) = line.split_once(':')?;
            name.eq_ignore_ascii_case("content-length")
                .then(|| value.trim().parse().ok())?
        })
        .unwrap_or(0);
    let body_start = header_end + 4;
    while buffer.len() < body_start + content_length {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            break;
        }
        buffer.extend_from_slice(&chunk[..n]);
    }
    Some(String::from_utf8_lossy(&buffer[body_start..]).to_string())
}

fn find_header_end(buffer: &[u8]) -> Option<usize> {
    buffer.windows(4).position(|w| w == b"\r\n\r\n")
}

fn respond_to(mode: Mode, request_body: &str) -> String {
    if matches!(mode, Mode::Malformed) {
        return "I absolutely refuse to answer with structured output.".to_string();
    }
    let prompt = serde_json::from_str::<serde_json::Value>(request_body)
        .ok()
        .and_then(|v| {
            v.get("messages")?
                .as_array()?
                .iter()
                .rev()
                .find_map(|m| m.get("content")?.as_str().map(str::to_string))
        })
        .unwrap_or_default();
    let json = if prompt.contains("step 1 of") {
        r#"{"keywords": ["great"]}"#
    } else if prompt.contains("step 2 of") {
        r#"{"memberships": {"positive": 0.9, "negative": 0.1}}"#
    } else if prompt.contains("step 3 of") {
        r#"{"subunits": ["stub great"]}"#
    } else if prompt.contains("step 4 of") {
        r#"{"rows": [{"scores": {"positive": 1.0, "negative": 1.0}, "note": "stub weights"}]}"#
    } else if prompt.contains("step by step") {
        r#"{"steps": ["looked at the words"], "probabilities": {"positive": 0.6, "negative": 0.4}}"#
    } else {
        r#"{"label": "Positive"}"#
    };
    format!("Sure, here is my analysis:\n{json}\nHope that helps!")
}
