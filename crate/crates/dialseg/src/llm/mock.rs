//! A tiny canned-response HTTP server for offline testing of the LLM path.
//!
//! Rules are matched against the raw request body by substring, first match
//! wins, and each rule replays its responses in order (repeating the last one
//! when exhausted). That is enough to script per-session behavior, including
//! "fail twice, then succeed".

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::Deserialize;

/// One canned behavior: applies when `match_substring` occurs in the request
/// body (an empty string matches everything).
#[derive(Debug, Clone, Deserialize)]
pub struct MockRule {
    #[serde(default)]
    pub match_substring: String,
    /// Message contents returned for successive matching requests.
    pub responses: Vec<String>,
}

/// Canned-response file: `{"format_version":"1","rules":[...]}`.
#[derive(Debug, Deserialize)]
pub struct MockRulesFile {
    pub format_version: String,
    pub rules: Vec<MockRule>,
}

struct RuleState {
    rule: MockRule,
    hits: AtomicUsize,
}

pub struct MockLlmServer {
    endpoint: String,
    requests: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    local_addr: std::net::SocketAddr,
    handle: Option<JoinHandle<()>>,
}

impl MockLlmServer {
    /// Bind to an ephemeral localhost port and serve in a background thread.
    pub fn start(rules: Vec<MockRule>) -> std::io::Result<Self> {
        Self::bind("127.0.0.1:0", rules)
    }

    pub fn bind(addr: &str, rules: Vec<MockRule>) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let local_addr = listener.local_addr()?;
        let requests = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));
        let states: Arc<Vec<RuleState>> = Arc::new(
            rules
                .into_iter()
                .map(|rule| RuleState {
                    rule,
                    hits: AtomicUsize::new(0),
                })
                .collect(),
        );

        let thread_requests = Arc::clone(&requests);
        let thread_shutdown = Arc::clone(&shutdown);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if thread_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                thread_requests.fetch_add(1, Ordering::SeqCst);
                let _ = handle_connection(stream, &states);
            }
        });

        Ok(Self {
            endpoint: format!("http://{local_addr}/v1/chat/completions"),
            requests,
            shutdown,
            local_addr,
            handle: Some(handle),
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Serve until the process ends (used by the CLI subcommand).
    pub fn join(mut self) {
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for MockLlmServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.local_addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(stream: TcpStream, states: &[RuleState]) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream);
    let mut content_length = 0usize;
    let mut line = String::new();
    // Request line + headers.
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            break;
        }
        if let Some(value) = trimmed
            .to_ascii_lowercase()
            .strip_prefix("content-length:")
            .map(str::trim)
            .and_then(|v| v.parse::<usize>().ok())
        {
            content_length = value;
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let body = String::from_utf8_lossy(&body);

    let matched = states.iter().find(|s| {
        s.rule.match_substring.is_empty() || body.contains(&s.rule.match_substring)
    });
    let (status, payload) = match matched {
        Some(state) => {
            let hit = state.hits.fetch_add(1, Ordering::SeqCst);
            let content = state
                .rule
                .responses
                .get(hit)
                .or_else(|| state.rule.responses.last())
                .cloned()
                .unwrap_or_default();
            let payload = serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": content}}]
            });
            ("200 OK", payload.to_string())
        }
        None => (
            "404 Not Found",
            serde_json::json!({"error": "no mock rule matched"}).to_string(),
        ),
    };

    let mut stream = reader.into_inner();
    write!(
        stream,
        "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    stream.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{LlmClient, LlmClientConfig, PromptMode};
    use dialseg_core::types::{Dialogue, Utterance};

    fn dialogue(t: usize) -> Dialogue {
        Dialogue::new(
            "mock-s1".to_string(),
            (0..t)
                .map(|i| Utterance {
                    id: format!("u{i}"),
                    index: i,
                    speaker: "T".into(),
                    text: format!("turn {i} of mock-s1"),
                })
                .collect(),
        )
        .unwrap()
    }

    fn client(endpoint: &str, retries: u32) -> LlmClient {
        LlmClient::new(LlmClientConfig {
            endpoint: endpoint.to_string(),
            max_retries: retries,
            ..LlmClientConfig::default()
        })
    }

    #[test]
    fn happy_path_returns_parsed_boundaries() {
        let server = MockLlmServer::start(vec![MockRule {
            match_substring: String::new(),
            responses: vec![r#"{"boundary_indices":[2,5,9]}"#.to_string()],
        }])
        .unwrap();
        let client = client(server.endpoint(), 0);
        let seg = client
            .segment(&dialogue(10), PromptMode::Generic, None)
            .unwrap();
        assert_eq!(seg.boundaries.indices(), &[2, 5]);
        assert!(seg.method.contains("attempts=1"));
        assert_eq!(server.request_count(), 1);
    }

    #[test]
    fn garbage_then_valid_succeeds_on_third_attempt() {
        let server = MockLlmServer::start(vec![MockRule {
            match_substring: String::new(),
            responses: vec![
                "no json here".to_string(),
                "{\"wrong\": true}".to_string(),
                r#"{"boundary_indices":[3,9]}"#.to_string(),
            ],
        }])
        .unwrap();
        let client = client(server.endpoint(), 3);
        let seg = client
            .segment(&dialogue(10), PromptMode::Generic, None)
            .unwrap();
        assert_eq!(seg.boundaries.indices(), &[3]);
        assert!(seg.method.contains("attempts=3"), "{}", seg.method);
        let audit = client.audit_records();
        assert_eq!(audit.len(), 3);
        assert!(audit[0].outcome.starts_with("parse-error"));
        assert_eq!(audit[2].outcome, "ok");
        // Identical prompt across retries.
        assert_eq!(audit[0].prompt_digest, audit[2].prompt_digest);
    }

    #[test]
    fn exhausted_retries_fail_the_session() {
        let server = MockLlmServer::start(vec![MockRule {
            match_substring: String::new(),
            responses: vec!["still not json".to_string()],
        }])
        .unwrap();
        let client = client(server.endpoint(), 2);
        let err = client
            .segment(&dialogue(6), PromptMode::Generic, None)
            .unwrap_err();
        match err {
            crate::llm::LlmError::SegmentationFailed {
                session_id,
                attempts,
                ..
            } => {
                assert_eq!(session_id, "mock-s1");
                assert_eq!(attempts, 3);
            }
            other => panic!("unexpected error: {other}"),
        }
        assert_eq!(server.request_count(), 3);
    }

    #[test]
    fn rules_route_by_body_substring() {
        let server = MockLlmServer::start(vec![
            MockRule {
                match_substring: "turn 0 of mock-s1".to_string(),
                responses: vec![r#"{"boundary_indices":[1,5]}"#.to_string()],
            },
            MockRule {
                match_substring: String::new(),
                responses: vec![r#"{"boundary_indices":[5]}"#.to_string()],
            },
        ])
        .unwrap();
        let client = client(server.endpoint(), 0);
        let seg = client
            .segment(&dialogue(6), PromptMode::Generic, None)
            .unwrap();
        assert_eq!(seg.boundaries.indices(), &[1]);
    }

    #[test]
    fn annotation_round_trip_through_mock() {
        use dialseg_core::types::{Codebook, Move};
        let codebook = Codebook::new(
            "cb".to_string(),
            vec![Move {
                name: "Restating".into(),
                definition: String::new(),
                examples: vec![],
            }],
            true,
        )
        .unwrap();
        let server = MockLlmServer::start(vec![MockRule {
            match_substring: String::new(),
            responses: vec![
                r#"{"records":[{"id":"u0","move":"Restating"},{"id":"u1","move":null}]}"#
                    .to_string(),
            ],
        }])
        .unwrap();
        let client = client(server.endpoint(), 0);
        let labels = client.annotate(&dialogue(2), &codebook, "ai").unwrap();
        assert_eq!(labels.get(0), Some("Restating"));
        assert_eq!(labels.len(), 1);
    }
}
