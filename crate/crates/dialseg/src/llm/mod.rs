//! Chat-completion client with retries, audit records, and strict response
//! parsing.
//!
//! The wire format is the minimal chat shape: a JSON body with `model`,
//! `messages`, `temperature`, and `max_tokens`, answered by choices whose
//! first message content is read. Credentials come only from the environment
//! variable named in the config, never from flags or config values.

pub mod mock;
pub mod parse;
pub mod prompt;

pub use parse::{parse_annotation_response, parse_boundary_response, ResponseParseError};
pub use prompt::{build_annotation_prompt, build_segmentation_prompt, PromptMode, PromptSpec};

use std::sync::Mutex;
use std::time::Duration;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use dialseg_core::boundary::Segmentation;
use dialseg_core::fingerprint::fingerprint;
use dialseg_core::types::{Codebook, Dialogue, RaterLabels};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("generic mode takes no codebook")]
    CodebookNotAllowed,
    #[error("{mode} mode requires a codebook")]
    CodebookRequired { mode: &'static str },
    #[error("expected a {expected} prompt, got {found}")]
    WrongPromptMode {
        expected: &'static str,
        found: &'static str,
    },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("response carried no choices with message content")]
    EmptyChoices { raw: String },
    #[error(transparent)]
    Parse(#[from] ResponseParseError),
    #[error("session `{session_id}`: all {attempts} attempt(s) failed; last error: {last_error}")]
    SegmentationFailed {
        session_id: String,
        attempts: u32,
        last_error: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmClientConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
    /// Retries after the first attempt; total attempts are `max_retries + 1`.
    pub max_retries: u32,
    /// Upper bound on sessions in flight at once (applied by the caller).
    pub concurrency: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    /// Require bare-object responses instead of tolerant extraction.
    pub strict_parse: bool,
    /// Show speaker tags in the turn listing (ablation flag).
    pub include_speakers: bool,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:3928/v1/chat/completions".to_string(),
            model: "default-model".to_string(),
            timeout: Duration::from_secs(60),
            max_retries: 2,
            concurrency: 4,
            temperature: 0.0,
            max_tokens: 4096,
            api_key_env: "DIALSEG_API_KEY".to_string(),
            strict_parse: false,
            include_speakers: false,
        }
    }
}

impl LlmClientConfig {
    pub fn canonical(&self, mode: &str) -> String {
        format!(
            "llm;mode={mode};model={};temperature={:?};max_tokens={};strict={};speakers={}",
            self.model, self.temperature, self.max_tokens, self.strict_parse,
            self.include_speakers,
        )
    }
}

/// One request/response audit entry; every attempt leaves one.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRecord {
    pub session_id: String,
    pub mode: String,
    pub attempt: u32,
    pub prompt_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_digest: Option<String>,
    pub outcome: String,
}

pub struct LlmClient {
    config: LlmClientConfig,
    agent: ureq::Agent,
    audit: Mutex<Vec<AuditRecord>>,
}

impl LlmClient {
    pub fn new(config: LlmClientConfig) -> Self {
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build();
        Self {
            config,
            agent: agent_config.into(),
            audit: Mutex::new(Vec::new()),
        }
    }

    pub fn config(&self) -> &LlmClientConfig {
        &self.config
    }

    /// Snapshot of every interaction so far, in request order.
    pub fn audit_records(&self) -> Vec<AuditRecord> {
        self.audit.lock().expect("audit lock").clone()
    }

    fn record(&self, entry: AuditRecord) {
        self.audit.lock().expect("audit lock").push(entry);
    }

    /// One completion call: build the chat body, post it, read the first
    /// choice's message content.
    fn complete(&self, spec: &PromptSpec) -> Result<String, LlmError> {
        let body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": spec.system},
                {"role": "user", "content": spec.user},
            ],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        });
        let mut request = self.agent.post(&self.config.endpoint);
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            if !key.is_empty() {
                request = request.header("authorization", format!("Bearer {key}"));
            }
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Transport(format!("HTTP {status}: {text}")));
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| LlmError::Transport(e.to_string()))?;
        value
            .get("choices")
            .and_then(|c| c.get(0))
            .and_then(|c| c.get("message"))
            .and_then(|m| m.get("content"))
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or(LlmError::EmptyChoices { raw: text })
    }

    /// Retry loop shared by segmentation and annotation: the identical prompt
    /// is re-sent so failures are attributable to the model, not the harness.
    fn with_retries<T>(
        &self,
        session_id: &str,
        spec: &PromptSpec,
        parse: impl Fn(&str) -> Result<T, LlmError>,
    ) -> Result<(T, u32, String), LlmError> {
        let attempts = self.config.max_retries.saturating_add(1);
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            let mut entry = AuditRecord {
                session_id: session_id.to_string(),
                mode: spec.mode.as_str().to_string(),
                attempt,
                prompt_digest: spec.digest(),
                response_digest: None,
                outcome: String::new(),
            };
            match self.complete(spec) {
                Err(e) => {
                    entry.outcome = format!("transport-error: {e}");
                    last_error = e.to_string();
                    self.record(entry);
                }
                Ok(content) => {
                    let digest = fingerprint(&content);
                    entry.response_digest = Some(digest.clone());
                    match parse(&content) {
                        Ok(value) => {
                            entry.outcome = "ok".to_string();
                            self.record(entry);
                            return Ok((value, attempt, digest));
                        }
                        Err(e) => {
                            entry.outcome = format!("parse-error: {e}");
                            last_error = e.to_string();
                            self.record(entry);
                        }
                    }
                }
            }
        }
        Err(LlmError::SegmentationFailed {
            session_id: session_id.to_string(),
            attempts,
            last_error,
        })
    }

    /// Segment one dialogue. The method descriptor records the model, the
    /// attempt count, and the hash of the accepted raw response.
    pub fn segment(
        &self,
        dialogue: &Dialogue,
        mode: PromptMode,
        codebook: Option<&Codebook>,
    ) -> Result<Segmentation, LlmError> {
        let spec = build_segmentation_prompt(
            dialogue,
            mode,
            codebook,
            self.config.include_speakers,
        )?;
        let t = dialogue.len();
        let strict = self.config.strict_parse;
        let (boundaries, attempts, response_digest) =
            self.with_retries(dialogue.session_id(), &spec, |content| {
                parse_boundary_response(content, t, strict).map_err(LlmError::from)
            })?;
        let method_name = match mode {
            PromptMode::Generic => "llm-generic",
            PromptMode::DaAware => "llm-da",
            PromptMode::Annotate => unreachable!("segmentation prompt"),
        };
        Ok(Segmentation {
            session_id: dialogue.session_id().to_string(),
            boundaries,
            method: format!(
                "{method_name}[model={},attempts={attempts},response={response_digest}]",
                self.config.model
            ),
            params_fingerprint: fingerprint(&self.config.canonical(method_name)),
        })
    }

    /// Annotate one dialogue with per-utterance moves under `rater_id`.
    pub fn annotate(
        &self,
        dialogue: &Dialogue,
        codebook: &Codebook,
        rater_id: &str,
    ) -> Result<RaterLabels, LlmError> {
        let spec = build_annotation_prompt(dialogue, codebook, self.config.include_speakers)?;
        let strict = self.config.strict_parse;
        let (labels, _, _) = self.with_retries(dialogue.session_id(), &spec, |content| {
            parse_annotation_response(content, dialogue, codebook, rater_id, strict)
                .map_err(LlmError::from)
        })?;
        Ok(labels)
    }
}
