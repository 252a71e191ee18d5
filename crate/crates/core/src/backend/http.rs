use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use super::{Backend, BackendConfig, ChatMessage};
use crate::error::{Error, Result};

/// Longest wait honoured from a `Retry-After` header.
const MAX_RETRY_AFTER: Duration = Duration::from_secs(120);

/// Client for a chat-completion endpoint taking
/// `{model, temperature, messages}` and returning the assistant message.
pub struct HttpBackend {
    cfg: BackendConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [ChatMessage],
}

enum Attempt {
    Done(String),
    Retry { reason: String, wait: Option<Duration> },
}

impl HttpBackend {
    /// Reads the API key from the configured environment variable, if set.
    pub fn new(cfg: BackendConfig) -> Result<Self> {
        let key = if cfg.api_key_env.is_empty() {
            None
        } else {
            std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty())
        };
        Self::with_api_key(cfg, key)
    }

    pub fn with_api_key(cfg: BackendConfig, api_key: Option<String>) -> Result<Self> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend {
            cfg,
            agent,
            api_key,
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    fn attempt(&self, body: &str) -> Result<Attempt> {
        let mut req = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send(body) {
            Ok(r) => r,
            Err(e) => {
                return Ok(Attempt::Retry {
                    reason: format!("transport: {e}"),
                    wait: None,
                })
            }
        };
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(|s| Duration::from_secs_f64(s).min(MAX_RETRY_AFTER));
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Backend(format!("reading response: {e}")))?;
        match status {
            200..=299 => extract_content(&text).map(Attempt::Done),
            429 | 500..=599 => Ok(Attempt::Retry {
                reason: format!("HTTP {status}"),
                wait: retry_after,
            }),
            _ => Err(Error::Backend(format!("HTTP {status}: {}", snippet(&text)))),
        }
    }
}

fn snippet(text: &str) -> String {
    text.chars().take(200).collect()
}

/// Assistant text from an OpenAI-style `choices[0].message.content`, a bare
/// `message.content`, or a top-level `content` string.
pub(crate) fn extract_content(body: &str) -> Result<String> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| Error::Backend(format!("response is not JSON ({e}): {}", snippet(body))))?;
    let candidates = [
        v.pointer("/choices/0/message/content"),
        v.pointer("/message/content"),
        v.pointer("/content"),
    ];
    let found = candidates
        .into_iter()
        .flatten()
        .find_map(|c| c.as_str().map(str::to_string));
    found.ok_or_else(|| Error::Backend(format!("no assistant content in response: {}", snippet(body))))
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}@{}", self.cfg.model, self.cfg.endpoint)
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let body = serde_json::to_string(&ChatRequest {
            model: &self.cfg.model,
            temperature: self.cfg.temperature,
            messages,
        })?;
        let attempts = self.cfg.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(&body)? {
                Attempt::Done(text) => return Ok(text),
                Attempt::Retry { reason, wait } => {
                    last = reason;
                    if attempt < attempts {
                        let delay = wait.unwrap_or_else(|| self.cfg.retry.delay(attempt));
                        log::warn!("attempt {attempt}/{attempts} failed ({last}); retrying in {delay:?}");
                        std::thread::sleep(delay);
                    }
                }
            }
        }
        Err(Error::Backend(format!("giving up after {attempts} attempts: {last}")))
    }

    fn max_parallel(&self) -> usize {
        self.cfg.max_parallel
    }
}
