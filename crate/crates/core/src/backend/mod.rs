//! Classification backends: prompt construction, the labelled-sentence
//! output grammar, a chat-completion HTTP client and a rule-based mock.

mod http;
mod mock;
mod output;
mod prompt;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use http::HttpBackend;
pub use mock::MockBackend;
pub use output::{format_record, parse_model_output, OutputRecord};
pub use prompt::{
    build_fewshot_prompt, build_finetune_record, render_assistant, AnnotatedSentence, PromptMode,
    PromptTemplate, Shot, INFER_TRIGGER, PARAGRAPH_PLACEHOLDER,
};

use crate::error::{Error, Result};
use crate::segmenter::Provision;
use crate::taxonomy::{Concept, LabelSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    /// Wait before retry number `retry` (1-based): doubles each time, capped.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_parallel: usize,
    pub retry: RetryPolicy,
    pub timeout_secs: u64,
    /// Environment variable holding the bearer token, if any.
    pub api_key_env: String,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            temperature: 0.2,
            max_parallel: 4,
            retry: RetryPolicy::default(),
            timeout_secs: 120,
            api_key_env: "PROVCLASS_API_KEY".into(),
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::validation(format!(
                "temperature must be in [0, 2], got {}",
                self.temperature
            )));
        }
        if self.max_parallel == 0 {
            return Err(Error::validation("max_parallel must be at least 1"));
        }
        if self.retry.max_attempts == 0 {
            return Err(Error::validation("retry.max_attempts must be at least 1"));
        }
        if self.endpoint.trim().is_empty() {
            return Err(Error::validation("backend endpoint is empty"));
        }
        Ok(())
    }
}

/// A chat model. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    /// Identity recorded with run results.
    fn id(&self) -> String;

    /// Returns the assistant reply to `messages`.
    fn complete(&self, messages: &[ChatMessage]) -> Result<String>;

    /// Upper bound on concurrent `complete` calls.
    fn max_parallel(&self) -> usize {
        1
    }
}

/// Text sent for a group of provisions: one provision per line.
pub fn paragraph_text(provisions: &[Provision]) -> String {
    provisions
        .iter()
        .map(|p| p.text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParagraphLabels {
    /// One entry per provision, in input order. Labels are as returned by
    /// the model, without closure.
    pub labels: Vec<(String, LabelSet)>,
    pub raw: String,
    pub warnings: Vec<String>,
    /// Label names outside the registry that were dropped.
    pub unknown_labels: usize,
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Matches returned records to provisions: exact text first, then
/// whitespace-normalised text (also against the text without list prefix),
/// then the remaining records in order.
fn align(provisions: &[Provision], records: &[OutputRecord]) -> (Vec<Option<usize>>, Vec<String>) {
    let mut assigned: Vec<Option<usize>> = vec![None; provisions.len()];
    let mut used = vec![false; records.len()];

    for (pi, p) in provisions.iter().enumerate() {
        if let Some(ri) = (0..records.len()).find(|&ri| !used[ri] && records[ri].sentence == p.text) {
            used[ri] = true;
            assigned[pi] = Some(ri);
        }
    }
    for (pi, p) in provisions.iter().enumerate() {
        if assigned[pi].is_some() {
            continue;
        }
        let text = normalize_ws(&p.text);
        let body = normalize_ws(p.body());
        if let Some(ri) = (0..records.len()).find(|&ri| {
            let s = normalize_ws(&records[ri].sentence);
            !used[ri] && (s == text || s == body)
        }) {
            used[ri] = true;
            assigned[pi] = Some(ri);
        }
    }
    let mut warnings = Vec::new();
    let mut spare = (0..records.len()).filter(|&ri| !used[ri]);
    for (pi, p) in provisions.iter().enumerate() {
        if assigned[pi].is_some() {
            continue;
        }
        match spare.next() {
            Some(ri) => {
                warnings.push(format!(
                    "{}: matched by position to returned sentence {:?}",
                    p.provision_id, records[ri].sentence
                ));
                assigned[pi] = Some(ri);
            }
            None => warnings.push(format!("{}: no sentence returned; labelled empty", p.provision_id)),
        }
    }
    let extra = spare.count();
    if extra > 0 {
        warnings.push(format!("{extra} returned sentence(s) did not match any provision"));
    }
    (assigned, warnings)
}

/// Classifies the provisions of one paragraph with a single backend call.
pub fn classify_paragraph(
    backend: &dyn Backend,
    tpl: &PromptTemplate,
    provisions: &[Provision],
) -> Result<ParagraphLabels> {
    if provisions.is_empty() {
        return Ok(ParagraphLabels {
            labels: Vec::new(),
            raw: String::new(),
            warnings: Vec::new(),
            unknown_labels: 0,
        });
    }
    let messages = tpl.messages(&paragraph_text(provisions))?;
    let raw = backend.complete(&messages)?;
    let records = parse_model_output(&raw)?;
    let (assigned, mut warnings) = align(provisions, &records);

    let mut unknown_labels = 0;
    let labels = provisions
        .iter()
        .zip(&assigned)
        .map(|(p, slot)| {
            let mut set = LabelSet::EMPTY;
            if let Some(ri) = slot {
                for name in &records[*ri].labels {
                    match Concept::lookup(name) {
                        Some(c) => {
                            set.insert(c);
                        }
                        None => {
                            unknown_labels += 1;
                            warnings.push(format!("{}: dropped unknown label {name:?}", p.provision_id));
                        }
                    }
                }
            }
            (p.provision_id.clone(), set)
        })
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ParagraphLabels {
        labels,
        raw,
        warnings,
        unknown_labels,
    })
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}
