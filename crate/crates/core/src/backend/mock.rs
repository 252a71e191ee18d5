use std::path::Path;

use super::output::{format_record, OutputRecord};
use super::{Backend, ChatMessage, Role};
use crate::error::{Error, Result};
use crate::keywords::PhraseTable;
use crate::taxonomy::Concept;

const DEFAULT_RULES: &str = include_str!("../../data/mock_rules.tsv");

fn ruled(c: Concept) -> bool {
    c != Concept::Overall
}

/// Offline stand-in for a chat model. Each non-empty line of the last user
/// message is echoed with the concepts whose rule phrases it contains.
#[derive(Debug, Clone)]
pub struct MockBackend {
    name: String,
    rules: PhraseTable,
}

impl MockBackend {
    pub fn new(name: impl Into<String>, rules: PhraseTable) -> Self {
        MockBackend {
            name: name.into(),
            rules,
        }
    }

    pub fn parse(name: impl Into<String>, text: &str, source: &str) -> Result<Self> {
        Ok(Self::new(name, PhraseTable::parse(text, source, ruled)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "rules".into());
        Self::parse(name, &text, &path.display().to_string())
    }

    pub fn builtin() -> Self {
        Self::parse("builtin", DEFAULT_RULES, "builtin mock rules").expect("builtin mock rules are valid")
    }

    pub fn rules(&self) -> &PhraseTable {
        &self.rules
    }

    pub fn respond(&self, paragraph: &str) -> String {
        paragraph
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| format_record(&OutputRecord::from_labels(l, self.rules.classify(l))))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl Backend for MockBackend {
    fn id(&self) -> String {
        format!("mock:{}", self.name)
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let user = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .ok_or_else(|| Error::Backend("no user message in request".into()))?;
        Ok(self.respond(&user.content))
    }

    fn max_parallel(&self) -> usize {
        8
    }
}
