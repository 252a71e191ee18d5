//! Application configuration (TOML). String values may reference
//! environment variables as `${NAME}`; relative paths are resolved against
//! the directory of the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::backend::{BackendConfig, PromptMode};
use crate::error::{Error, Result};
use crate::pipeline::OverallMode;
use crate::segmenter::SegmenterConfig;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    pub mode: PromptMode,
    /// Template files; the built-in templates are used when absent.
    pub finetune: Option<PathBuf>,
    pub fewshot: Option<PathBuf>,
    /// Number of few-shot examples.
    pub shots: usize,
    /// Corpus the few-shot examples are drawn from (its `F` split).
    pub shot_corpus: Option<PathBuf>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            mode: PromptMode::FinetuneInfer,
            finetune: None,
            fewshot: None,
            shots: 5,
            shot_corpus: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub segmenter: SegmenterConfig,
    /// Keyword table for the scarce concepts; built-in when absent.
    pub keywords: Option<PathBuf>,
    pub backend: BackendConfig,
    pub prompts: PromptConfig,
    /// Rule table of the mock backend; built-in when absent.
    pub mock_rules: Option<PathBuf>,
    pub runs: usize,
    pub overall_mode: OverallMode,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Largest number of corpus records sent to the backend together.
    pub block_size: usize,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            segmenter: SegmenterConfig::default(),
            keywords: None,
            backend: BackendConfig::default(),
            prompts: PromptConfig::default(),
            mock_rules: None,
            runs: 20,
            overall_mode: OverallMode::Derived,
            output_dir: PathBuf::from("out"),
            seed: 0,
            block_size: 8,
        }
    }
}

/// Replaces `${NAME}` with the value of environment variable `NAME`.
pub fn interpolate(text: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| Error::validation(format!("unterminated `${{` in {text:?}")))?;
        let name = &after[..end];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::validation(format!("bad variable name {name:?}")));
        }
        let value = lookup(name)
            .ok_or_else(|| Error::validation(format!("environment variable `{name}` is not set")))?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn interpolate_value(v: &mut toml::Value, lookup: &dyn Fn(&str) -> Option<String>) -> Result<()> {
    match v {
        toml::Value::String(s) => *s = interpolate(s, lookup)?,
        toml::Value::Array(items) => {
            for item in items {
                interpolate_value(item, lookup)?;
            }
        }
        toml::Value::Table(t) => {
            for (_, item) in t.iter_mut() {
                interpolate_value(item, lookup)?;
            }
        }
        _ => {}
    }
    Ok(())
}

impl AppConfig {
    pub fn parse(text: &str, source: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<Self> {
        let bad = |e: &dyn std::fmt::Display| Error::validation(format!("{source}: {e}"));
        let mut table: toml::Table = toml::from_str(text).map_err(|e| bad(&e))?;
        for (_, v) in table.iter_mut() {
            interpolate_value(v, lookup)?;
        }
        let cfg: AppConfig = toml::Value::Table(table).try_into().map_err(|e| bad(&e))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Loads a config file, resolving environment references from the
    /// process environment and relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, &path.display().to_string(), &|k| std::env::var(k).ok())?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            self.segmenter.abbreviations.as_mut(),
            self.keywords.as_mut(),
            self.mock_rules.as_mut(),
            self.prompts.finetune.as_mut(),
            self.prompts.fewshot.as_mut(),
            self.prompts.shot_corpus.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    fn check(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::validation("runs must be at least 1"));
        }
        if self.block_size == 0 {
            return Err(Error::validation("block_size must be at least 1"));
        }
        if self.prompts.shots == 0 {
            return Err(Error::validation("prompts.shots must be at least 1"));
        }
        self.backend.validate()
    }

    /// Checks invariants and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        self.check()?;
        for p in [
            self.segmenter.abbreviations.as_ref(),
            self.keywords.as_ref(),
            self.mock_rules.as_ref(),
            self.prompts.finetune.as_ref(),
            self.prompts.fewshot.as_ref(),
            self.prompts.shot_corpus.as_ref(),
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                return Err(Error::validation(format!("configured file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
