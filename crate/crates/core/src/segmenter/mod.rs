//! Splits regulation text into provisions.
//!
//! A body is cut into blocks at blank lines. Within a block, enumerated
//! list items are detected and each item becomes its own provision,
//! prefixed by the list header (and, for nested lists, by every enclosing
//! item's header, outermost first). Remaining text is split into sentences.
//! Whitespace inside a provision is collapsed to single spaces.

mod markers;
mod sentences;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use markers::MarkerToggles;
pub use sentences::{split_sentences, Abbreviations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Jurisdiction {
    CA,
    US,
}

impl fmt::Display for Jurisdiction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Jurisdiction::CA => "CA",
            Jurisdiction::US => "US",
        })
    }
}

impl FromStr for Jurisdiction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CA" => Ok(Jurisdiction::CA),
            "US" => Ok(Jurisdiction::US),
            other => Err(Error::validation(format!(
                "jurisdiction must be CA or US, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDocument {
    pub doc_id: String,
    pub jurisdiction: Jurisdiction,
    pub title: String,
    pub body: String,
}

/// One classification unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provision {
    pub provision_id: String,
    pub doc_id: String,
    /// Ordinal within the document, contiguous from 0.
    pub index: usize,
    /// Ordinal of the source block (blank-line separated paragraph).
    pub block: usize,
    pub text: String,
    pub prefix_applied: bool,
    /// Header fragments prepended to the item text, outermost first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prefix: Vec<String>,
}

impl Provision {
    pub fn make_id(doc_id: &str, index: usize) -> String {
        format!("{doc_id}#{index:04}")
    }

    /// Text with the list-item prefix removed.
    pub fn body(&self) -> &str {
        if self.prefix.is_empty() {
            return &self.text;
        }
        let skip: usize = self.prefix.iter().map(|p| p.len() + 1).sum();
        self.text.get(skip..).unwrap_or(&self.text)
    }
}

/// How a list item's trailing `;` / `,` (and conjunction) is rendered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemTerminator {
    /// Keep the source punctuation verbatim.
    #[default]
    Preserve,
    /// Replace a trailing `;`/`,` (with any "and"/"or") by a period.
    Period,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    /// Replaces the built-in abbreviation list.
    pub abbreviations: Option<PathBuf>,
    pub markers: MarkerToggles,
    pub item_terminator: ItemTerminator,
}

/// Detected list item: marker, own text (whitespace-collapsed) and nesting depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListItem {
    pub marker: String,
    pub text: String,
    pub depth: usize,
}

/// Detects list items with every marker family enabled.
pub fn detect_list_items(block: &str) -> Vec<ListItem> {
    detect_with(block, &MarkerToggles::default())
}

fn detect_with(block: &str, toggles: &MarkerToggles) -> Vec<ListItem> {
    let found = markers::find_markers(block, toggles);
    found
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let end = found.get(i + 1).map_or(block.len(), |next| next.start);
            ListItem {
                marker: m.text.clone(),
                text: collapse_ws(&block[m.content_start.min(end)..end]),
                depth: m.depth,
            }
        })
        .collect()
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits a body into blocks separated by whitespace-only lines.
fn blocks(body: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for line in body.lines() {
        if line.trim().is_empty() {
            if !current.trim().is_empty() {
                out.push(std::mem::take(&mut current));
            }
            current.clear();
        } else {
            current.push_str(line);
            current.push('\n');
        }
    }
    if !current.trim().is_empty() {
        out.push(current);
    }
    out
}

fn strip_item_terminator(text: &str) -> String {
    let mut t = text.trim_end();
    for conj in [" and", " or"] {
        if let Some(head) = t.strip_suffix(conj) {
            if head.trim_end().ends_with([';', ',']) {
                t = head.trim_end();
                break;
            }
        }
    }
    match t.strip_suffix([';', ',']) {
        Some(head) => format!("{}.", head.trim_end()),
        None => t.to_string(),
    }
}

struct Unit {
    prefix: Vec<String>,
    text: String,
}

/// A configured, reusable segmenter.
#[derive(Debug, Clone)]
pub struct Segmenter {
    abbreviations: Abbreviations,
    toggles: MarkerToggles,
    terminator: ItemTerminator,
}

impl Default for Segmenter {
    fn default() -> Self {
        Self {
            abbreviations: Abbreviations::default(),
            toggles: MarkerToggles::default(),
            terminator: ItemTerminator::Preserve,
        }
    }
}

impl Segmenter {
    pub fn new(cfg: &SegmenterConfig) -> Result<Self> {
        let abbreviations = match &cfg.abbreviations {
            Some(path) => Abbreviations::load(path)?,
            None => Abbreviations::default(),
        };
        Ok(Self {
            abbreviations,
            toggles: cfg.markers,
            terminator: cfg.item_terminator,
        })
    }

    pub fn with_abbreviations(mut self, abbreviations: Abbreviations) -> Self {
        self.abbreviations = abbreviations;
        self
    }

    pub fn segment(&self, doc: &SourceDocument) -> Result<Vec<Provision>> {
        if doc.body.trim().is_empty() {
            return Err(Error::validation(format!(
                "document `{}` has an empty body",
                doc.doc_id
            )));
        }
        let mut out = Vec::new();
        for (block_idx, block) in blocks(&doc.body).iter().enumerate() {
            for unit in self.segment_block(block) {
                let index = out.len();
                let text = if unit.prefix.is_empty() {
                    unit.text
                } else {
                    format!("{} {}", unit.prefix.join(" "), unit.text)
                };
                out.push(Provision {
                    provision_id: Provision::make_id(&doc.doc_id, index),
                    doc_id: doc.doc_id.clone(),
                    index,
                    block: block_idx,
                    text,
                    prefix_applied: !unit.prefix.is_empty(),
                    prefix: unit.prefix,
                });
            }
        }
        Ok(out)
    }

    fn sentences(&self, text: &str) -> Vec<String> {
        split_sentences(text, &self.abbreviations)
            .into_iter()
            .map(collapse_ws)
            .collect()
    }

    /// Emits the sentences of `text`; the first carries `prefix`. Unless
    /// `keep_last` is set, every sentence is emitted; otherwise the last one
    /// is returned as the next header fragment.
    fn emit_run(
        &self,
        text: &str,
        prefix: &[String],
        keep_last: bool,
        leaf: bool,
        out: &mut Vec<Unit>,
    ) -> Option<String> {
        let mut sents = self.sentences(text);
        let header = if keep_last { sents.pop() } else { None };
        let count = sents.len();
        for (i, s) in sents.into_iter().enumerate() {
            let text = if leaf && i + 1 == count && self.terminator == ItemTerminator::Period {
                strip_item_terminator(&s)
            } else {
                s
            };
            let prefix = if i == 0 { prefix.to_vec() } else { Vec::new() };
            out.push(Unit { prefix, text });
        }
        header
    }

    fn segment_block(&self, block: &str) -> Vec<Unit> {
        let found = markers::find_markers(block, &self.toggles);
        let mut out = Vec::new();
        if found.is_empty() {
            self.emit_run(block, &[], false, false, &mut out);
            return out;
        }

        let header = self.emit_run(&block[..found[0].start], &[], true, false, &mut out);
        let base: Vec<String> = header.into_iter().collect();
        // Header fragment contributed by the open item at each depth.
        let mut open: Vec<Option<String>> = Vec::new();

        for (i, m) in found.iter().enumerate() {
            let end = found.get(i + 1).map_or(block.len(), |next| next.start);
            let own = &block[m.content_start.min(end)..end];
            let has_children = found.get(i + 1).is_some_and(|next| next.depth > m.depth);
            open.truncate(m.depth);
            let prefix: Vec<String> = base
                .iter()
                .cloned()
                .chain(open.iter().flatten().cloned())
                .collect();
            let fragment = self.emit_run(own, &prefix, has_children, !has_children, &mut out);
            open.resize(m.depth, None);
            open.push(fragment);
        }
        out
    }
}

/// Segments `doc` with the given configuration.
pub fn segment(doc: &SourceDocument, cfg: &SegmenterConfig) -> Result<Vec<Provision>> {
    Segmenter::new(cfg)?.segment(doc)
}
