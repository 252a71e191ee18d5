//! Keyword lookup for the scarce concepts.
//!
//! Phrases match case-insensitively and only on word boundaries: a match
//! must not start or end inside a longer alphanumeric token. Punctuation
//! inside a phrase is literal, so "E. coli" matches across its period.

use std::collections::BTreeMap;
use std::path::Path;

use aho_corasick::{AhoCorasick, MatchKind};

use crate::error::{Error, Result};
use crate::taxonomy::{Concept, LabelSet};

const DEFAULT_KEYWORDS: &str = include_str!("../data/keywords.tsv");

/// A validated `concept -> phrases` table with a compiled matcher.
#[derive(Debug, Clone)]
pub struct PhraseTable {
    entries: BTreeMap<Concept, Vec<String>>,
    matcher: Matcher,
}

#[derive(Debug, Clone)]
struct Matcher {
    automaton: AhoCorasick,
    /// Concept for each pattern id.
    owners: Vec<Concept>,
}

impl Matcher {
    fn build(entries: &BTreeMap<Concept, Vec<String>>) -> Self {
        let mut patterns = Vec::new();
        let mut owners = Vec::new();
        for (concept, phrases) in entries {
            for phrase in phrases {
                patterns.push(phrase.to_lowercase());
                owners.push(*concept);
            }
        }
        let automaton = AhoCorasick::builder()
            .match_kind(MatchKind::Standard)
            .build(&patterns)
            .expect("phrase automaton within default size limits");
        Self { automaton, owners }
    }

    fn classify(&self, text: &str) -> LabelSet {
        let haystack = text.to_lowercase();
        let mut found = LabelSet::new();
        for m in self.automaton.find_overlapping_iter(&haystack) {
            let owner = self.owners[m.pattern().as_usize()];
            if !found.contains(owner) && on_boundaries(&haystack, m.start(), m.end()) {
                found.insert(owner);
            }
        }
        found
    }
}

/// True when `text[start..end]` neither starts nor ends inside a longer
/// alphanumeric token.
pub fn on_boundaries(text: &str, start: usize, end: usize) -> bool {
    let inner = &text[start..end];
    let left_ok = match (text[..start].chars().next_back(), inner.chars().next()) {
        (Some(before), Some(first)) => !(before.is_alphanumeric() && first.is_alphanumeric()),
        _ => true,
    };
    let right_ok = match (inner.chars().next_back(), text[end..].chars().next()) {
        (Some(last), Some(after)) => !(last.is_alphanumeric() && after.is_alphanumeric()),
        _ => true,
    };
    left_ok && right_ok
}

/// One problem found while reading a table file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LintIssue {
    pub line: usize,
    pub message: String,
}

impl PhraseTable {
    /// Builds a table, rejecting empty or duplicate (case-insensitive) phrases
    /// and concepts refused by `allowed`.
    pub fn new(
        entries: impl IntoIterator<Item = (Concept, String)>,
        allowed: impl Fn(Concept) -> bool,
    ) -> Result<Self> {
        let mut map: BTreeMap<Concept, Vec<String>> = BTreeMap::new();
        for (concept, phrase) in entries {
            if !allowed(concept) {
                return Err(Error::validation(format!(
                    "concept `{concept}` is not allowed in this table"
                )));
            }
            let phrase = phrase.trim().to_string();
            if phrase.is_empty() {
                return Err(Error::validation(format!("empty phrase for `{concept}`")));
            }
            let list = map.entry(concept).or_default();
            if list.iter().any(|p| p.to_lowercase() == phrase.to_lowercase()) {
                return Err(Error::validation(format!(
                    "duplicate phrase `{phrase}` for `{concept}`"
                )));
            }
            list.push(phrase);
        }
        let matcher = Matcher::build(&map);
        Ok(Self {
            entries: map,
            matcher,
        })
    }

    /// Reads `concept_id <TAB> phrase` lines; `#` starts a comment line.
    /// Returns every issue found rather than stopping at the first.
    pub fn lint(
        text: &str,
        allowed: impl Fn(Concept) -> bool,
    ) -> (Vec<(Concept, String)>, Vec<LintIssue>) {
        let mut rows = Vec::new();
        let mut issues = Vec::new();
        let mut seen: BTreeMap<Concept, Vec<String>> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((id, phrase)) = raw.split_once('\t') else {
                issues.push(LintIssue {
                    line,
                    message: "expected `concept_id<TAB>phrase`".into(),
                });
                continue;
            };
            let concept = match id.trim().parse::<Concept>() {
                Ok(c) => c,
                Err(_) => {
                    issues.push(LintIssue {
                        line,
                        message: format!("unknown concept id `{}`", id.trim()),
                    });
                    continue;
                }
            };
            if !allowed(concept) {
                issues.push(LintIssue {
                    line,
                    message: format!("concept `{concept}` is not allowed in this table"),
                });
                continue;
            }
            let phrase = phrase.trim();
            if phrase.is_empty() {
                issues.push(LintIssue {
                    line,
                    message: "empty phrase".into(),
                });
                continue;
            }
            let key = phrase.to_lowercase();
            let list = seen.entry(concept).or_default();
            if list.contains(&key) {
                issues.push(LintIssue {
                    line,
                    message: format!("duplicate phrase `{phrase}` for `{concept}`"),
                });
                continue;
            }
            list.push(key);
            rows.push((concept, phrase.to_string()));
        }
        (rows, issues)
    }

    pub fn parse(text: &str, source: &str, allowed: impl Fn(Concept) -> bool + Copy) -> Result<Self> {
        let (rows, issues) = Self::lint(text, allowed);
        if let Some(first) = issues.first() {
            let raw = text.lines().nth(first.line - 1).unwrap_or_default();
            return Err(Error::Parse {
                source_name: source.to_string(),
                line: first.line,
                message: first.message.clone(),
                raw: raw.to_string(),
            });
        }
        Self::new(rows, allowed)
    }

    pub fn entries(&self) -> &BTreeMap<Concept, Vec<String>> {
        &self.entries
    }

    pub fn phrase_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    /// Concepts with at least one phrase occurring in `text`.
    pub fn classify(&self, text: &str) -> LabelSet {
        self.matcher.classify(text)
    }
}

/// Keyword table restricted to the scarce concepts.
#[derive(Debug, Clone)]
pub struct KeywordTable(PhraseTable);

fn scarce(c: Concept) -> bool {
    c.is_scarce()
}

impl KeywordTable {
    pub fn new(entries: impl IntoIterator<Item = (Concept, String)>) -> Result<Self> {
        PhraseTable::new(entries, scarce).map(KeywordTable)
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        PhraseTable::parse(text, source, scarce).map(KeywordTable)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn lint(text: &str) -> Vec<LintIssue> {
        PhraseTable::lint(text, scarce).1
    }

    /// Best-effort default table; not the canonical lists.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_KEYWORDS, "builtin keywords").expect("builtin keyword table is valid")
    }

    pub fn table(&self) -> &PhraseTable {
        &self.0
    }

    pub fn entries(&self) -> &BTreeMap<Concept, Vec<String>> {
        self.0.entries()
    }

    /// Returns a copy with one more phrase.
    pub fn with_phrase(&self, concept: Concept, phrase: &str) -> Result<Self> {
        let rows = self
            .0
            .entries()
            .iter()
            .flat_map(|(c, ps)| ps.iter().map(move |p| (*c, p.clone())))
            .chain(std::iter::once((concept, phrase.to_string())));
        Self::new(rows)
    }
}

/// Scarce concepts whose keywords occur in the provision text.
pub fn classify_keywords(text: &str, table: &KeywordTable) -> LabelSet {
    table.0.classify(text)
}
