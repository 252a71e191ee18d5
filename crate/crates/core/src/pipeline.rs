//! Segment, classify with a backend and the keyword table, merge, and repeat
//! over runs.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{classify_paragraph, AnnotatedSentence, Backend, ParagraphLabels, PromptTemplate, Shot};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::evalstat::RunMetrics;
use crate::keywords::{classify_keywords, KeywordTable};
use crate::segmenter::Provision;
use crate::taxonomy::{Concept, LabelSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Llm,
    Keyword,
    Both,
}

impl Origin {
    fn merge(self, other: Origin) -> Origin {
        if self == other {
            self
        } else {
            Origin::Both
        }
    }
}

/// How the `Overall` label is produced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverallMode {
    /// Only from closure; a backend-predicted `Overall` is ignored.
    #[default]
    Derived,
    /// A backend-predicted `Overall` is kept even with no other concept.
    Independent,
}

impl std::str::FromStr for OverallMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "derived" => Ok(OverallMode::Derived),
            "independent" => Ok(OverallMode::Independent),
            other => Err(Error::validation(format!("unknown overall mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedProvision {
    pub provision: Provision,
    pub predicted: LabelSet,
    pub sources: BTreeMap<Concept, Origin>,
    pub llm: LabelSet,
    pub keyword: LabelSet,
    pub gold: Option<LabelSet>,
    /// Set when the backend call for this provision's paragraph failed.
    pub failure: Option<String>,
}

/// Merges backend and keyword labels, closes the result and records where
/// each concept came from. Concepts added by closure inherit the origins of
/// the concepts that implied them.
pub fn merge_labels(llm: LabelSet, keyword: LabelSet, mode: OverallMode) -> (LabelSet, BTreeMap<Concept, Origin>) {
    let mut llm = llm;
    if mode == OverallMode::Derived {
        llm.remove(Concept::Overall);
    }
    let union = llm.union(keyword);
    let predicted = match mode {
        OverallMode::Derived => union.closed(),
        OverallMode::Independent => union.closed_keep_overall(),
    };
    let mut sources: BTreeMap<Concept, Origin> = BTreeMap::new();
    let mut note = |c: Concept, o: Origin| {
        sources.entry(c).and_modify(|e| *e = e.merge(o)).or_insert(o);
    };
    for (set, origin) in [(llm, Origin::Llm), (keyword, Origin::Keyword)] {
        for c in set.iter() {
            note(c, origin);
            if let Some(p) = c.parent() {
                note(p, origin);
            }
            if c != Concept::Overall {
                note(Concept::Overall, origin);
            }
        }
    }
    sources.retain(|c, _| predicted.contains(*c));
    (predicted, sources)
}

/// Consecutive provisions sharing a document and block.
pub fn paragraphs(provisions: &[Provision]) -> Vec<&[Provision]> {
    provisions
        .chunk_by(|a, b| a.doc_id == b.doc_id && a.block == b.block)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Prediction {
    pub annotations: Vec<AnnotatedProvision>,
    pub warnings: Vec<String>,
    pub unknown_labels: usize,
    pub failed_paragraphs: usize,
    /// Raw backend responses per paragraph, in paragraph order.
    pub raw_responses: Vec<String>,
}

/// Classifies every provision. Paragraphs go to the backend concurrently up
/// to its parallelism bound; a failed paragraph marks its provisions and the
/// rest continue.
pub fn predict(
    provisions: &[Provision],
    backend: &dyn Backend,
    tpl: &PromptTemplate,
    keywords: &KeywordTable,
    mode: OverallMode,
    gold: Option<&BTreeMap<String, LabelSet>>,
) -> Result<Prediction> {
    tpl.validate()?;
    let groups = paragraphs(provisions);
    let results: Vec<Mutex<Option<Result<ParagraphLabels>>>> =
        groups.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = backend.max_parallel().max(1).min(groups.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(group) = groups.get(i) else { break };
                let r = classify_paragraph(backend, tpl, group);
                *results[i].lock().expect("result slot") = Some(r);
            });
        }
    });

    let mut out = Prediction::default();
    for (group, slot) in groups.iter().zip(results) {
        let result = slot.into_inner().expect("result slot").expect("every paragraph is processed");
        let (llm_sets, failure) = match result {
            Ok(p) => {
                out.warnings.extend(p.warnings);
                out.unknown_labels += p.unknown_labels;
                out.raw_responses.push(p.raw);
                (p.labels.into_iter().map(|(_, l)| l).collect::<Vec<_>>(), None)
            }
            Err(e) => {
                out.failed_paragraphs += 1;
                let msg = e.to_string();
                log::warn!("paragraph {}: {msg}", group[0].provision_id);
                if let Error::ModelOutput { raw, .. } = &e {
                    out.raw_responses.push(raw.clone());
                } else {
                    out.raw_responses.push(String::new());
                }
                (vec![LabelSet::EMPTY; group.len()], Some(msg))
            }
        };
        for (p, llm) in group.iter().zip(llm_sets) {
            let keyword = classify_keywords(&p.text, keywords);
            let (predicted, sources) = merge_labels(llm, keyword, mode);
            out.annotations.push(AnnotatedProvision {
                provision: p.clone(),
                predicted,
                sources,
                llm,
                keyword,
                gold: gold.and_then(|g| g.get(&p.provision_id).copied()),
                failure: failure.clone(),
            });
        }
    }
    Ok(out)
}

/// One line of the annotations file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub provision_id: String,
    pub doc_id: String,
    pub text: String,
    pub predicted: LabelSet,
    pub sources: BTreeMap<Concept, Origin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<LabelSet>,
    pub run_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_index: usize,
    pub backend: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
    pub annotations: Vec<AnnotatedProvision>,
    pub warnings: Vec<String>,
    pub failed_paragraphs: usize,
}

impl RunResult {
    pub fn rows(&self) -> Vec<AnnotationRow> {
        self.annotations
            .iter()
            .map(|a| AnnotationRow {
                provision_id: a.provision.provision_id.clone(),
                doc_id: a.provision.doc_id.clone(),
                text: a.provision.text.clone(),
                predicted: a.predicted,
                sources: a.sources.clone(),
                gold: a.gold,
                run_index: self.run_index,
                failed: a.failure.clone(),
            })
            .collect()
    }

    pub fn metrics(&self) -> Result<RunMetrics> {
        metrics_from_rows(&self.rows())
    }
}

pub fn timestamp_now() -> u64 {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse::<u64>().ok())
    {
        return epoch;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub runs: usize,
    pub mode: OverallMode,
    /// Execute runs concurrently instead of one after another.
    pub parallel_runs: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            runs: 20,
            mode: OverallMode::Derived,
            parallel_runs: false,
        }
    }
}

/// Repeats `predict` `opts.runs` times. Runs are independent: a run whose
/// setup fails returns its own error.
pub fn run_many(
    provisions: &[Provision],
    backend: &dyn Backend,
    tpl: &PromptTemplate,
    keywords: &KeywordTable,
    gold: Option<&BTreeMap<String, LabelSet>>,
    opts: RunOptions,
) -> Result<Vec<Result<RunResult>>> {
    if opts.runs == 0 {
        return Err(Error::validation("run count must be at least 1"));
    }
    tpl.validate()?;
    let one = |run_index: usize| -> Result<RunResult> {
        log::info!("run {}/{}", run_index + 1, opts.runs);
        let p = predict(provisions, backend, tpl, keywords, opts.mode, gold)?;
        Ok(RunResult {
            run_index,
            backend: backend.id(),
            timestamp: timestamp_now(),
            annotations: p.annotations,
            warnings: p.warnings,
            failed_paragraphs: p.failed_paragraphs,
        })
    };
    if opts.parallel_runs {
        Ok(std::thread::scope(|s| {
            let handles: Vec<_> = (0..opts.runs).map(|i| s.spawn(move || one(i))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("run thread panicked"))
                .collect()
        }))
    } else {
        Ok((0..opts.runs).map(one).collect())
    }
}

/// Picks `k` few-shot examples from the corpus: paragraphs with at least
/// one labelled sentence when available, chosen with a seeded shuffle and
/// kept in corpus order. `Overall` is omitted from the shown labels.
pub fn select_shots(corpus: &Corpus, k: usize, block_size: usize, seed: u64) -> Result<Vec<Shot>> {
    if k == 0 {
        return Err(Error::validation("shot count must be at least 1"));
    }
    let gold = corpus.gold_map();
    let provisions = corpus.provisions(block_size);
    let groups = paragraphs(&provisions);
    let labelled: Vec<usize> = (0..groups.len())
        .filter(|&i| groups[i].iter().any(|p| !gold[&p.provision_id].is_empty()))
        .collect();
    let mut pool = if labelled.len() >= k {
        labelled
    } else {
        (0..groups.len()).collect()
    };
    if pool.len() < k {
        return Err(Error::validation(format!(
            "corpus has {} paragraphs, fewer than the {k} shots requested",
            pool.len()
        )));
    }
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen = pool[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen
        .into_iter()
        .map(|i| {
            let group = groups[i];
            let mut annotated = Vec::with_capacity(group.len());
            for p in group {
                let mut labels = gold[&p.provision_id];
                labels.remove(Concept::Overall);
                annotated.push(AnnotatedSentence::new(p.text.clone(), labels));
            }
            Shot {
                paragraph: crate::backend::paragraph_text(group),
                annotated,
            }
        })
        .collect())
}

pub fn write_rows(path: &Path, rows: &[AnnotationRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows(path: &Path) -> Result<Vec<AnnotationRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
            raw: line.clone(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Metrics over rows that have gold labels and did not fail.
pub fn metrics_from_rows(rows: &[AnnotationRow]) -> Result<RunMetrics> {
    let pairs: Vec<(LabelSet, LabelSet)> = rows
        .iter()
        .filter(|r| r.failed.is_none())
        .filter_map(|r| r.gold.map(|g| (r.predicted, g)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::validation("no rows with gold labels to evaluate"));
    }
    Ok(RunMetrics::from_pairs(pairs.iter().map(|(p, g)| (p, g))))
}
