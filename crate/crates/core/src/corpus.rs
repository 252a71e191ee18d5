//! Gold-labelled corpus: JSONL schema, loading with closure normalisation,
//! label distribution, annotation batches and annotator agreement.
//!
//! One JSON object per line:
//!
//! ```text
//! {"provision_id": "...", "doc_id": "...", "jurisdiction": "CA"|"US",
//!  "split": "F"|"T", "text": "...", "gold": ["mass", ...],
//!  "annotators": ["ann1", {"id": "ann2", "labels": ["mass"]}]}
//! ```
//!
//! `annotators` is optional. Entries are either an annotator id or an
//! object carrying that annotator's own labels.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalstat::cohen_kappa;
use crate::segmenter::{Jurisdiction, Provision};
use crate::taxonomy::{Concept, LabelSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    F,
    T,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Annotator {
    Id(String),
    Labelled { id: String, labels: LabelSet },
}

impl Annotator {
    pub fn id(&self) -> &str {
        match self {
            Annotator::Id(id) | Annotator::Labelled { id, .. } => id,
        }
    }

    pub fn labels(&self) -> Option<LabelSet> {
        match self {
            Annotator::Id(_) => None,
            Annotator::Labelled { labels, .. } => Some(*labels),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub provision_id: String,
    pub doc_id: String,
    pub jurisdiction: Jurisdiction,
    pub split: Split,
    pub text: String,
    pub gold: LabelSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotators: Option<Vec<Annotator>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAnnotator {
    Id(String),
    Labelled { id: String, labels: Vec<String> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    provision_id: String,
    doc_id: String,
    jurisdiction: Jurisdiction,
    split: Split,
    text: String,
    gold: Vec<String>,
    #[serde(default)]
    annotators: Option<Vec<RawAnnotator>>,
}

/// A record whose labels were changed by closure on load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalization {
    pub line: usize,
    pub provision_id: String,
    /// `None` for the gold labels, otherwise the annotator id.
    pub annotator: Option<String>,
    pub added: LabelSet,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub normalized: Vec<Normalization>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<CorpusRecord>,
}

fn parse_labels(ids: &[String]) -> std::result::Result<LabelSet, String> {
    ids.iter()
        .map(|id| id.parse::<Concept>().map_err(|e| e.to_string()))
        .collect()
}

impl Corpus {
    pub fn parse(text: &str, source: &str) -> Result<(Corpus, LoadReport)> {
        let mut records = Vec::new();
        let mut report = LoadReport::default();
        let mut seen = HashSet::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            if raw_line.trim().is_empty() {
                continue;
            }
            let fail = |message: String| Error::Parse {
                source_name: source.to_string(),
                line,
                message,
                raw: raw_line.to_string(),
            };
            let raw: RawRecord = serde_json::from_str(raw_line).map_err(|e| fail(e.to_string()))?;
            if raw.provision_id.trim().is_empty() {
                return Err(fail("empty provision_id".into()));
            }
            if raw.text.trim().is_empty() {
                return Err(fail("empty text".into()));
            }
            if !seen.insert(raw.provision_id.clone()) {
                return Err(fail(format!("duplicate provision_id `{}`", raw.provision_id)));
            }
            let stated = parse_labels(&raw.gold).map_err(fail)?;
            let gold = stated.closed();
            if gold != stated {
                report.normalized.push(Normalization {
                    line,
                    provision_id: raw.provision_id.clone(),
                    annotator: None,
                    added: gold.difference(stated),
                });
            }
            let annotators = match raw.annotators {
                None => None,
                Some(list) => {
                    let mut out = Vec::with_capacity(list.len());
                    for a in list {
                        out.push(match a {
                            RawAnnotator::Id(id) => Annotator::Id(id),
                            RawAnnotator::Labelled { id, labels } => {
                                let stated = parse_labels(&labels).map_err(fail)?;
                                let closed = stated.closed();
                                if closed != stated {
                                    report.normalized.push(Normalization {
                                        line,
                                        provision_id: raw.provision_id.clone(),
                                        annotator: Some(id.clone()),
                                        added: closed.difference(stated),
                                    });
                                }
                                Annotator::Labelled { id, labels: closed }
                            }
                        });
                    }
                    Some(out)
                }
            };
            records.push(CorpusRecord {
                provision_id: raw.provision_id,
                doc_id: raw.doc_id,
                jurisdiction: raw.jurisdiction,
                split: raw.split,
                text: raw.text,
                gold,
                annotators,
            });
        }
        Ok((Corpus { records }, report))
    }

    pub fn load(path: &Path) -> Result<(Corpus, LoadReport)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_jsonl()?.as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split(&self, split: Split) -> Corpus {
        Corpus {
            records: self
                .records
                .iter()
                .filter(|r| r.split == split)
                .cloned()
                .collect(),
        }
    }

    /// Provisions for classification. Consecutive records of the same
    /// document are grouped into blocks of at most `block_size` sentences.
    pub fn provisions(&self, block_size: usize) -> Vec<Provision> {
        let block_size = block_size.max(1);
        let mut out: Vec<Provision> = Vec::with_capacity(self.records.len());
        let mut per_doc: BTreeMap<&str, usize> = BTreeMap::new();
        let mut block = 0usize;
        let mut in_block = 0usize;
        for (i, r) in self.records.iter().enumerate() {
            let same_doc = i > 0 && self.records[i - 1].doc_id == r.doc_id;
            if i > 0 && (!same_doc || in_block == block_size) {
                block += 1;
                in_block = 0;
            }
            in_block += 1;
            let index = per_doc.entry(&r.doc_id).or_default();
            out.push(Provision {
                provision_id: r.provision_id.clone(),
                doc_id: r.doc_id.clone(),
                index: *index,
                block,
                text: r.text.clone(),
                prefix_applied: false,
                prefix: Vec::new(),
            });
            *index += 1;
        }
        out
    }

    pub fn gold_map(&self) -> BTreeMap<String, LabelSet> {
        self.records
            .iter()
            .map(|r| (r.provision_id.clone(), r.gold))
            .collect()
    }
}

/// Label counts for the training split and the test split by jurisdiction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub f: usize,
    pub t_ca: usize,
    pub t_us: usize,
}

impl SplitCounts {
    fn bump(&mut self, split: Split, jurisdiction: Jurisdiction) {
        match (split, jurisdiction) {
            (Split::F, _) => self.f += 1,
            (Split::T, Jurisdiction::CA) => self.t_ca += 1,
            (Split::T, Jurisdiction::US) => self.t_us += 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub per_concept: BTreeMap<Concept, SplitCounts>,
    /// Number of records in each column.
    pub records: SplitCounts,
}

impl LabelDistribution {
    pub fn get(&self, concept: Concept) -> SplitCounts {
        self.per_concept.get(&concept).copied().unwrap_or_default()
    }

    /// Concepts (in display-name order) whose counts differ from `expected`.
    pub fn mismatches(&self, expected: &[(Concept, SplitCounts)]) -> Vec<(Concept, SplitCounts, SplitCounts)> {
        expected
            .iter()
            .filter(|(c, want)| self.get(*c) != *want)
            .map(|(c, want)| (*c, *want, self.get(*c)))
            .collect()
    }

    pub fn render_table(&self) -> String {
        let mut rows: Vec<Concept> = Concept::ALL.to_vec();
        rows.sort_by_key(|c| (*c == Concept::Overall, c.display_name()));
        let mut out = format!("{:<18} {:>6} {:>6} {:>6}\n", "label", "F", "T-CA", "T-US");
        for c in rows {
            let n = self.get(c);
            out.push_str(&format!(
                "{:<18} {:>6} {:>6} {:>6}\n",
                format!("{} ({})", c.display_name(), c.level()),
                n.f,
                n.t_ca,
                n.t_us
            ));
        }
        out.push_str(&format!(
            "{:<18} {:>6} {:>6} {:>6}\n",
            "records", self.records.f, self.records.t_ca, self.records.t_us
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("concept,f,t_ca,t_us\n");
        for c in Concept::ALL {
            let n = self.get(c);
            out.push_str(&format!("{},{},{},{}\n", c.id(), n.f, n.t_ca, n.t_us));
        }
        out
    }
}

/// Per-concept counts by split and jurisdiction.
pub fn distribution(corpus: &Corpus) -> LabelDistribution {
    let mut dist = LabelDistribution {
        per_concept: Concept::ALL.into_iter().map(|c| (c, SplitCounts::default())).collect(),
        records: SplitCounts::default(),
    };
    for r in &corpus.records {
        dist.records.bump(r.split, r.jurisdiction);
        for c in r.gold.iter() {
            dist.per_concept
                .entry(c)
                .or_default()
                .bump(r.split, r.jurisdiction);
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotationBatches {
    /// Items every annotator sees.
    pub shared: Vec<String>,
    /// Each annotator's full list: own distinct items followed by the shared ones.
    pub per_annotator: Vec<Vec<String>>,
}

/// Number of shared items for `n` ids, `k` annotators and an overlap
/// fraction of each annotator's share.
///
/// The share is `n / k`; the shared block is `ceil(overlap * n / k)`,
/// raised when needed so the remaining items split evenly across
/// annotators. With zero overlap nothing is shared and the distinct items
/// may differ in count by one.
pub fn shared_size(n: usize, k: usize, overlap: f64) -> usize {
    let raw = overlap * n as f64 / k as f64;
    // Absorb float noise such as 0.1 * 400 / 2 = 20.000000000000004.
    let mut shared = (raw - 1e-9).ceil().max(0.0) as usize;
    if shared == 0 {
        return 0;
    }
    while shared < n && !(n - shared).is_multiple_of(k) {
        shared += 1;
    }
    shared
}

/// Splits `ids` among `k` annotators with a common overlap block.
/// Deterministic for a given seed.
pub fn make_annotation_batches(
    ids: &[String],
    k: usize,
    overlap: f64,
    seed: u64,
) -> Result<AnnotationBatches> {
    if k < 2 {
        return Err(Error::validation("need at least 2 annotators"));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::validation(format!(
            "overlap fraction must be in [0, 1), got {overlap}"
        )));
    }
    let unique: HashSet<&String> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(Error::validation("batch ids must be unique"));
    }
    let shared_n = shared_size(ids.len(), k, overlap);
    if ids.len() < k || ids.len() - shared_n.min(ids.len()) < k {
        return Err(Error::validation(format!(
            "too few ids ({}) for {k} annotators with overlap {overlap}",
            ids.len()
        )));
    }
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let shared = shuffled[..shared_n].to_vec();
    let distinct = &shuffled[shared_n..];
    let base = distinct.len() / k;
    let extra = distinct.len() % k;
    let mut per_annotator = Vec::with_capacity(k);
    let mut start = 0;
    for a in 0..k {
        let take = base + usize::from(a < extra);
        let mut list = distinct[start..start + take].to_vec();
        list.extend(shared.iter().cloned());
        per_annotator.push(list);
        start += take;
    }
    Ok(AnnotationBatches {
        shared,
        per_annotator,
    })
}

/// Kappa per concept between two annotators over records where both
/// supplied labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub items: usize,
    pub per_concept: BTreeMap<Concept, f64>,
}

pub fn annotator_agreement(corpus: &Corpus, first: &str, second: &str) -> Result<AgreementReport> {
    let mut pairs = Vec::new();
    for r in &corpus.records {
        let Some(list) = &r.annotators else { continue };
        let find = |id: &str| list.iter().find(|a| a.id() == id).and_then(Annotator::labels);
        if let (Some(a), Some(b)) = (find(first), find(second)) {
            pairs.push((a, b));
        }
    }
    agreement_from_pairs(&pairs)
}

/// Kappa per concept over paired label sets.
pub fn agreement_from_pairs(pairs: &[(LabelSet, LabelSet)]) -> Result<AgreementReport> {
    if pairs.is_empty() {
        return Err(Error::validation("no items labelled by both annotators"));
    }
    let mut per_concept = BTreeMap::new();
    for c in Concept::ALL {
        let a: Vec<bool> = pairs.iter().map(|(x, _)| x.contains(c)).collect();
        let b: Vec<bool> = pairs.iter().map(|(_, y)| y.contains(c)).collect();
        per_concept.insert(c, cohen_kappa(&a, &b)?);
    }
    Ok(AgreementReport {
        items: pairs.len(),
        per_concept,
    })
}

/// Published dataset figures, kept as fixture metadata for `corpus stats`.
pub mod reference {
    use super::SplitCounts;
    use crate::taxonomy::Concept::{self, *};

    /// Sentences in the source regulations, selected for analysis, and coded.
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub struct Funnel {
        pub initial: usize,
        pub selected: usize,
        pub coded: usize,
    }

    pub const FUNNEL: Funnel = Funnel {
        initial: 12_240,
        selected: 3_135,
        coded: 688,
    };

    pub const RECORDS: SplitCounts = SplitCounts {
        f: 688,
        t_ca: 350,
        t_us: 50,
    };

    const fn c(f: usize, t_ca: usize, t_us: usize) -> SplitCounts {
        SplitCounts { f, t_ca, t_us }
    }

    /// Per-concept label counts of the training split and both test slices.
    pub const DISTRIBUTION: [(Concept, SplitCounts); 13] = [
        (Colour, c(10, 10, 0)),
        (Data, c(178, 69, 11)),
        (Firmness, c(5, 2, 0)),
        (LabelData, c(121, 53, 10)),
        (Mass, c(94, 65, 32)),
        (Measurement, c(165, 109, 33)),
        (NonLabelData, c(57, 18, 1)),
        (Pathogen, c(10, 4, 0)),
        (Size, c(32, 36, 0)),
        (Temperature, c(31, 13, 1)),
        (TimeConstraint, c(44, 9, 8)),
        (WaterContent, c(3, 4, 0)),
        (Overall, c(369, 184, 40)),
    ];
}

#[cfg(test)]
mod tests {
    use super::*;
    use Concept::*;

    const THREE: &str = r#"{"provision_id":"a","doc_id":"d","jurisdiction":"CA","split":"F","text":"Keep cold.","gold":["temperature","measurement","overall"]}
{"provision_id":"b","doc_id":"d","jurisdiction":"CA","split":"T","text":"Label it.","gold":["label_data"]}
{"provision_id":"c","doc_id":"e","jurisdiction":"US","split":"T","text":"Nothing.","gold":[],"annotators":["x",{"id":"y","labels":["mass"]}]}
"#;

    #[test]
    fn loads_and_normalizes() {
        let (corpus, report) = Corpus::parse(THREE, "t").unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.records[1].gold, LabelSet::from([LabelData, Data, Overall]));
        assert_eq!(report.normalized.len(), 2);
        assert_eq!(report.normalized[0].line, 2);
        assert_eq!(report.normalized[0].added, LabelSet::from([Data, Overall]));
        assert_eq!(report.normalized[1].annotator.as_deref(), Some("y"));
        assert_eq!(
            corpus.records[2].annotators.as_ref().unwrap()[1].labels(),
            Some(LabelSet::from([Mass, Measurement, Overall]))
        );
    }

    #[test]
    fn duplicate_id_names_the_id() {
        let text = format!("{}{}", THREE, THREE.lines().next().unwrap());
        let err = Corpus::parse(&text, "t").unwrap_err();
        assert!(err.to_string().contains("duplicate provision_id `a`"), "{err}");
        assert!(matches!(err, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn schema_violations_carry_line_numbers() {
        for bad in [
            r#"{"provision_id":"a","doc_id":"d","jurisdiction":"FR","split":"F","text":"x","gold":[]}"#,
            r#"{"provision_id":"a","doc_id":"d","jurisdiction":"CA","split":"F","text":"x","gold":["nope"]}"#,
            r#"{"provision_id":"a","doc_id":"d","jurisdiction":"CA","split":"F","text":"x"}"#,
            r#"{"provision_id":"a","doc_id":"d","jurisdiction":"CA","split":"F","text":"x","gold":[],"extra":1}"#,
            r#"{"provision_id":"a","doc_id":"d","jurisdiction":"CA","split":"F","text":"  ","gold":[]}"#,
            "not json",
        ] {
            let text = format!("\n{bad}\n");
            match Corpus::parse(&text, "t") {
                Err(Error::Parse { line, .. }) => assert_eq!(line, 2, "{bad}"),
                other => panic!("expected parse error for {bad}, got {other:?}"),
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let (corpus, _) = Corpus::parse(THREE, "t").unwrap();
        let (again, report) = Corpus::parse(&corpus.to_jsonl().unwrap(), "t").unwrap();
        assert_eq!(again, corpus);
        assert!(report.normalized.is_empty());
    }

    #[test]
    fn distribution_small() {
        let (corpus, _) = Corpus::parse(THREE, "t").unwrap();
        let d = distribution(&corpus);
        assert_eq!(d.get(Temperature), SplitCounts { f: 1, t_ca: 0, t_us: 0 });
        assert_eq!(d.get(Data), SplitCounts { f: 0, t_ca: 1, t_us: 0 });
        assert_eq!(d.get(Overall), SplitCounts { f: 1, t_ca: 1, t_us: 0 });
        assert_eq!(d.records, SplitCounts { f: 1, t_ca: 1, t_us: 1 });
    }

    #[test]
    fn distribution_single_mass_record() {
        let text = r#"{"provision_id":"a","doc_id":"d","jurisdiction":"US","split":"T","text":"x","gold":["mass"]}"#;
        let (corpus, _) = Corpus::parse(text, "t").unwrap();
        let d = distribution(&corpus);
        for c in [Mass, Measurement, Overall] {
            assert_eq!(d.get(c).t_us, 1);
        }
        assert_eq!(d.get(Size).t_us, 0);
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn batches_400_two_annotators_ten_percent() {
        let b = make_annotation_batches(&ids(400), 2, 0.10, 7).unwrap();
        assert_eq!(b.shared.len(), 20);
        assert!(b.per_annotator.iter().all(|l| l.len() == 210));
    }

    #[test]
    fn batches_small_and_zero_overlap() {
        let b = make_annotation_batches(&ids(10), 2, 0.2, 1).unwrap();
        assert_eq!(b.shared.len(), 2);
        assert!(b.per_annotator.iter().all(|l| l.len() == 6));

        let b = make_annotation_batches(&ids(11), 3, 0.0, 1).unwrap();
        assert!(b.shared.is_empty());
        let sizes: Vec<_> = b.per_annotator.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 4, 3]);
    }

    #[test]
    fn batches_are_seeded() {
        let a = make_annotation_batches(&ids(50), 2, 0.1, 3).unwrap();
        assert_eq!(a, make_annotation_batches(&ids(50), 2, 0.1, 3).unwrap());
        assert_ne!(a, make_annotation_batches(&ids(50), 2, 0.1, 4).unwrap());
    }

    #[test]
    fn batch_errors() {
        assert!(make_annotation_batches(&ids(10), 1, 0.1, 0).is_err());
        assert!(make_annotation_batches(&ids(10), 2, 1.0, 0).is_err());
        assert!(make_annotation_batches(&ids(1), 2, 0.0, 0).is_err());
        let mut dup = ids(4);
        dup.push("p0".into());
        assert!(make_annotation_batches(&dup, 2, 0.0, 0).is_err());
    }

    #[test]
    fn provisions_group_blocks_by_document() {
        let (corpus, _) = Corpus::parse(THREE, "t").unwrap();
        let p = corpus.provisions(8);
        assert_eq!(p.iter().map(|p| p.block).collect::<Vec<_>>(), vec![0, 0, 1]);
        assert_eq!(p.iter().map(|p| p.index).collect::<Vec<_>>(), vec![0, 1, 0]);
        let p = corpus.provisions(1);
        assert_eq!(p.iter().map(|p| p.block).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn agreement_single_disagreement() {
        let mut pairs = vec![(LabelSet::EMPTY, LabelSet::EMPTY); 16];
        pairs.extend(vec![
            (
                LabelSet::from([LabelData]).closed(),
                LabelSet::from([LabelData]).closed()
            );
            3
        ]);
        pairs.push((LabelSet::from([LabelData]).closed(), LabelSet::EMPTY));
        let rep = agreement_from_pairs(&pairs).unwrap();
        assert_eq!(rep.items, 20);
        assert_eq!(rep.per_concept[&Mass], 1.0);
        assert!(rep.per_concept[&LabelData] < 1.0 && rep.per_concept[&LabelData] > 0.8);
    }
}
