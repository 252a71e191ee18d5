use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{Concept, LabelSet};

/// Binary confusion counts for one concept, "concept in label set" being
/// the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub concept: Option<Concept>,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn for_concept(concept: Concept) -> Self {
        Self {
            concept: Some(concept),
            ..Self::default()
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }
}

/// Counts for `concept` over provisions keyed by id. Both maps must hold
/// exactly the same ids.
pub fn confusion(
    predictions: &BTreeMap<String, LabelSet>,
    gold: &BTreeMap<String, LabelSet>,
    concept: Concept,
) -> Result<ConfusionCounts> {
    if let Some(id) = predictions.keys().find(|k| !gold.contains_key(*k)) {
        return Err(Error::validation(format!("provision `{id}` has no gold labels")));
    }
    if let Some(id) = gold.keys().find(|k| !predictions.contains_key(*k)) {
        return Err(Error::validation(format!("provision `{id}` has no prediction")));
    }
    let mut counts = ConfusionCounts::for_concept(concept);
    for (id, predicted) in predictions {
        counts.record(predicted.contains(concept), gold[id].contains(concept));
    }
    Ok(counts)
}

/// Precision, recall and F1; `None` marks an undefined value (zero
/// denominator, or for F1 either input undefined).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn precision_recall_f1(c: &ConfusionCounts) -> Scores {
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Scores {
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Precision,
    Recall,
    F1,
}

impl MetricKind {
    pub fn pick(self, s: &Scores) -> Option<f64> {
        match self {
            MetricKind::Precision => s.precision,
            MetricKind::Recall => s.recall,
            MetricKind::F1 => s.f1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Precision => "precision",
            MetricKind::Recall => "recall",
            MetricKind::F1 => "f1",
        }
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "precision" => Ok(MetricKind::Precision),
            "recall" => Ok(MetricKind::Recall),
            "f1" => Ok(MetricKind::F1),
            other => Err(Error::validation(format!(
                "metric must be precision, recall or f1, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConceptMetrics {
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub scores: Scores,
}

/// Per-concept scores for one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub per_concept: BTreeMap<Concept, ConceptMetrics>,
}

impl RunMetrics {
    /// Scores every concept over `(predicted, gold)` pairs.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a LabelSet, &'a LabelSet)>) -> Self {
        let mut counts: BTreeMap<Concept, ConfusionCounts> = Concept::ALL
            .into_iter()
            .map(|c| (c, ConfusionCounts::for_concept(c)))
            .collect();
        for (predicted, gold) in pairs {
            for (concept, cell) in counts.iter_mut() {
                cell.record(predicted.contains(*concept), gold.contains(*concept));
            }
        }
        let per_concept = counts
            .into_iter()
            .map(|(c, counts)| {
                (
                    c,
                    ConceptMetrics {
                        counts,
                        scores: precision_recall_f1(&counts),
                    },
                )
            })
            .collect();
        Self { per_concept }
    }

    pub fn get(&self, concept: Concept, metric: MetricKind) -> Option<f64> {
        self.per_concept
            .get(&concept)
            .and_then(|m| metric.pick(&m.scores))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Concept::Mass;

    fn sets(positive: &[usize], n: usize) -> BTreeMap<String, LabelSet> {
        (1..=n)
            .map(|i| {
                let set = if positive.contains(&i) {
                    LabelSet::from([Mass])
                } else {
                    LabelSet::EMPTY
                };
                (format!("p{i}"), set)
            })
            .collect()
    }

    #[test]
    fn five_provision_fixture() {
        // Hand count: p1 TP, p2 FN, p3 FP, p4 FP, p5 TN.
        let c = confusion(&sets(&[1, 3, 4], 5), &sets(&[1, 2], 5), Mass).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (1, 2, 1, 1));
        assert_eq!(c.total(), 5);
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let gold = sets(&[1, 2], 5);
        let c = confusion(&gold, &gold, Mass).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let c = confusion(&sets(&[], 5), &gold, Mass).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (0, 0, 3, 2));
    }

    #[test]
    fn mismatched_ids_are_rejected() {
        let mut pred = sets(&[1], 3);
        pred.insert("extra".into(), LabelSet::EMPTY);
        assert!(confusion(&pred, &sets(&[1], 3), Mass).is_err());
        assert!(confusion(&sets(&[1], 2), &sets(&[1], 3), Mass).is_err());
    }

    #[test]
    fn scores() {
        let c = ConfusionCounts {
            tp: 1,
            fp: 2,
            fn_: 1,
            ..Default::default()
        };
        let s = precision_recall_f1(&c);
        assert!((s.precision.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.recall.unwrap() - 0.5).abs() < 1e-15);
        assert!((s.f1.unwrap() - 0.4).abs() < 1e-15);

        let s = precision_recall_f1(&ConfusionCounts {
            fn_: 2,
            ..Default::default()
        });
        assert_eq!(s.precision, None);
        assert_eq!(s.recall, Some(0.0));
        assert_eq!(s.f1, None);

        let s = precision_recall_f1(&ConfusionCounts {
            tp: 7,
            ..Default::default()
        });
        assert_eq!((s.precision, s.recall, s.f1), (Some(1.0), Some(1.0), Some(1.0)));
    }

    #[test]
    fn f1_zero_when_no_true_positives() {
        let s = precision_recall_f1(&ConfusionCounts {
            fp: 1,
            fn_: 1,
            ..Default::default()
        });
        assert_eq!(s.f1, Some(0.0));
    }
}
