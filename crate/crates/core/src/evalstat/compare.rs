use std::fmt;

use serde::{Deserialize, Serialize};

use super::effect::{vargha_delaney_a12, Band};
use super::metrics::{MetricKind, RunMetrics};
use super::ranksum::{wilcoxon_rank_sum, RankSumMethod};
use crate::error::{Error, Result};
use crate::taxonomy::Concept;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// A tends to score higher than B.
    Higher,
    Lower,
    Equal,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Higher => "A>B",
            Direction::Lower => "A<B",
            Direction::Equal => "A=B",
        })
    }
}

/// Test outcome; absent when either side has no defined values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub u: f64,
    pub p_value: f64,
    pub method: RankSumMethod,
    pub a12: f64,
    pub band: Band,
    pub direction: Direction,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metric: MetricKind,
    pub concept: Concept,
    /// Defined per-run values; undefined runs are counted, not included.
    pub samples_a: Vec<f64>,
    pub samples_b: Vec<f64>,
    pub undefined_a: usize,
    pub undefined_b: usize,
    pub outcome: Option<Outcome>,
}

fn sample(runs: &[RunMetrics], concept: Concept, metric: MetricKind) -> Result<(Vec<f64>, usize)> {
    let mut values = Vec::with_capacity(runs.len());
    let mut undefined = 0;
    for (i, run) in runs.iter().enumerate() {
        let Some(m) = run.per_concept.get(&concept) else {
            return Err(Error::validation(format!("run {i} has no metrics for `{concept}`")));
        };
        match metric.pick(&m.scores) {
            Some(v) => values.push(v),
            None => undefined += 1,
        }
    }
    Ok((values, undefined))
}

/// Per-concept comparison of two sets of runs on one metric: rank-sum
/// p-value, A12 of A against B, effect band and significance at p < 0.05.
/// No multiple-comparison correction is applied.
pub fn compare_models(
    runs_a: &[RunMetrics],
    runs_b: &[RunMetrics],
    metric: MetricKind,
    concepts: &[Concept],
) -> Result<Vec<ComparisonReport>> {
    if runs_a.len() < 2 || runs_b.len() < 2 {
        return Err(Error::validation(format!(
            "comparison needs at least 2 runs per side (got {} and {})",
            runs_a.len(),
            runs_b.len()
        )));
    }
    let keys = |runs: &[RunMetrics]| {
        runs.iter()
            .map(|r| r.per_concept.keys().copied().collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    let (ka, kb) = (keys(runs_a), keys(runs_b));
    if ka.iter().chain(&kb).any(|k| *k != ka[0]) {
        return Err(Error::validation("runs cover different concept sets"));
    }

    concepts
        .iter()
        .map(|&concept| {
            let (samples_a, undefined_a) = sample(runs_a, concept, metric)?;
            let (samples_b, undefined_b) = sample(runs_b, concept, metric)?;
            let outcome = if samples_a.is_empty() || samples_b.is_empty() {
                None
            } else {
                let test = wilcoxon_rank_sum(&samples_a, &samples_b)?;
                let (a12, band) = vargha_delaney_a12(&samples_a, &samples_b)?;
                let direction = if a12 > 0.5 {
                    Direction::Higher
                } else if a12 < 0.5 {
                    Direction::Lower
                } else {
                    Direction::Equal
                };
                Some(Outcome {
                    u: test.u,
                    p_value: test.p_value,
                    method: test.method,
                    a12,
                    band,
                    direction,
                    significant: test.p_value < SIGNIFICANCE_LEVEL,
                })
            };
            Ok(ComparisonReport {
                metric,
                concept,
                samples_a,
                samples_b,
                undefined_a,
                undefined_b,
                outcome,
            })
        })
        .collect()
}
