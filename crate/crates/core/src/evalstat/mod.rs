//! Accuracy metrics, inter-annotator agreement and multi-run comparison.

mod compare;
mod effect;
mod kappa;
mod metrics;
mod ranksum;
mod summary;

pub use compare::{compare_models, ComparisonReport, Direction, Outcome, SIGNIFICANCE_LEVEL};
pub use effect::{vargha_delaney_a12, Band};
pub use kappa::cohen_kappa;
pub use metrics::{
    confusion, precision_recall_f1, ConceptMetrics, ConfusionCounts, MetricKind, RunMetrics,
    Scores,
};
pub use ranksum::{
    rank_sum_exact, rank_sum_normal, wilcoxon_rank_sum, RankSum, RankSumMethod, EXACT_MAX_TOTAL,
};
pub use summary::{summarize_runs, RunSummary};
