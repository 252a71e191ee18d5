use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "provclass", version, about = "Classify food-safety regulatory provisions and evaluate classifiers")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory all output files are written to (overrides the config).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,

    /// Seed for shot selection and batch shuffling (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split documents into provisions; prints JSON lines.
    Segment(SegmentArgs),
    /// Segment documents and print the labels of each provision.
    Classify(ClassifyArgs),
    /// One classification run over a corpus; writes an annotations file.
    Predict(PredictArgs),
    /// Repeated classification runs over a corpus.
    Run(RunArgs),
    /// Per-run metrics and their summary for a directory of runs.
    Evaluate(EvaluateArgs),
    /// Rank-sum test and effect size between two directories of runs.
    Compare(CompareArgs),
    /// Inter-annotator agreement per concept.
    Kappa(KappaArgs),
    /// Corpus utilities.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Write fine-tuning records in chat format.
    ExportFinetune(ExportArgs),
    /// Keyword table utilities.
    #[command(subcommand)]
    Keywords(KeywordsCommand),
    /// Concept registry.
    #[command(subcommand)]
    Taxonomy(TaxonomyCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Derived,
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PromptArg {
    Finetune,
    Fewshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    F,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JurisdictionArg {
    Ca,
    Us,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Precision,
    Recall,
    F1,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Plain-text documents; blank lines separate paragraphs.
    #[arg(required_unless_present = "inputs")]
    pub files: Vec<PathBuf>,
    /// Input document (repeatable), same as a positional file.
    #[arg(long = "in", value_name = "FILE")]
    pub inputs: Vec<PathBuf>,
    /// Write the JSON lines to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ca")]
    pub jurisdiction: JurisdictionArg,
    /// Document id (single input only); defaults to the file stem.
    #[arg(long)]
    pub doc_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value = "mock")]
    pub backend: BackendKind,
    /// Rule table for the mock backend.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Keyword table for the scarce concepts.
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub overall_mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub prompt: Option<PromptArg>,
    /// Number of few-shot examples.
    #[arg(long)]
    pub shots: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "ca")]
    pub jurisdiction: JurisdictionArg,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct CorpusInput {
    /// Corpus JSONL with gold labels.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Only records of this split.
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub input: CorpusInput,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "predictions.jsonl")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: CorpusInput,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Number of runs (overrides the config).
    #[arg(long)]
    pub n: Option<usize>,
    /// Execute runs concurrently.
    #[arg(long)]
    pub parallel_runs: bool,
    /// Subdirectory of the output directory receiving the runs.
    #[arg(long, default_value = "runs")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory with run_NNN.jsonl files.
    pub runs: PathBuf,
    /// Subdirectory of the output directory receiving the reports.
    #[arg(long, default_value = "evaluation")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Runs of model A.
    pub runs_a: PathBuf,
    /// Runs of model B.
    pub runs_b: PathBuf,
    #[arg(long, value_enum, default_value = "recall")]
    pub metric: MetricArg,
    /// Concept ids to compare; all by default.
    #[arg(long, value_delimiter = ',')]
    pub concepts: Vec<String>,
    /// Report file name inside the output directory.
    #[arg(long, default_value = "comparison.csv")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    /// Corpus whose records carry per-annotator labels.
    #[arg(long, conflicts_with = "files")]
    pub corpus: Option<PathBuf>,
    /// The two annotator ids to compare.
    #[arg(long, value_delimiter = ',', requires = "corpus")]
    pub annotators: Vec<String>,
    /// Alternatively two corpus files labelled independently; gold labels of
    /// shared provision ids are compared.
    #[arg(num_args = 0..=2)]
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Label distribution by split and jurisdiction.
    Stats {
        corpus: PathBuf,
        /// Compare against the published distribution; mismatches exit 1.
        #[arg(long)]
        reference: bool,
        /// Also write distribution.csv to the output directory.
        #[arg(long)]
        csv: bool,
    },
    /// Validate a corpus and report closure normalisation.
    Lint { corpus: PathBuf },
    /// Split provision ids among annotators with a shared overlap.
    Batches {
        corpus: PathBuf,
        #[arg(long, default_value_t = 2)]
        annotators: usize,
        #[arg(long, default_value_t = 0.10)]
        overlap: f64,
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
    },
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "f")]
    pub split: SplitArg,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "finetune.jsonl")]
    pub name: String,
}

#[derive(Debug, Subcommand)]
pub enum KeywordsCommand {
    /// Check a keyword table and report every problem.
    Lint { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum TaxonomyCommand {
    /// Print the concept registry.
    Show,
}
