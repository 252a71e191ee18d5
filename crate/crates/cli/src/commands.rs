use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use provclass::backend::{
    build_finetune_record, AnnotatedSentence, Backend, HttpBackend, MockBackend, PromptMode, PromptTemplate,
};
use provclass::config::AppConfig;
use provclass::corpus::{self, reference, Corpus, Split};
use provclass::evalstat::{compare_models, summarize_runs, MetricKind, RunMetrics};
use provclass::keywords::KeywordTable;
use provclass::pipeline::{self, OverallMode, RunOptions};
use provclass::segmenter::{Segmenter, SourceDocument};
use provclass::taxonomy::{render_registry, Concept, LabelSet};
use provclass::{Error, Jurisdiction, Result};
use serde::Serialize;

use crate::cli::*;
use crate::report::{csv, csv_num, num, table, OutputDir};

pub struct Ctx {
    pub cfg: AppConfig,
    pub out: OutputDir,
}

impl Ctx {
    pub fn new(cli: &Cli) -> Result<Ctx> {
        let mut cfg = match &cli.config {
            Some(path) => AppConfig::load(path)?,
            None => AppConfig::default(),
        };
        if let Some(dir) = &cli.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        let out = OutputDir::new(cfg.output_dir.clone());
        Ok(Ctx { cfg, out })
    }

    fn apply(&mut self, b: &BackendArgs) -> Result<()> {
        if let Some(r) = &b.rules {
            self.cfg.mock_rules = Some(r.clone());
        }
        if let Some(k) = &b.keywords {
            self.cfg.keywords = Some(k.clone());
        }
        if let Some(m) = b.overall_mode {
            self.cfg.overall_mode = match m {
                ModeArg::Derived => OverallMode::Derived,
                ModeArg::Independent => OverallMode::Independent,
            };
        }
        if let Some(p) = b.prompt {
            self.cfg.prompts.mode = match p {
                PromptArg::Finetune => PromptMode::FinetuneInfer,
                PromptArg::Fewshot => PromptMode::Fewshot,
            };
        }
        if let Some(k) = b.shots {
            self.cfg.prompts.shots = k;
        }
        self.cfg.validate()
    }

    fn backend(&self, kind: BackendKind) -> Result<Box<dyn Backend>> {
        Ok(match kind {
            BackendKind::Mock => Box::new(match &self.cfg.mock_rules {
                Some(path) => MockBackend::load(path)?,
                None => MockBackend::builtin(),
            }),
            BackendKind::Http => Box::new(HttpBackend::new(self.cfg.backend.clone())?),
        })
    }

    fn keywords(&self) -> Result<KeywordTable> {
        match &self.cfg.keywords {
            Some(path) => KeywordTable::load(path),
            None => Ok(KeywordTable::builtin()),
        }
    }

    fn template(&self, mode: PromptMode) -> Result<PromptTemplate> {
        let p = &self.cfg.prompts;
        let file = match mode {
            PromptMode::Fewshot => &p.fewshot,
            _ => &p.finetune,
        };
        match file {
            Some(path) => PromptTemplate::load(path, mode),
            None => Ok(PromptTemplate::builtin(mode)),
        }
    }

    /// Inference template; few-shot examples come from the configured shot
    /// corpus, else from the `F` split of `fallback`.
    fn inference_template(&self, fallback: Option<&Corpus>) -> Result<PromptTemplate> {
        let mode = self.cfg.prompts.mode;
        if mode != PromptMode::Fewshot {
            return self.template(PromptMode::FinetuneInfer);
        }
        let source = match (&self.cfg.prompts.shot_corpus, fallback) {
            (Some(path), _) => load_corpus(path)?,
            (None, Some(c)) => c.clone(),
            (None, None) => {
                return Err(Error::validation(
                    "few-shot prompting needs prompts.shot_corpus in the config",
                ))
            }
        };
        let train = source.split(Split::F);
        let shots = pipeline::select_shots(&train, self.cfg.prompts.shots, self.cfg.block_size, self.cfg.seed)?;
        Ok(self.template(PromptMode::Fewshot)?.with_shots(shots))
    }
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    let (c, report) = Corpus::load(path)?;
    if !report.normalized.is_empty() {
        log::info!(
            "{}: closure added labels to {} record(s)",
            path.display(),
            report.normalized.len()
        );
    }
    Ok(c)
}

fn select(corpus: Corpus, split: Option<SplitArg>) -> Result<Corpus> {
    let c = match split {
        None => corpus,
        Some(SplitArg::F) => corpus.split(Split::F),
        Some(SplitArg::T) => corpus.split(Split::T),
    };
    if c.is_empty() {
        return Err(Error::validation("no corpus records selected"));
    }
    Ok(c)
}

fn jurisdiction(j: JurisdictionArg) -> Jurisdiction {
    match j {
        JurisdictionArg::Ca => Jurisdiction::CA,
        JurisdictionArg::Us => Jurisdiction::US,
    }
}

fn read_docs(files: &[PathBuf], j: JurisdictionArg, doc_id: Option<&str>) -> Result<Vec<SourceDocument>> {
    if doc_id.is_some() && files.len() > 1 {
        return Err(Error::validation("--doc-id needs a single input file"));
    }
    files
        .iter()
        .map(|path| {
            let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "doc".into());
            Ok(SourceDocument {
                doc_id: doc_id.map_or(stem.clone(), str::to_string),
                jurisdiction: jurisdiction(j),
                title: stem,
                body,
            })
        })
        .collect()
}

fn labels_text(set: LabelSet) -> String {
    set.ids().join(",")
}

pub fn segment(ctx: &Ctx, a: &SegmentArgs) -> Result<()> {
    let seg = Segmenter::new(&ctx.cfg.segmenter)?;
    let files: Vec<PathBuf> = a.files.iter().chain(&a.inputs).cloned().collect();
    let mut out = String::new();
    for doc in read_docs(&files, a.jurisdiction, a.doc_id.as_deref())? {
        for p in seg.segment(&doc)? {
            out.push_str(&serde_json::to_string(&p)?);
            out.push('\n');
        }
    }
    match &a.out {
        Some(path) => std::fs::write(path, out).map_err(|e| Error::io(path, e)),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

pub fn classify(ctx: &mut Ctx, a: &ClassifyArgs) -> Result<()> {
    ctx.apply(&a.backend)?;
    let seg = Segmenter::new(&ctx.cfg.segmenter)?;
    let mut provisions = Vec::new();
    for doc in read_docs(&a.files, a.jurisdiction, None)? {
        provisions.extend(seg.segment(&doc)?);
    }
    let backend = ctx.backend(a.backend.backend)?;
    let tpl = ctx.inference_template(None)?;
    let p = pipeline::predict(&provisions, backend.as_ref(), &tpl, &ctx.keywords()?, ctx.cfg.overall_mode, None)?;
    for ann in &p.annotations {
        let labels = if ann.failure.is_some() {
            "FAILED".to_string()
        } else {
            labels_text(ann.predicted)
        };
        println!("{}\t{}\t{}", ann.provision.provision_id, labels, ann.provision.text);
    }
    if p.failed_paragraphs > 0 {
        return Err(Error::Backend(format!("{} paragraph(s) failed", p.failed_paragraphs)));
    }
    Ok(())
}

pub fn predict(ctx: &mut Ctx, a: &PredictArgs) -> Result<()> {
    ctx.apply(&a.backend)?;
    let full = load_corpus(&a.input.corpus)?;
    let corpus = select(full.clone(), a.input.split)?;
    let backend = ctx.backend(a.backend.backend)?;
    let tpl = ctx.inference_template(Some(&full))?;
    let gold = corpus.gold_map();
    let p = pipeline::predict(
        &corpus.provisions(ctx.cfg.block_size),
        backend.as_ref(),
        &tpl,
        &ctx.keywords()?,
        ctx.cfg.overall_mode,
        Some(&gold),
    )?;
    let run = pipeline::RunResult {
        run_index: 0,
        backend: backend.id(),
        timestamp: pipeline::timestamp_now(),
        annotations: p.annotations,
        warnings: p.warnings,
        failed_paragraphs: p.failed_paragraphs,
    };
    let path = ctx.out.file(&a.name)?;
    pipeline::write_rows(&path, &run.rows())?;
    println!(
        "{} provisions, {} failed paragraph(s), {} unknown label(s) -> {}",
        run.annotations.len(),
        run.failed_paragraphs,
        p.unknown_labels,
        path.display()
    );
    Ok(())
}

pub fn run(ctx: &mut Ctx, a: &RunArgs) -> Result<()> {
    ctx.apply(&a.backend)?;
    if let Some(n) = a.n {
        ctx.cfg.runs = n;
    }
    let full = load_corpus(&a.input.corpus)?;
    let corpus = select(full.clone(), a.input.split)?;
    let backend = ctx.backend(a.backend.backend)?;
    let tpl = ctx.inference_template(Some(&full))?;
    let gold = corpus.gold_map();
    let results = pipeline::run_many(
        &corpus.provisions(ctx.cfg.block_size),
        backend.as_ref(),
        &tpl,
        &ctx.keywords()?,
        Some(&gold),
        RunOptions {
            runs: ctx.cfg.runs,
            mode: ctx.cfg.overall_mode,
            parallel_runs: a.parallel_runs,
        },
    )?;
    let mut manifest_runs = Vec::new();
    let mut failures = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(run) => {
                let name = format!("{}/run_{:03}.jsonl", a.name, run.run_index);
                pipeline::write_rows(&ctx.out.file(&name)?, &run.rows())?;
                manifest_runs.push(serde_json::json!({
                    "run_index": run.run_index,
                    "file": format!("run_{:03}.jsonl", run.run_index),
                    "timestamp": run.timestamp,
                    "failed_paragraphs": run.failed_paragraphs,
                    "warnings": run.warnings.len(),
                }));
            }
            Err(e) => {
                failures += 1;
                log::error!("run {i} failed: {e}");
                manifest_runs.push(serde_json::json!({"run_index": i, "error": e.to_string()}));
            }
        }
    }
    let manifest = serde_json::json!({
        "backend": backend.id(),
        "runs": ctx.cfg.runs,
        "seed": ctx.cfg.seed,
        "overall_mode": ctx.cfg.overall_mode,
        "prompt_mode": ctx.cfg.prompts.mode,
        "provisions": corpus.len(),
        "results": manifest_runs,
    });
    ctx.out
        .write(&format!("{}/manifest.json", a.name), &serde_json::to_string_pretty(&manifest)?)?;
    println!(
        "{} run(s) over {} provisions -> {}",
        ctx.cfg.runs - failures,
        corpus.len(),
        ctx.out.file(&a.name)?.display()
    );
    if failures > 0 {
        return Err(Error::Backend(format!("{failures} run(s) failed")));
    }
    Ok(())
}

/// Metrics of every `run_*.jsonl` file in `dir`, in file-name order.
pub fn load_runs(dir: &Path) -> Result<Vec<RunMetrics>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("run_") && n.ends_with(".jsonl"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::validation(format!("no run_*.jsonl files in {}", dir.display())));
    }
    files
        .iter()
        .map(|f| pipeline::metrics_from_rows(&pipeline::read_rows(f)?))
        .collect()
}

const METRICS: [MetricKind; 3] = [MetricKind::Precision, MetricKind::Recall, MetricKind::F1];

pub fn evaluate(ctx: &Ctx, a: &EvaluateArgs) -> Result<()> {
    let runs = load_runs(&a.runs)?;

    let mut per_run = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        for (c, m) in &run.per_concept {
            let k = &m.counts;
            per_run.push(vec![
                i.to_string(),
                c.id().to_string(),
                k.tp.to_string(),
                k.fp.to_string(),
                k.tn.to_string(),
                k.fn_.to_string(),
                csv_num(m.scores.precision),
                csv_num(m.scores.recall),
                csv_num(m.scores.f1),
            ]);
        }
    }
    let metrics_path = ctx.out.write(
        &format!("{}/metrics.csv", a.name),
        &csv(&["run", "concept", "tp", "fp", "tn", "fn", "precision", "recall", "f1"], &per_run),
    )?;

    let mut box_rows = Vec::new();
    let mut text_rows = Vec::new();
    for c in Concept::ALL {
        let mut text = vec![c.display_name().to_string()];
        for metric in METRICS {
            let values: Vec<f64> = runs.iter().filter_map(|r| r.get(c, metric)).collect();
            let undefined = runs.len() - values.len();
            match summarize_runs(&values) {
                Ok(s) => {
                    box_rows.push(vec![
                        c.id().into(),
                        metric.name().into(),
                        s.n.to_string(),
                        undefined.to_string(),
                        csv_num(Some(s.min)),
                        csv_num(Some(s.q1)),
                        csv_num(Some(s.median)),
                        csv_num(Some(s.q3)),
                        csv_num(Some(s.max)),
                        csv_num(Some(s.mean)),
                        csv_num(Some(s.sd)),
                    ]);
                    text.push(format!("{} ± {}", num(Some(s.mean)), num(Some(s.sd))));
                }
                Err(_) => {
                    let mut row = vec![c.id().into(), metric.name().into(), "0".into(), undefined.to_string()];
                    row.extend(std::iter::repeat_n("NA".to_string(), 7));
                    box_rows.push(row);
                    text.push("-".into());
                }
            }
        }
        text_rows.push(text);
    }
    let box_path = ctx.out.write(
        &format!("{}/boxplot.csv", a.name),
        &csv(
            &["concept", "metric", "n", "undefined", "min", "q1", "median", "q3", "max", "mean", "sd"],
            &box_rows,
        ),
    )?;

    let distinct = {
        let mut seen: Vec<&RunMetrics> = Vec::new();
        for r in &runs {
            if !seen.contains(&r) {
                seen.push(r);
            }
        }
        seen.len()
    };
    print!(
        "{}",
        table(&["concept", "precision (mean ± sd)", "recall (mean ± sd)", "f1 (mean ± sd)"], &text_rows)
    );
    println!("runs: {}  distinct per-run metrics: {}", runs.len(), distinct);
    println!("wrote {} and {}", metrics_path.display(), box_path.display());
    Ok(())
}

fn p_text(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

fn metric(m: MetricArg) -> MetricKind {
    match m {
        MetricArg::Precision => MetricKind::Precision,
        MetricArg::Recall => MetricKind::Recall,
        MetricArg::F1 => MetricKind::F1,
    }
}

pub fn compare(ctx: &Ctx, a: &CompareArgs) -> Result<()> {
    let runs_a = load_runs(&a.runs_a)?;
    let runs_b = load_runs(&a.runs_b)?;
    let concepts: Vec<Concept> = if a.concepts.is_empty() {
        Concept::ALL.to_vec()
    } else {
        a.concepts.iter().map(|c| c.parse()).collect::<Result<_>>()?
    };
    let kind = metric(a.metric);
    let reports = compare_models(&runs_a, &runs_b, kind, &concepts)?;

    let median = |v: &[f64]| summarize_runs(v).ok().map(|s| s.median);
    let mut text_rows = Vec::new();
    let mut csv_rows = Vec::new();
    for r in &reports {
        let (ma, mb) = (median(&r.samples_a), median(&r.samples_b));
        match &r.outcome {
            Some(o) => {
                text_rows.push(vec![
                    r.concept.display_name().into(),
                    r.samples_a.len().to_string(),
                    r.samples_b.len().to_string(),
                    num(ma),
                    num(mb),
                    format!("{}", o.u),
                    p_text(o.p_value),
                    format!("{:.3}", o.a12),
                    o.band.to_string(),
                    o.direction.to_string(),
                    if o.significant { "yes".into() } else { "no".into() },
                ]);
                csv_rows.push(vec![
                    r.concept.id().into(),
                    kind.name().into(),
                    r.samples_a.len().to_string(),
                    r.samples_b.len().to_string(),
                    r.undefined_a.to_string(),
                    r.undefined_b.to_string(),
                    csv_num(ma),
                    csv_num(mb),
                    format!("{}", o.u),
                    format!("{}", o.p_value),
                    serde_json::to_value(o.method)?.as_str().unwrap_or_default().to_string(),
                    format!("{}", o.a12),
                    o.band.to_string(),
                    o.direction.to_string(),
                    o.significant.to_string(),
                ]);
            }
            None => {
                let mut t = vec![
                    r.concept.display_name().into(),
                    r.samples_a.len().to_string(),
                    r.samples_b.len().to_string(),
                    num(ma),
                    num(mb),
                ];
                t.extend(std::iter::repeat_n("-".to_string(), 6));
                text_rows.push(t);
                let mut c = vec![
                    r.concept.id().into(),
                    kind.name().into(),
                    r.samples_a.len().to_string(),
                    r.samples_b.len().to_string(),
                    r.undefined_a.to_string(),
                    r.undefined_b.to_string(),
                    csv_num(ma),
                    csv_num(mb),
                ];
                c.extend(std::iter::repeat_n("NA".to_string(), 7));
                csv_rows.push(c);
            }
        }
    }
    let path = ctx.out.write(
        &a.name,
        &csv(
            &[
                "concept", "metric", "n_a", "n_b", "undefined_a", "undefined_b", "median_a", "median_b", "u",
                "p", "method", "a12", "band", "direction", "significant",
            ],
            &csv_rows,
        ),
    )?;
    println!("metric: {}  (significance p < 0.05, no multiple-comparison correction)", kind.name());
    print!(
        "{}",
        table(
            &["concept", "n_a", "n_b", "median_a", "median_b", "U", "p", "a12", "band", "dir", "sig"],
            &text_rows
        )
    );
    println!("wrote {}", path.display());
    Ok(())
}

pub fn kappa(a: &KappaArgs) -> Result<()> {
    let report = match (&a.corpus, a.files.as_slice()) {
        (Some(path), []) => {
            let [first, second] = a.annotators.as_slice() else {
                return Err(Error::validation("--annotators needs exactly two ids"));
            };
            corpus::annotator_agreement(&load_corpus(path)?, first, second)?
        }
        (None, [fa, fb]) => {
            let ga = load_corpus(fa)?.gold_map();
            let gb = load_corpus(fb)?.gold_map();
            let pairs: Vec<(LabelSet, LabelSet)> = ga
                .iter()
                .filter_map(|(id, a)| gb.get(id).map(|b| (*a, *b)))
                .collect();
            corpus::agreement_from_pairs(&pairs)?
        }
        _ => {
            return Err(Error::validation(
                "give either --corpus with --annotators A,B or two corpus files",
            ))
        }
    };
    let rows: Vec<Vec<String>> = report
        .per_concept
        .iter()
        .map(|(c, k)| vec![c.display_name().to_string(), format!("{k:.4}")])
        .collect();
    println!("items: {}", report.items);
    print!("{}", table(&["concept", "kappa"], &rows));
    Ok(())
}

pub fn corpus_cmd(ctx: &Ctx, c: &CorpusCommand) -> Result<()> {
    match c {
        CorpusCommand::Stats {
            corpus: path,
            reference: check,
            csv: write_csv,
        } => {
            let corpus = load_corpus(path)?;
            let dist = corpus::distribution(&corpus);
            print!("{}", dist.render_table());
            let f = reference::FUNNEL;
            println!(
                "reference funnel: initial {}, selected {}, coded {}",
                f.initial, f.selected, f.coded
            );
            if *write_csv {
                let p = ctx.out.write("distribution.csv", &dist.to_csv())?;
                println!("wrote {}", p.display());
            }
            if *check {
                let mismatches = dist.mismatches(&reference::DISTRIBUTION);
                let records_ok = dist.records == reference::RECORDS;
                if mismatches.is_empty() && records_ok {
                    println!("reference distribution: match");
                } else {
                    for (c, want, got) in &mismatches {
                        println!(
                            "mismatch {}: expected {}/{}/{} got {}/{}/{}",
                            c.id(),
                            want.f,
                            want.t_ca,
                            want.t_us,
                            got.f,
                            got.t_ca,
                            got.t_us
                        );
                    }
                    if !records_ok {
                        println!("mismatch records: got {:?}", dist.records);
                    }
                    return Err(Error::validation("corpus does not match the reference distribution"));
                }
            }
            Ok(())
        }
        CorpusCommand::Lint { corpus: path } => {
            let (corpus, report) = Corpus::load(path)?;
            for n in &report.normalized {
                println!(
                    "line {}: {}{}: closure added {}",
                    n.line,
                    n.provision_id,
                    n.annotator.as_deref().map(|a| format!(" ({a})")).unwrap_or_default(),
                    labels_text(n.added)
                );
            }
            println!("{} records, {} normalised", corpus.len(), report.normalized.len());
            Ok(())
        }
        CorpusCommand::Batches {
            corpus: path,
            annotators,
            overlap,
            split,
        } => {
            let corpus = select(load_corpus(path)?, *split)?;
            let ids: Vec<String> = corpus.records.iter().map(|r| r.provision_id.clone()).collect();
            let b = corpus::make_annotation_batches(&ids, *annotators, *overlap, ctx.cfg.seed)?;
            ctx.out.write("batches/shared.txt", &lines(&b.shared))?;
            for (i, list) in b.per_annotator.iter().enumerate() {
                ctx.out.write(&format!("batches/annotator_{}.txt", i + 1), &lines(list))?;
                println!(
                    "annotator {}: {} ids ({} distinct + {} shared)",
                    i + 1,
                    list.len(),
                    list.len() - b.shared.len(),
                    b.shared.len()
                );
            }
            println!("wrote {}", ctx.out.file("batches")?.display());
            Ok(())
        }
    }
}

fn lines(ids: &[String]) -> String {
    let mut s = ids.join("\n");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct FinetuneRecord<'a> {
    messages: &'a [provclass::backend::ChatMessage],
}

pub fn export_finetune(ctx: &Ctx, a: &ExportArgs) -> Result<()> {
    let corpus = select(load_corpus(&a.corpus)?, Some(a.split))?;
    let tpl = ctx.template(PromptMode::FinetuneTrain)?;
    let gold = corpus.gold_map();
    let provisions = corpus.provisions(ctx.cfg.block_size);
    let mut out = String::new();
    let mut count = 0;
    for group in pipeline::paragraphs(&provisions) {
        let annotated: Vec<AnnotatedSentence> = group
            .iter()
            .map(|p| {
                let mut labels = gold[&p.provision_id];
                labels.remove(Concept::Overall);
                AnnotatedSentence::new(p.text.clone(), labels)
            })
            .collect();
        let paragraph = provclass::backend::paragraph_text(group);
        let messages = build_finetune_record(&tpl, &paragraph, &annotated)?;
        out.push_str(&serde_json::to_string(&FinetuneRecord { messages: &messages })?);
        out.push('\n');
        count += 1;
    }
    let path = ctx.out.write(&a.name, &out)?;
    println!("{count} records -> {}", path.display());
    Ok(())
}

pub fn keywords_cmd(c: &KeywordsCommand) -> Result<()> {
    match c {
        KeywordsCommand::Lint { file } => {
            let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
            let issues = KeywordTable::lint(&text);
            for i in &issues {
                println!("{}:{}: {}", file.display(), i.line, i.message);
            }
            if issues.is_empty() {
                let t = KeywordTable::parse(&text, &file.display().to_string())?;
                let counts: BTreeMap<&str, usize> = t.entries().iter().map(|(c, v)| (c.id(), v.len())).collect();
                println!("ok: {} phrases {:?}", t.table().phrase_count(), counts);
                Ok(())
            } else {
                Err(Error::validation(format!("{} problem(s) in keyword table", issues.len())))
            }
        }
    }
}

pub fn taxonomy_cmd(c: &TaxonomyCommand) -> Result<()> {
    match c {
        TaxonomyCommand::Show => {
            print!("{}", render_registry());
            Ok(())
        }
    }
}
