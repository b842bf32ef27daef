//! Command-line driver: prompt generation, validation, scoring, agreement
//! analysis, threshold sweeps and multi-model reports.

pub mod config;
pub mod pipeline;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use t2i_eval::agreement::{
    agreement_report, cohens_kappa, judge_images, kfold_validate, load_annotations, percent_agreement, threshold_sweep,
    ImageJudgement, SweepRange,
};
use t2i_eval::detection::load_detections;
use t2i_eval::jsonl::{self, write_atomic};
use t2i_eval::prompt::{generate_suite, load_suite};
use t2i_eval::reporting::{self, SweepReport};
use t2i_eval::scoring::{compare_models, score_model, DEFAULT_IMAGES_PER_PROMPT};
use t2i_eval::verifier::{verify_image, verify_missing_image, POSITION_PAIRING};
use t2i_eval::{ImageDetections, ImageVerdict, ModelScore, Suite, Task, TaskThresholds};

use config::{FileConfig, ThresholdOverrides};
use pipeline::{load_detection_files, load_suite_from, load_vocabulary, suite_source, usage, SuiteSource, UsageError};

pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const COMPARISON_FILE: &str = "comparison.tsv";

#[derive(Debug, Parser)]
#[command(
    name = "t2i-eval",
    version,
    about = "Detection-based evaluation of text-to-image prompt following"
)]
pub struct Cli {
    /// TOML file with default values; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Raise log verbosity (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SuiteArgs {
    /// Prompt suite file (JSON lines).
    #[arg(long, conflicts_with = "seed")]
    pub suite: Option<PathBuf>,
    /// Generate the suite from this seed instead of reading a file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Vocabulary file replacing the built-in object and color lists.
    #[arg(long)]
    pub vocabulary: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ThresholdArgs {
    /// Minimum detection confidence for every task except counting [default: 0.3].
    #[arg(long)]
    pub default_confidence: Option<f64>,
    /// Minimum detection confidence for the counting task [default: 0.9].
    #[arg(long)]
    pub counting_confidence: Option<f64>,
    /// Position margin as a fraction of the summed box sizes [default: 0.1].
    #[arg(long)]
    pub position_offset_ratio: Option<f64>,
}

impl ThresholdArgs {
    fn overrides(&self) -> ThresholdOverrides {
        ThresholdOverrides {
            default_confidence: self.default_confidence,
            counting_confidence: self.counting_confidence,
            position_offset_ratio: self.position_offset_ratio,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    /// Detection files produced by an adapter; several files are shards of one run.
    #[arg(long, num_args = 1..)]
    pub detections: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Images expected per prompt; missing ones count as incorrect [default: 4].
    #[arg(long)]
    pub images_per_prompt: Option<usize>,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParameter {
    CountingConfidence,
    PositionOffset,
    DefaultConfidence,
}

impl SweepParameter {
    fn name(self) -> &'static str {
        match self {
            SweepParameter::CountingConfidence => "counting_confidence",
            SweepParameter::PositionOffset => "position_offset_ratio",
            SweepParameter::DefaultConfidence => "default_confidence",
        }
    }

    fn applies_to(self, task: Task) -> bool {
        match self {
            SweepParameter::CountingConfidence => task == Task::Counting,
            SweepParameter::PositionOffset => task == Task::Position,
            SweepParameter::DefaultConfidence => task != Task::Counting,
        }
    }

    fn apply(self, base: TaskThresholds, value: f64) -> TaskThresholds {
        let mut t = base;
        match self {
            SweepParameter::CountingConfidence => t.counting_confidence = value,
            SweepParameter::PositionOffset => t.position_offset_ratio = value,
            SweepParameter::DefaultConfidence => t.default_confidence = value,
        }
        t
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a prompt suite from a seed.
    GeneratePrompts {
        #[arg(long)]
        seed: Option<u64>,
        /// Destination file.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long)]
        vocabulary: Option<PathBuf>,
        /// Omit the generator header line.
        #[arg(long)]
        no_header: bool,
    },
    /// Check suite, detection and annotation files against their schemas.
    Validate {
        #[command(flatten)]
        suite: SuiteArgs,
        /// Detection files to check.
        #[arg(long, num_args = 1..)]
        detections: Vec<PathBuf>,
        /// Human annotation file (JSON lines).
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Verify every image and write verdicts, summary and failure analysis.
    Score {
        #[command(flatten)]
        run: RunArgs,
        /// Model name for the summary table.
        #[arg(long)]
        model: Option<String>,
    },
    /// Compare verdicts and an alignment-score baseline with human annotations.
    Agreement {
        #[command(flatten)]
        run: RunArgs,
        /// Human annotation file (JSON lines).
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Agreement with human annotations as one threshold varies.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Human annotation file (JSON lines).
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Threshold to vary; the others keep their configured values.
        #[arg(long, value_enum)]
        parameter: SweepParameter,
        /// First value of the sweep.
        #[arg(long)]
        start: f64,
        /// Last value of the sweep, inclusive.
        #[arg(long)]
        stop: f64,
        /// Distance between consecutive values.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Also select the value by stratified k-fold validation.
        #[arg(long)]
        kfold: Option<usize>,
    },
    /// Rank several models from their verdict files (NAME=PATH or PATH).
    Report {
        #[arg(required = true)]
        verdicts: Vec<String>,
        /// Output directory.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

/// Exit status for an error: 2 for invocation problems, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Run a parsed command line. `Ok(false)` means validation found problems.
pub fn run(cli: Cli) -> Result<bool> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::GeneratePrompts {
            seed,
            output,
            vocabulary,
            no_header,
        } => {
            let seed = seed
                .or(file.seed)
                .ok_or_else(|| usage("no seed given; pass --seed N (or set `seed` in the config file)"))?;
            let output = output
                .or(file.output.clone())
                .ok_or_else(|| usage("no output file given; pass --output FILE"))?;
            let vocab = load_vocabulary(vocabulary.as_deref().or(file.vocabulary.as_deref()))?;
            let mut suite = generate_suite(seed, &vocab);
            if no_header {
                suite.header = None;
            }
            suite
                .write(&output)
                .with_context(|| format!("failed to write {}", output.display()))?;
            let counts = suite.count_by_task();
            info!("wrote {} prompts to {}", suite.specs.len(), output.display());
            for (task, n) in Task::ALL.iter().zip(counts) {
                println!("{task}\t{n}");
            }
            println!("total\t{}", suite.specs.len());
            Ok(true)
        }
        Command::Validate {
            suite,
            detections,
            annotations,
        } => validate(&file, suite, detections, annotations),
        Command::Score { run, model } => score(&file, run, model),
        Command::Agreement { run, annotations } => agreement(&file, run, annotations),
        Command::Sweep {
            run,
            annotations,
            parameter,
            start,
            stop,
            step,
            kfold,
        } => sweep(
            &file,
            run,
            annotations,
            parameter,
            SweepRange { start, stop, step },
            kfold,
        ),
        Command::Report { verdicts, output } => report(&file, &verdicts, output),
    }
}

fn validate(
    file: &FileConfig,
    args: SuiteArgs,
    detections: Vec<PathBuf>,
    annotations: Option<PathBuf>,
) -> Result<bool> {
    let vocab = load_vocabulary(args.vocabulary.as_deref().or(file.vocabulary.as_deref()))?;
    let suite_path = args.suite.or(file.suite.clone());
    let detections = if detections.is_empty() {
        file.detections.clone()
    } else {
        detections
    };
    let annotations = annotations.or(file.annotations.clone());
    if suite_path.is_none() && detections.is_empty() && annotations.is_none() {
        return Err(usage(
            "nothing to validate; pass --suite, --detections or --annotations",
        ));
    }
    let mut ok = true;
    let mut report = |what: &str, path: &Path, result: Result<String>| match result {
        Ok(detail) => println!("ok\t{what}\t{}\t{detail}", path.display()),
        Err(e) => {
            ok = false;
            eprintln!("error\t{what}\t{}\t{e:#}", path.display());
        }
    };

    let mut suite: Option<Suite> = None;
    if let Some(path) = &suite_path {
        let loaded = load_suite(path, &vocab).map_err(anyhow::Error::from);
        let detail = loaded.as_ref().map(|s| format!("{} prompts", s.specs.len()));
        report("suite", path, detail.map_err(|e| anyhow::anyhow!("{e:#}")));
        suite = loaded.ok();
    } else if let Some(seed) = args.seed.or(file.seed) {
        suite = Some(generate_suite(seed, &vocab));
    }
    for path in &detections {
        let result = load_detections(path, &vocab)
            .map_err(anyhow::Error::from)
            .and_then(|d| {
                if let Some(s) = &suite {
                    let unresolved = d.unresolved_prompt_ids(s);
                    if !unresolved.is_empty() {
                        bail!("unknown prompt ids: {}", unresolved.join(", "));
                    }
                }
                Ok(format!("{} records", d.records.len()))
            });
        report("detections", path, result);
    }
    if let Some(path) = &annotations {
        let result = load_annotations(path).map_err(anyhow::Error::from).and_then(|records| {
            let Some(s) = &suite else {
                return Ok(format!(
                    "{} annotations (prompt ids not checked without a suite)",
                    records.len()
                ));
            };
            let judged = judge_images(s, &records);
            if judged.exclusions.is_empty() {
                Ok(format!("{} annotations", records.len()))
            } else {
                let reasons: Vec<String> = judged
                    .exclusions
                    .iter()
                    .map(|e| format!("{} {} {}: {}", e.prompt_id, e.image_path, e.annotator, e.reason))
                    .collect();
                bail!("{} incomplete annotations: {}", reasons.len(), reasons.join("; "))
            }
        });
        report("annotations", path, result);
    }
    Ok(ok)
}

struct Resolved {
    source: SuiteSource,
    vocabulary: Option<PathBuf>,
    suite: Suite,
    detection_files: Vec<pipeline::LoadedDetections>,
    records: Vec<ImageDetections>,
    output: PathBuf,
    images_per_prompt: usize,
    thresholds: TaskThresholds,
}

fn resolve(file: &FileConfig, run: RunArgs) -> Result<Resolved> {
    let source = suite_source(run.suite.suite, run.suite.seed, file.suite.clone(), file.seed)?;
    let vocabulary = run.suite.vocabulary.or(file.vocabulary.clone());
    let vocab = load_vocabulary(vocabulary.as_deref())?;
    let thresholds = run.thresholds.overrides().over(file.thresholds).resolve();
    thresholds.validate().map_err(|e| usage(e.to_string()))?;
    let images_per_prompt = run
        .images_per_prompt
        .or(file.images_per_prompt)
        .unwrap_or(DEFAULT_IMAGES_PER_PROMPT);
    if images_per_prompt == 0 {
        return Err(usage("--images-per-prompt must be at least 1"));
    }
    let output = run
        .output
        .or(file.output.clone())
        .ok_or_else(|| usage("no output directory given; pass --output DIR (or set `output` in the config file)"))?;
    let suite = load_suite_from(&source, &vocab)?;
    let detections = if run.detections.is_empty() {
        file.detections.clone()
    } else {
        run.detections
    };
    let (detection_files, records) = load_detection_files(&detections, &vocab, &suite)?;
    Ok(Resolved {
        source,
        vocabulary,
        suite,
        detection_files,
        records,
        output,
        images_per_prompt,
        thresholds,
    })
}

fn manifest(command: &str, r: &Resolved, extra: serde_json::Value, outputs: &[&str]) -> serde_json::Value {
    let mut m = json!({
        "command": command,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "suite": r.source,
        "prompts": r.suite.specs.len(),
        "vocabulary": r.vocabulary.as_ref().map_or("builtin".to_string(), |p| p.display().to_string()),
        "detections": r.detection_files,
        "thresholds": r.thresholds,
        "images_per_prompt": r.images_per_prompt,
        "position_pairing": POSITION_PAIRING,
        "outputs": outputs,
    });
    if let (Some(obj), serde_json::Value::Object(more)) = (m.as_object_mut(), extra) {
        obj.extend(more);
    }
    m
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes()).with_context(|| format!("failed to write {}", path.display()))
}

fn score(file: &FileConfig, run: RunArgs, model: Option<String>) -> Result<bool> {
    let r = resolve(file, run)?;
    let model = model
        .or(file.model.clone())
        .or_else(|| r.detection_files.iter().find_map(|d| d.header.model.clone()))
        .unwrap_or_else(|| "model".into());
    let verified = pipeline::verify_run(&r.suite, &r.records, &r.thresholds, r.images_per_prompt)?;
    let scores = score_model(&model, &verified.verdicts)?.with_alignment_score(verified.alignment_score);

    let verdict_path = r.output.join(VERDICTS_FILE);
    write_atomic(&verdict_path, jsonl::to_lines(&verified.verdicts)?.as_bytes())
        .with_context(|| format!("failed to write {}", verdict_path.display()))?;
    reporting::emit_summary(std::slice::from_ref(&scores), &r.output)?;
    let analysis = reporting::emit_failure_analysis(&verified.verdicts, &r.output)?;

    let outputs = [
        VERDICTS_FILE,
        reporting::SUMMARY_TSV,
        reporting::SUMMARY_TXT,
        reporting::FAILURE_JSON,
        reporting::POSITION_TSV,
        reporting::FAILURE_COUNTS_TSV,
    ];
    let extra = json!({
        "model": model,
        "images_verified": verified.verdicts.len(),
        "missing_images": verified.missing_images,
        "incorrect": analysis.total_incorrect,
        "overall": scores.overall,
        "alignment_score": scores.alignment_score,
    });
    write_json(&r.output.join(MANIFEST_FILE), &manifest("score", &r, extra, &outputs))?;
    print!("{}", reporting::summary_text(&[scores])?);
    Ok(true)
}

fn load_human(
    file: &FileConfig,
    annotations: Option<PathBuf>,
    suite: &Suite,
) -> Result<(PathBuf, t2i_eval::agreement::HumanJudgements)> {
    let path = annotations.or(file.annotations.clone()).ok_or_else(|| {
        usage("no annotation file given; pass --annotations FILE (or set `annotations` in the config file)")
    })?;
    let records = load_annotations(&path).with_context(|| format!("invalid annotation file {}", path.display()))?;
    let human = judge_images(suite, &records);
    if !human.exclusions.is_empty() {
        log::warn!("{} incomplete annotations excluded", human.exclusions.len());
    }
    Ok((path, human))
}

fn alignment_map(records: &[ImageDetections]) -> BTreeMap<(String, String), f64> {
    records
        .iter()
        .filter_map(|r| {
            r.alignment_score
                .map(|s| ((r.prompt_id.clone(), r.image_path.clone()), s))
        })
        .collect()
}

fn agreement(file: &FileConfig, run: RunArgs, annotations: Option<PathBuf>) -> Result<bool> {
    let r = resolve(file, run)?;
    let (path, human) = load_human(file, annotations, &r.suite)?;
    let verified = pipeline::verify_run(&r.suite, &r.records, &r.thresholds, r.images_per_prompt)?;
    let report = agreement_report(&human, &verified.verdicts, &alignment_map(&r.records));
    reporting::emit_agreement(&report, &r.output)?;
    let extra = json!({
        "annotations": path.display().to_string(),
        "judged_images": human.images.len(),
        "excluded_annotations": human.exclusions.len(),
    });
    let outputs = [reporting::AGREEMENT_JSON, reporting::AGREEMENT_TSV];
    write_json(
        &r.output.join(MANIFEST_FILE),
        &manifest("agreement", &r, extra, &outputs),
    )?;
    print!("{}", reporting::agreement_tsv(&report));
    Ok(true)
}

struct SweepItem<'a> {
    judgement: &'a ImageJudgement,
    spec: &'a t2i_eval::PromptSpec,
    detections: Option<&'a ImageDetections>,
}

impl SweepItem<'_> {
    fn predict(&self, thresholds: &TaskThresholds) -> Result<bool> {
        let verdict: ImageVerdict = match self.detections {
            Some(d) => verify_image(self.spec, d, thresholds)?,
            None => verify_missing_image(self.spec, &self.judgement.image_path, thresholds)?,
        };
        Ok(verdict.correct)
    }
}

fn sweep(
    file: &FileConfig,
    run: RunArgs,
    annotations: Option<PathBuf>,
    parameter: SweepParameter,
    range: SweepRange,
    kfold: Option<usize>,
) -> Result<bool> {
    let values = range.values().map_err(|e| usage(e.to_string()))?;
    let r = resolve(file, run)?;
    for &v in &values {
        parameter
            .apply(r.thresholds, v)
            .validate()
            .map_err(|e| usage(format!("sweep value out of range: {e}")))?;
    }
    let (path, human) = load_human(file, annotations, &r.suite)?;
    let by_image: BTreeMap<(&str, &str), &ImageDetections> = r
        .records
        .iter()
        .map(|d| ((d.prompt_id.as_str(), d.image_path.as_str()), d))
        .collect();
    let items: Vec<SweepItem<'_>> = human
        .images
        .iter()
        .filter(|j| parameter.applies_to(j.task))
        .map(|j| SweepItem {
            judgement: j,
            spec: r
                .suite
                .get(&j.prompt_id)
                .expect("judged images resolve to suite prompts"),
            detections: by_image.get(&(j.prompt_id.as_str(), j.image_path.as_str())).copied(),
        })
        .collect();
    if items.is_empty() {
        bail!("no annotated images for the tasks affected by {}", parameter.name());
    }
    let human_labels: Vec<bool> = items.iter().map(|i| i.judgement.consensus.correct).collect();

    // predictions for every grid value, computed once
    let mut predictions: Vec<Vec<bool>> = Vec::with_capacity(values.len());
    for &v in &values {
        let t = parameter.apply(r.thresholds, v);
        predictions.push(items.iter().map(|i| i.predict(&t)).collect::<Result<_>>()?);
    }
    let curve = threshold_sweep(&values, |v| {
        let i = values.iter().position(|&x| x == v).expect("value from grid");
        cohens_kappa(&predictions[i], &human_labels).unwrap_or(0.0)
    });

    let kfold = match kfold {
        None => None,
        Some(k) => {
            let indexed: Vec<usize> = (0..items.len()).collect();
            let grid: Vec<usize> = (0..values.len()).collect();
            let result = kfold_validate(
                &grid,
                k,
                &indexed,
                |&i| items[i].judgement.task,
                |&g, subset: &[&usize]| {
                    let pred: Vec<bool> = subset.iter().map(|&&i| predictions[g][i]).collect();
                    let truth: Vec<bool> = subset.iter().map(|&&i| human_labels[i]).collect();
                    percent_agreement(&pred, &truth).unwrap_or(0.0)
                },
            )
            .map_err(|e| usage(e.to_string()))?;
            Some(t2i_eval::agreement::KFoldResult {
                k: result.k,
                selected: result.selected.iter().map(|&g| values[g]).collect(),
                train_agreement: result.train_agreement,
                validation_agreement: result.validation_agreement,
                mean: result.mean,
                std_dev: result.std_dev,
            })
        }
    };

    let report = SweepReport {
        parameter: parameter.name().into(),
        curve,
        kfold,
    };
    reporting::emit_sweep(&report, &r.output)?;
    let stem = format!("sweep_{}", parameter.name());
    let extra = json!({
        "annotations": path.display().to_string(),
        "parameter": parameter.name(),
        "range": range,
        "images": items.len(),
    });
    let outputs = [format!("{stem}.json"), format!("{stem}.tsv")];
    let outputs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    write_json(
        &r.output.join(format!("{stem}_manifest.json")),
        &manifest("sweep", &r, extra, &outputs),
    )?;
    print!("{}", reporting::sweep_tsv(&report));
    Ok(true)
}

fn read_verdicts(path: &Path) -> Result<Vec<ImageVerdict>> {
    let lines = jsonl::read_lines(jsonl::open(path)?)?;
    lines
        .iter()
        .map(|(n, l)| jsonl::parse_line(*n, l).map_err(anyhow::Error::from))
        .collect::<Result<_>>()
        .with_context(|| format!("invalid verdict file {}", path.display()))
}

/// Model name and alignment score recorded by `score` next to a verdict file.
fn sibling_manifest(path: &Path) -> (Option<String>, Option<f64>) {
    let manifest = path.parent().map(|d| d.join(MANIFEST_FILE));
    let value: Option<serde_json::Value> = manifest
        .and_then(|m| fs::read_to_string(m).ok())
        .and_then(|t| serde_json::from_str(&t).ok());
    match value {
        Some(v) => (
            v.get("model").and_then(|m| m.as_str()).map(str::to_string),
            v.get("alignment_score").and_then(serde_json::Value::as_f64),
        ),
        None => (None, None),
    }
}

fn report(file: &FileConfig, inputs: &[String], output: Option<PathBuf>) -> Result<bool> {
    let output = output
        .or(file.output.clone())
        .ok_or_else(|| usage("no output directory given; pass --output DIR"))?;
    let mut scores: Vec<ModelScore> = Vec::new();
    for input in inputs {
        let (name, path) = match input.split_once('=') {
            Some((name, path)) => (Some(name.to_string()), PathBuf::from(path)),
            None => (None, PathBuf::from(input)),
        };
        let verdicts = read_verdicts(&path)?;
        let (manifest_name, alignment) = sibling_manifest(&path);
        let name = name
            .or(manifest_name)
            .or_else(|| {
                path.parent()
                    .and_then(Path::file_name)
                    .map(|n| n.to_string_lossy().into_owned())
            })
            .unwrap_or_else(|| input.clone());
        if scores.iter().any(|s| s.model == name) {
            return Err(usage(format!(
                "model name {name} used twice; name inputs with NAME=PATH"
            )));
        }
        let score = score_model(&name, &verdicts).with_context(|| format!("cannot score {}", path.display()))?;
        scores.push(score.with_alignment_score(alignment));
    }
    reporting::emit_summary(&scores, &output)?;
    let mut table = String::from("rank\tmodel\toverall");
    for t in Task::ALL {
        table.push_str(&format!("\tdelta_{t}"));
    }
    table.push('\n');
    for r in compare_models(&scores) {
        table.push_str(&format!("{}\t{}\t{:.4}", r.rank, r.model, r.overall));
        for d in &r.deltas {
            table.push_str(&format!("\t{d:.4}"));
        }
        table.push('\n');
    }
    let path = output.join(COMPARISON_FILE);
    write_atomic(&path, table.as_bytes()).with_context(|| format!("failed to write {}", path.display()))?;
    print!("{}", reporting::summary_text(&scores)?);
    Ok(true)
}
