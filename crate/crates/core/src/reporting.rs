//! Summary tables, failure-mode analysis and agreement reports.
//!
//! Every emitter writes through a temporary file and a rename, so partially
//! written reports never appear under their final names.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::{AgreementReport, AgreementStats, KFoldResult, SweepCurve};
use crate::jsonl::write_atomic;
use crate::prompt::Task;
use crate::scoring::{compare_models, ModelScore};
use crate::verifier::{Direction, FailureKind, ImageVerdict};
use crate::vocab::Relation;

pub const SUMMARY_TSV: &str = "summary.tsv";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const FAILURE_JSON: &str = "failure_analysis.json";
pub const POSITION_TSV: &str = "position_histogram.tsv";
pub const FAILURE_COUNTS_TSV: &str = "failure_counts.tsv";
pub const AGREEMENT_JSON: &str = "agreement.json";
pub const AGREEMENT_TSV: &str = "agreement.tsv";

/// Share of a relation's misses that must land in one observed direction
/// before the row is flagged as biased.
pub const BIAS_SHARE: f64 = 0.75;
/// Rows with fewer misses than this are never flagged.
pub const BIAS_MIN_ROW: usize = 2;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no model scores to report")]
    NoModels,
    #[error("failed to write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("failed to serialize report: {0}")]
    Serialize(#[from] serde_json::Error),
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, ReportError> {
    let path = dir.join(name);
    write_atomic(&path, contents.as_bytes()).map_err(|source| ReportError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn ranked(scores: &[ModelScore]) -> Vec<&ModelScore> {
    compare_models(scores)
        .iter()
        .map(|r| {
            scores
                .iter()
                .find(|s| s.model == r.model)
                .expect("ranked model comes from input")
        })
        .collect()
}

/// Tab-separated summary: model, the six tasks, overall, then the alignment
/// score column when any model has one. Rows sorted by overall score.
pub fn summary_tsv(scores: &[ModelScore]) -> Result<String, ReportError> {
    if scores.is_empty() {
        return Err(ReportError::NoModels);
    }
    let with_alignment = scores.iter().any(|s| s.alignment_score.is_some());
    let mut out = String::from("model");
    for task in Task::ALL {
        out.push('\t');
        out.push_str(task.as_str());
    }
    out.push_str("\toverall");
    if with_alignment {
        out.push_str("\talignment_score");
    }
    out.push('\n');
    for s in ranked(scores) {
        out.push_str(&s.model);
        for task in Task::ALL {
            let f = s.task(task).map_or(f64::NAN, |t| t.fraction);
            let _ = write!(out, "\t{f:.4}");
        }
        let _ = write!(out, "\t{:.4}", s.overall);
        if with_alignment {
            match s.alignment_score {
                Some(a) => {
                    let _ = write!(out, "\t{a:.4}");
                }
                None => out.push('\t'),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

/// Human-readable version of [`summary_tsv`] with two-decimal scores.
pub fn summary_text(scores: &[ModelScore]) -> Result<String, ReportError> {
    if scores.is_empty() {
        return Err(ReportError::NoModels);
    }
    let with_alignment = scores.iter().any(|s| s.alignment_score.is_some());
    let mut header = vec!["Model".to_string()];
    header.extend(Task::ALL.iter().map(|t| t.title().to_string()));
    header.push("Overall".into());
    if with_alignment {
        header.push("CLIPScore".into());
    }
    let mut rows = vec![header];
    for s in ranked(scores) {
        let mut row = vec![s.model.clone()];
        row.extend(
            Task::ALL
                .iter()
                .map(|&t| format!("{:.2}", s.task(t).map_or(f64::NAN, |x| x.fraction))),
        );
        row.push(format!("{:.2}", s.overall));
        if with_alignment {
            row.push(s.alignment_score.map(|a| format!("{a:.2}")).unwrap_or_default());
        }
        rows.push(row);
    }
    Ok(aligned(&rows))
}

/// Write `summary.tsv` and `summary.txt` into `dir`.
pub fn emit_summary(scores: &[ModelScore], dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let tsv = summary_tsv(scores)?;
    let txt = summary_text(scores)?;
    Ok(vec![write(dir, SUMMARY_TSV, &tsv)?, write(dir, SUMMARY_TXT, &txt)?])
}

/// Observed direction counts for failed position checks, one row per required
/// relation in [`Relation::ALL`] order, columns in [`Direction::ALL`] order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionHistogram {
    pub columns: Vec<Direction>,
    pub rows: Vec<HistogramRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub required: Relation,
    pub counts: Vec<usize>,
}

impl HistogramRow {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

impl PositionHistogram {
    fn empty() -> Self {
        PositionHistogram {
            columns: Direction::ALL.to_vec(),
            rows: Relation::ALL
                .iter()
                .map(|&required| HistogramRow {
                    required,
                    counts: vec![0; Direction::ALL.len()],
                })
                .collect(),
        }
    }

    pub fn count(&self, required: Relation, observed: Direction) -> usize {
        let col = Direction::ALL
            .iter()
            .position(|&d| d == observed)
            .expect("direction listed");
        self.rows
            .iter()
            .find(|r| r.required == required)
            .map_or(0, |r| r.counts[col])
    }

    pub fn total(&self) -> usize {
        self.rows.iter().map(HistogramRow::total).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasFlag {
    pub required: Relation,
    pub observed: Direction,
    pub count: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFailures {
    pub task: Task,
    pub evaluated: usize,
    pub incorrect: usize,
    /// Keyed by failure category name; every category is listed.
    pub categories: BTreeMap<String, usize>,
    /// Incorrect verdicts carrying no failure detail.
    pub unclassified: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureAnalysis {
    pub total_incorrect: usize,
    pub per_task: Vec<TaskFailures>,
    pub position_histogram: PositionHistogram,
    pub position_bias: Vec<BiasFlag>,
    pub color_attr_failures: usize,
    pub color_swaps: usize,
    /// Swaps among attribute-binding failures; absent when there are none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swap_rate: Option<f64>,
}

/// Tally failure categories, the position-bias histogram and color swaps.
pub fn analyze_failures(verdicts: &[ImageVerdict]) -> FailureAnalysis {
    let mut per_task: Vec<TaskFailures> = Task::ALL
        .iter()
        .map(|&task| TaskFailures {
            task,
            evaluated: 0,
            incorrect: 0,
            categories: FailureKind::ALL.iter().map(|k| (k.as_str().to_string(), 0)).collect(),
            unclassified: 0,
        })
        .collect();
    let mut histogram = PositionHistogram::empty();
    for v in verdicts {
        let row = &mut per_task[v.tag.index()];
        row.evaluated += 1;
        if v.correct {
            continue;
        }
        row.incorrect += 1;
        let Some(failure) = &v.failure else {
            row.unclassified += 1;
            continue;
        };
        *row.categories.get_mut(failure.kind.as_str()).expect("category listed") += 1;
        if let (FailureKind::WrongPosition, Some(miss)) = (failure.kind, &failure.position) {
            let r = Relation::ALL
                .iter()
                .position(|&x| x == miss.required)
                .expect("relation listed");
            let c = Direction::ALL
                .iter()
                .position(|&d| d == miss.observed)
                .expect("direction listed");
            histogram.rows[r].counts[c] += 1;
        }
    }

    let position_bias = histogram
        .rows
        .iter()
        .filter_map(|row| {
            let total = row.total();
            if total < BIAS_MIN_ROW {
                return None;
            }
            // first column wins ties so the flag is deterministic
            let (col, &count) = row
                .counts
                .iter()
                .enumerate()
                .fold((0, &0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let share = count as f64 / total as f64;
            (share >= BIAS_SHARE).then(|| BiasFlag {
                required: row.required,
                observed: Direction::ALL[col],
                count,
                share,
            })
        })
        .collect();

    let attr = &per_task[Task::ColorAttr.index()];
    let color_attr_failures = attr.incorrect;
    let color_swaps = attr.categories[FailureKind::ColorSwap.as_str()];
    FailureAnalysis {
        total_incorrect: per_task.iter().map(|t| t.incorrect).sum(),
        per_task,
        position_histogram: histogram,
        position_bias,
        color_attr_failures,
        color_swaps,
        swap_rate: (color_attr_failures > 0).then(|| color_swaps as f64 / color_attr_failures as f64),
    }
}

pub fn position_histogram_tsv(h: &PositionHistogram) -> String {
    let mut out = String::from("required");
    for d in &h.columns {
        out.push('\t');
        out.push_str(d.as_str());
    }
    out.push_str("\ttotal\n");
    for row in &h.rows {
        out.push_str(row.required.as_str());
        for c in &row.counts {
            let _ = write!(out, "\t{c}");
        }
        let _ = writeln!(out, "\t{}", row.total());
    }
    out
}

pub fn failure_counts_tsv(a: &FailureAnalysis) -> String {
    let mut out = String::from("task\tevaluated\tincorrect");
    for k in FailureKind::ALL {
        out.push('\t');
        out.push_str(k.as_str());
    }
    out.push_str("\tunclassified\n");
    for t in &a.per_task {
        let _ = write!(out, "{}\t{}\t{}", t.task, t.evaluated, t.incorrect);
        for k in FailureKind::ALL {
            let _ = write!(out, "\t{}", t.categories[k.as_str()]);
        }
        let _ = writeln!(out, "\t{}", t.unclassified);
    }
    out
}

/// Write `failure_analysis.json`, `position_histogram.tsv` and
/// `failure_counts.tsv` into `dir`.
pub fn emit_failure_analysis(verdicts: &[ImageVerdict], dir: &Path) -> Result<FailureAnalysis, ReportError> {
    let analysis = analyze_failures(verdicts);
    write(dir, FAILURE_JSON, &to_json(&analysis)?)?;
    write(dir, POSITION_TSV, &position_histogram_tsv(&analysis.position_histogram))?;
    write(dir, FAILURE_COUNTS_TSV, &failure_counts_tsv(&analysis))?;
    Ok(analysis)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn threshold_cell(t: Option<f64>) -> String {
    match t {
        Some(t) if t == f64::INFINITY => "inf".into(),
        Some(t) if t == f64::NEG_INFINITY => "-inf".into(),
        other => opt(other),
    }
}

fn agreement_row(out: &mut String, name: &str, s: &AgreementStats) {
    let base = s.baseline.as_ref();
    let _ = writeln!(
        out,
        "{name}\t{}\t{:.4}\t{:.4}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.4}",
        s.images,
        s.verifier_agreement,
        s.verifier_kappa,
        opt(s.interannotator_agreement),
        s.unanimous_images,
        opt(s.unanimous_verifier_agreement),
        threshold_cell(base.and_then(|b| b.threshold)),
        opt(base.map(|b| b.agreement)),
        opt(base.map(|b| b.kappa)),
        opt(base.and_then(|b| b.unanimous_agreement)),
        s.tied_images,
        s.mean_overall_fit,
    );
}

pub fn agreement_tsv(report: &AgreementReport) -> String {
    let mut out = String::from(
        "task\timages\tverifier_agreement\tverifier_kappa\tinterannotator_agreement\tunanimous_images\t\
         unanimous_verifier_agreement\tbaseline_threshold\tbaseline_agreement\tbaseline_kappa\t\
         baseline_unanimous_agreement\ttied_images\tmean_overall_fit\n",
    );
    for t in &report.per_task {
        agreement_row(&mut out, t.task.as_str(), &t.stats);
    }
    agreement_row(&mut out, "overall", &report.overall);
    out
}

/// Write `agreement.json` and `agreement.tsv` into `dir`.
pub fn emit_agreement(report: &AgreementReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    Ok(vec![
        write(dir, AGREEMENT_JSON, &to_json(report)?)?,
        write(dir, AGREEMENT_TSV, &agreement_tsv(report))?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: String,
    pub curve: SweepCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kfold: Option<KFoldResult<f64>>,
}

pub fn sweep_tsv(report: &SweepReport) -> String {
    let mut out = format!("{}\tkappa\n", report.parameter);
    for p in &report.curve.points {
        let _ = writeln!(out, "{}\t{:.6}", p.value, p.kappa);
    }
    out
}

/// Write `sweep_<parameter>.json` and `sweep_<parameter>.tsv` into `dir`.
pub fn emit_sweep(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let stem = format!("sweep_{}", report.parameter);
    Ok(vec![
        write(dir, &format!("{stem}.json"), &to_json(report)?)?,
        write(dir, &format!("{stem}.tsv"), &sweep_tsv(report))?,
    ])
}
