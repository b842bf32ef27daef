//! Agreement between automated verdicts, human annotations and a thresholded
//! image-text alignment baseline.
//!
//! Human answers are binarized from the fine-grained questions (counts,
//! colors, positions), not from the 1-4 overall fit score; the fit score is
//! carried through to reports for auditing.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, FormatError};
use crate::prompt::{PromptSpec, Suite, Task};
use crate::verifier::ImageVerdict;
use crate::vocab::Relation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("at least one example is required")]
    Empty,
    #[error("k-fold validation needs k >= 2, got {0}")]
    BadFoldCount(usize),
    #[error("k-fold validation with k = {k} needs at least {k} examples, got {n}")]
    InsufficientData { k: usize, n: usize },
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("invalid sweep range: {0}")]
    BadRange(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizontalAnswer {
    Left,
    Right,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerticalAnswer {
    Above,
    Below,
    Neither,
}

/// Where the first-mentioned object sits relative to the second, as seen by
/// the annotator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionAnswer {
    #[serde(default)]
    pub horizontal: Option<HorizontalAnswer>,
    #[serde(default)]
    pub vertical: Option<VerticalAnswer>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectAnswer {
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(default)]
    pub count: Option<u32>,
    /// Every color the annotator selected for this object type.
    #[serde(default)]
    pub colors: Option<Vec<String>>,
    /// 1-3, recorded but not used for correctness.
    #[serde(default)]
    pub realism: Option<u8>,
}

/// One annotator's answers for one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub prompt_id: String,
    pub image_path: String,
    pub annotator: String,
    pub objects: Vec<ObjectAnswer>,
    #[serde(default)]
    pub position: Option<PositionAnswer>,
    pub overall_fit: u8,
}

/// An annotation left out of every statistic, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub prompt_id: String,
    pub image_path: String,
    pub annotator: String,
    pub reason: String,
}

fn parse_annotation_line(line_no: usize, line: &str) -> Result<AnnotationRecord, FormatError> {
    let record: AnnotationRecord = jsonl::parse_line(line_no, line)?;
    let invalid = |message: String| FormatError::Invalid { line: line_no, message };
    if !(1..=4).contains(&record.overall_fit) {
        return Err(invalid(format!("overall_fit {} outside 1-4", record.overall_fit)));
    }
    if let Some(r) = record
        .objects
        .iter()
        .find_map(|o| o.realism.filter(|r| !(1..=3).contains(r)))
    {
        return Err(invalid(format!("realism {r} outside 1-3")));
    }
    Ok(record)
}

pub fn parse_annotations(reader: impl BufRead) -> Result<Vec<AnnotationRecord>, FormatError> {
    jsonl::read_lines(reader)?
        .iter()
        .map(|(n, line)| parse_annotation_line(*n, line))
        .collect()
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>, FormatError> {
    parse_annotations(jsonl::open(path)?)
}

/// Decide whether one annotator judged the image correct for its prompt.
///
/// Counting needs the exact count; other tasks need at least the required
/// count (no upper limit). Color tasks need the required color among the
/// selected colors; position needs the stated direction on the relevant axis.
/// A missing answer yields an exclusion reason instead of a label.
pub fn binarize_annotation(spec: &PromptSpec, record: &AnnotationRecord) -> Result<bool, String> {
    if spec.id != record.prompt_id {
        return Err(format!(
            "annotation for {} does not match prompt {}",
            record.prompt_id, spec.id
        ));
    }
    if spec.tag.arity() == 1 && record.position.is_some() {
        return Err("position answers given for a single-object prompt".into());
    }
    let mut correct = true;
    for req in &spec.include {
        let answer = record
            .objects
            .iter()
            .find(|o| o.class_name == req.class_name)
            .ok_or_else(|| format!("no answers for {}", req.class_name))?;
        let count = answer
            .count
            .ok_or_else(|| format!("missing count for {}", req.class_name))?;
        correct &= if spec.tag == Task::Counting {
            count == req.count
        } else {
            count >= req.count
        };
        if let Some(color) = &req.color {
            let selected = answer
                .colors
                .as_ref()
                .filter(|c| !c.is_empty())
                .ok_or_else(|| format!("missing colors for {}", req.class_name))?;
            correct &= selected.contains(color);
        }
    }
    if let Some((_, relation, _)) = spec.relation() {
        let answer = record.position.ok_or("missing position answers")?;
        let matches = match relation {
            Relation::LeftOf | Relation::RightOf => {
                let h = answer.horizontal.ok_or("missing horizontal position answer")?;
                matches!(
                    (relation, h),
                    (Relation::LeftOf, HorizontalAnswer::Left) | (Relation::RightOf, HorizontalAnswer::Right)
                )
            }
            Relation::Above | Relation::Below => {
                let v = answer.vertical.ok_or("missing vertical position answer")?;
                matches!(
                    (relation, v),
                    (Relation::Above, VerticalAnswer::Above) | (Relation::Below, VerticalAnswer::Below)
                )
            }
        };
        correct &= matches;
    }
    Ok(correct)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consensus {
    pub correct: bool,
    pub unanimous: bool,
    /// Even split; resolved as incorrect.
    pub tie: bool,
    pub votes: usize,
    pub positive: usize,
}

/// Majority vote over binarized annotations. Ties resolve to incorrect.
pub fn consensus(labels: &[bool]) -> Result<Consensus, AgreementError> {
    if labels.is_empty() {
        return Err(AgreementError::Empty);
    }
    let positive = labels.iter().filter(|&&l| l).count();
    let negative = labels.len() - positive;
    Ok(Consensus {
        correct: positive > negative,
        unanimous: positive == 0 || negative == 0,
        tie: positive == negative,
        votes: labels.len(),
        positive,
    })
}

fn check_lengths(a: &[bool], b: &[bool]) -> Result<(), AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(AgreementError::Empty);
    }
    Ok(())
}

/// Fraction of positions where the two label vectors agree.
pub fn percent_agreement(pred: &[bool], human: &[bool]) -> Result<f64, AgreementError> {
    check_lengths(pred, human)?;
    let same = pred.iter().zip(human).filter(|(a, b)| a == b).count();
    Ok(same as f64 / pred.len() as f64)
}

/// Cohen's kappa for two binary raters, with expected agreement from the
/// product of marginals. Defined as 0 when expected agreement is 1.
pub fn cohens_kappa(pred: &[bool], human: &[bool]) -> Result<f64, AgreementError> {
    check_lengths(pred, human)?;
    let n = pred.len() as f64;
    let p_o = percent_agreement(pred, human)?;
    let pred_pos = pred.iter().filter(|&&p| p).count() as f64 / n;
    let human_pos = human.iter().filter(|&&h| h).count() as f64 / n;
    let p_e = pred_pos * human_pos + (1.0 - pred_pos) * (1.0 - human_pos);
    if p_e >= 1.0 {
        return Ok(0.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

mod threshold_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            "inf".serialize(s)
        } else if *v == f64::NEG_INFINITY {
            "-inf".serialize(s)
        } else {
            v.serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad threshold {t:?}"))),
        }
    }

    pub mod opt {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(with = "super")] f64);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

/// Best threshold for predicting "correct" as `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub agreement: f64,
}

/// Choose the alignment-score threshold with the highest agreement against
/// human labels. Candidates are -inf, midpoints between consecutive distinct
/// scores, and +inf; ties go to the smaller threshold.
pub fn tune_threshold(scores: &[f64], human: &[bool]) -> Result<ThresholdChoice, AgreementError> {
    if scores.len() != human.len() {
        return Err(AgreementError::LengthMismatch {
            left: scores.len(),
            right: human.len(),
        });
    }
    if scores.is_empty() {
        return Err(AgreementError::Empty);
    }
    let n = scores.len() as f64;
    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(human.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // at -inf every example is predicted correct
    let mut matches = human.iter().filter(|&&h| h).count() as i64;
    let mut best = ThresholdChoice {
        threshold: f64::NEG_INFINITY,
        agreement: matches as f64 / n,
    };
    let mut i = 0;
    while i < pairs.len() {
        let score = pairs[i].0;
        // move the threshold just past this group of equal scores
        while i < pairs.len() && pairs[i].0 == score {
            matches += if pairs[i].1 { -1 } else { 1 };
            i += 1;
        }
        let threshold = pairs
            .get(i)
            .map_or(f64::INFINITY, |next| score + (next.0 - score) / 2.0);
        let agreement = matches as f64 / n;
        if agreement > best.agreement {
            best = ThresholdChoice { threshold, agreement };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFoldResult<P> {
    pub k: usize,
    /// Grid value chosen on each fold's training split.
    pub selected: Vec<P>,
    pub train_agreement: Vec<f64>,
    pub validation_agreement: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across folds.
    pub std_dev: f64,
}

/// Fold assignment stratified by `stratum`: within each stratum, examples are
/// dealt to folds round-robin in input order, continuing the rotation across
/// strata so fold sizes stay balanced.
pub fn stratified_folds<T, K: Ord>(data: &[T], k: usize, stratum: impl Fn(&T) -> K) -> Vec<usize> {
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, item) in data.iter().enumerate() {
        groups.entry(stratum(item)).or_default().push(i);
    }
    let mut fold_of = vec![0; data.len()];
    let mut next = 0;
    for indices in groups.values() {
        for &i in indices {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    fold_of
}

/// K-fold selection of a parameter: on each fold pick the grid value with the
/// highest training agreement (first wins ties) and record its agreement on
/// the held-out split.
pub fn kfold_validate<P: Clone, T, K: Ord>(
    grid: &[P],
    k: usize,
    data: &[T],
    stratum: impl Fn(&T) -> K,
    agreement: impl Fn(&P, &[&T]) -> f64,
) -> Result<KFoldResult<P>, AgreementError> {
    if k < 2 {
        return Err(AgreementError::BadFoldCount(k));
    }
    if data.len() < k {
        return Err(AgreementError::InsufficientData { k, n: data.len() });
    }
    if grid.is_empty() {
        return Err(AgreementError::EmptyGrid);
    }
    let fold_of = stratified_folds(data, k, stratum);
    let mut selected = Vec::with_capacity(k);
    let mut train_agreement = Vec::with_capacity(k);
    let mut validation_agreement = Vec::with_capacity(k);
    for fold in 0..k {
        let (mut train, mut valid) = (Vec::new(), Vec::new());
        for (item, &f) in data.iter().zip(&fold_of) {
            if f == fold {
                valid.push(item);
            } else {
                train.push(item);
            }
        }
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, p) in grid.iter().enumerate() {
            let score = agreement(p, &train);
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        selected.push(grid[best].clone());
        train_agreement.push(best_score);
        validation_agreement.push(agreement(&grid[best], &valid));
    }
    let mean = validation_agreement.iter().sum::<f64>() / k as f64;
    let var = validation_agreement.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    Ok(KFoldResult {
        k,
        selected,
        train_agreement,
        validation_agreement,
        mean,
        std_dev: var.sqrt(),
    })
}

/// Inclusive arithmetic range of parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepRange {
    pub fn values(&self) -> Result<Vec<f64>, AgreementError> {
        let SweepRange { start, stop, step } = *self;
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(AgreementError::BadRange("bounds must be finite".into()));
        }
        if stop < start {
            return Err(AgreementError::BadRange(format!("stop {stop} below start {start}")));
        }
        if start == stop {
            return Ok(vec![start]);
        }
        if step <= 0.0 {
            return Err(AgreementError::BadRange(format!("step {step} must be positive")));
        }
        // tolerate float drift so that e.g. 0.3..=0.9 step 0.05 includes 0.9
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // snap to a 1e-9 grid so 0.3 + 6 * 0.1 compares equal to a 0.9 threshold
        Ok((0..=n)
            .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
    /// Highest-kappa point; the earliest wins ties.
    pub best: Option<SweepPoint>,
}

/// Evaluate `kappa_at` for each parameter value.
pub fn threshold_sweep(values: &[f64], kappa_at: impl Fn(f64) -> f64) -> SweepCurve {
    let points: Vec<SweepPoint> = values
        .iter()
        .map(|&value| SweepPoint {
            value,
            kappa: kappa_at(value),
        })
        .collect();
    let best = points
        .iter()
        .copied()
        .fold(None, |best: Option<SweepPoint>, p| match best {
            Some(b) if p.kappa <= b.kappa => Some(b),
            _ => Some(p),
        });
    SweepCurve { points, best }
}

/// Binarized human labels for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageJudgement {
    pub prompt_id: String,
    pub image_path: String,
    pub task: Task,
    pub labels: Vec<bool>,
    pub consensus: Consensus,
    pub mean_overall_fit: f64,
}

impl ImageJudgement {
    /// Mean agreement over all annotator pairs; `None` with fewer than two.
    pub fn pairwise_agreement(&self) -> Option<f64> {
        let n = self.labels.len();
        if n < 2 {
            return None;
        }
        let mut same = 0usize;
        let mut pairs = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                pairs += 1;
                if self.labels[i] == self.labels[j] {
                    same += 1;
                }
            }
        }
        Some(same as f64 / pairs as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HumanJudgements {
    pub images: Vec<ImageJudgement>,
    pub exclusions: Vec<Exclusion>,
}

/// Binarize every annotation and group by image. Incomplete annotations are
/// excluded and listed with their reason.
pub fn judge_images(suite: &Suite, records: &[AnnotationRecord]) -> HumanJudgements {
    // (prompt id, image path) -> (task, labels, overall fit scores)
    type Group = (Task, Vec<bool>, Vec<u8>);
    let mut grouped: BTreeMap<(String, String), Group> = BTreeMap::new();
    let mut exclusions = Vec::new();
    for record in records {
        let exclude = |reason: String| Exclusion {
            prompt_id: record.prompt_id.clone(),
            image_path: record.image_path.clone(),
            annotator: record.annotator.clone(),
            reason,
        };
        let Some(spec) = suite.get(&record.prompt_id) else {
            exclusions.push(exclude(format!("unknown prompt id {}", record.prompt_id)));
            continue;
        };
        match binarize_annotation(spec, record) {
            Ok(label) => {
                let entry = grouped
                    .entry((record.prompt_id.clone(), record.image_path.clone()))
                    .or_insert_with(|| (spec.tag, Vec::new(), Vec::new()));
                entry.1.push(label);
                entry.2.push(record.overall_fit);
            }
            Err(reason) => exclusions.push(exclude(reason)),
        }
    }
    let images = grouped
        .into_iter()
        .map(|((prompt_id, image_path), (task, labels, fits))| ImageJudgement {
            consensus: consensus(&labels).expect("group has at least one label"),
            mean_overall_fit: fits.iter().map(|&f| f64::from(f)).sum::<f64>() / fits.len() as f64,
            prompt_id,
            image_path,
            task,
            labels,
        })
        .collect();
    HumanJudgements { images, exclusions }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStats {
    /// Tuned threshold; absent for the overall row, which applies each
    /// task's own threshold.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "threshold_serde::opt")]
    pub threshold: Option<f64>,
    pub agreement: f64,
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unanimous_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub images: usize,
    pub verifier_agreement: f64,
    pub verifier_kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interannotator_agreement: Option<f64>,
    pub unanimous_images: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unanimous_verifier_agreement: Option<f64>,
    pub tied_images: usize,
    pub mean_overall_fit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAgreement {
    pub task: Task,
    #[serde(flatten)]
    pub stats: AgreementStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub per_task: Vec<TaskAgreement>,
    pub overall: AgreementStats,
    pub excluded_annotations: usize,
    pub exclusion_reasons: BTreeMap<String, usize>,
    /// Judged images with no matching verdict; left out of every statistic.
    pub images_without_verdict: usize,
}

struct Joined<'a> {
    judgement: &'a ImageJudgement,
    predicted: bool,
    alignment: Option<f64>,
}

fn stats_for(rows: &[&Joined<'_>], baseline_threshold: Option<f64>) -> Option<AgreementStats> {
    if rows.is_empty() {
        return None;
    }
    let pred: Vec<bool> = rows.iter().map(|r| r.predicted).collect();
    let human: Vec<bool> = rows.iter().map(|r| r.judgement.consensus.correct).collect();
    let pairwise: Vec<f64> = rows.iter().filter_map(|r| r.judgement.pairwise_agreement()).collect();
    let unanimous: Vec<&&Joined<'_>> = rows.iter().filter(|r| r.judgement.consensus.unanimous).collect();
    let unanimous_agreement = |predict: &dyn Fn(&Joined<'_>) -> bool| {
        if unanimous.is_empty() {
            None
        } else {
            let hits = unanimous
                .iter()
                .filter(|r| predict(r) == r.judgement.consensus.correct)
                .count();
            Some(hits as f64 / unanimous.len() as f64)
        }
    };

    let baseline = baseline_threshold.and_then(|t| {
        let scores: Option<Vec<f64>> = rows.iter().map(|r| r.alignment).collect();
        let scores = scores?;
        let base_pred: Vec<bool> = scores.iter().map(|&s| s >= t).collect();
        Some(BaselineStats {
            threshold: Some(t),
            agreement: percent_agreement(&base_pred, &human).ok()?,
            kappa: cohens_kappa(&base_pred, &human).ok()?,
            unanimous_agreement: unanimous_agreement(&|r| r.alignment.is_some_and(|s| s >= t)),
        })
    });

    Some(AgreementStats {
        images: rows.len(),
        verifier_agreement: percent_agreement(&pred, &human).ok()?,
        verifier_kappa: cohens_kappa(&pred, &human).ok()?,
        interannotator_agreement: (!pairwise.is_empty()).then(|| pairwise.iter().sum::<f64>() / pairwise.len() as f64),
        unanimous_images: unanimous.len(),
        unanimous_verifier_agreement: unanimous_agreement(&|r| r.predicted),
        tied_images: rows.iter().filter(|r| r.judgement.consensus.tie).count(),
        mean_overall_fit: rows.iter().map(|r| r.judgement.mean_overall_fit).sum::<f64>() / rows.len() as f64,
        baseline,
    })
}

/// Build the agreement report. `alignment` maps (prompt id, image path) to
/// the image's alignment score; the baseline is reported for a task only
/// when every judged image of that task has a score.
pub fn agreement_report(
    human: &HumanJudgements,
    verdicts: &[ImageVerdict],
    alignment: &BTreeMap<(String, String), f64>,
) -> AgreementReport {
    let by_image: BTreeMap<(&str, &str), &ImageVerdict> = verdicts
        .iter()
        .map(|v| ((v.prompt_id.as_str(), v.image_path.as_str()), v))
        .collect();
    let mut joined = Vec::new();
    let mut missing = 0;
    for j in &human.images {
        match by_image.get(&(j.prompt_id.as_str(), j.image_path.as_str())) {
            Some(v) => joined.push(Joined {
                judgement: j,
                predicted: v.correct,
                alignment: alignment.get(&(j.prompt_id.clone(), j.image_path.clone())).copied(),
            }),
            None => missing += 1,
        }
    }

    let mut per_task = Vec::new();
    let mut thresholds: BTreeMap<Task, f64> = BTreeMap::new();
    for task in Task::ALL {
        let rows: Vec<&Joined<'_>> = joined.iter().filter(|r| r.judgement.task == task).collect();
        let threshold = rows
            .iter()
            .map(|r| r.alignment)
            .collect::<Option<Vec<f64>>>()
            .filter(|s| !s.is_empty())
            .and_then(|scores| {
                let labels: Vec<bool> = rows.iter().map(|r| r.judgement.consensus.correct).collect();
                tune_threshold(&scores, &labels).ok()
            })
            .map(|c| c.threshold);
        if let Some(t) = threshold {
            thresholds.insert(task, t);
        }
        if let Some(stats) = stats_for(&rows, threshold) {
            per_task.push(TaskAgreement { task, stats });
        }
    }

    let all: Vec<&Joined<'_>> = joined.iter().collect();
    let mut overall = stats_for(&all, None).unwrap_or(AgreementStats {
        images: 0,
        verifier_agreement: 0.0,
        verifier_kappa: 0.0,
        interannotator_agreement: None,
        unanimous_images: 0,
        unanimous_verifier_agreement: None,
        tied_images: 0,
        mean_overall_fit: 0.0,
        baseline: None,
    });
    // overall baseline applies each task's own threshold
    let every_task_tuned = per_task.iter().all(|t| thresholds.contains_key(&t.task));
    if !all.is_empty() && every_task_tuned {
        let base_pred: Vec<bool> = all
            .iter()
            .map(|r| r.alignment.unwrap_or(f64::NEG_INFINITY) >= thresholds[&r.judgement.task])
            .collect();
        let human_labels: Vec<bool> = all.iter().map(|r| r.judgement.consensus.correct).collect();
        let unanimous: Vec<usize> = (0..all.len())
            .filter(|&i| all[i].judgement.consensus.unanimous)
            .collect();
        overall.baseline = Some(BaselineStats {
            threshold: None,
            agreement: percent_agreement(&base_pred, &human_labels).unwrap_or(0.0),
            kappa: cohens_kappa(&base_pred, &human_labels).unwrap_or(0.0),
            unanimous_agreement: (!unanimous.is_empty()).then(|| {
                unanimous.iter().filter(|&&i| base_pred[i] == human_labels[i]).count() as f64 / unanimous.len() as f64
            }),
        });
    }

    let mut exclusion_reasons = BTreeMap::new();
    for e in &human.exclusions {
        *exclusion_reasons.entry(e.reason.clone()).or_insert(0) += 1;
    }
    AgreementReport {
        per_task,
        overall,
        excluded_annotations: human.exclusions.len(),
        exclusion_reasons,
        images_without_verdict: missing,
    }
}
