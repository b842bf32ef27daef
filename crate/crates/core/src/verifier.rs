//! Per-image verification: decide whether a generated image satisfies every
//! element of its prompt, and explain why not when it does not.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{kept_indices, BoundingBox, ImageDetections, ObjectInstance, TaskThresholds};
use crate::prompt::{PromptSpec, Task};
use crate::vocab::Relation;

/// How position pairs are chosen when a class has several instances.
pub const POSITION_PAIRING: &str = "existential";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("prompt id mismatch: spec {spec:?} vs detections {detections:?}")]
    PromptMismatch { spec: String, detections: String },
    #[error("position offset ratio must be a non-negative number, got {0}")]
    BadOffsetRatio(f64),
    #[error("position prompt {0:?} has no relation")]
    MissingRelation(String),
    #[error("failure classification requested for a correct verdict")]
    CorrectVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizontal {
    Left,
    Right,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vertical {
    Above,
    Below,
    Neutral,
}

/// Where object B sits relative to object A, one value per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationLabel {
    pub horizontal: Horizontal,
    pub vertical: Vertical,
}

/// A relation projected onto a single axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "above")]
    Above,
    #[serde(rename = "below")]
    Below,
    #[serde(rename = "left of")]
    LeftOf,
    #[serde(rename = "right of")]
    RightOf,
    #[serde(rename = "neutral")]
    Neutral,
}

impl Direction {
    pub const ALL: [Direction; 5] = [
        Direction::Above,
        Direction::Below,
        Direction::LeftOf,
        Direction::RightOf,
        Direction::Neutral,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Above => "above",
            Direction::Below => "below",
            Direction::LeftOf => "left of",
            Direction::RightOf => "right of",
            Direction::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl RelationLabel {
    pub const NEUTRAL: RelationLabel = RelationLabel {
        horizontal: Horizontal::Neutral,
        vertical: Vertical::Neutral,
    };

    /// Value of the label on the axis `relation` talks about.
    pub fn along(self, relation: Relation) -> Direction {
        if relation.is_horizontal() {
            match self.horizontal {
                Horizontal::Left => Direction::LeftOf,
                Horizontal::Right => Direction::RightOf,
                Horizontal::Neutral => Direction::Neutral,
            }
        } else {
            match self.vertical {
                Vertical::Above => Direction::Above,
                Vertical::Below => Direction::Below,
                Vertical::Neutral => Direction::Neutral,
            }
        }
    }

    pub fn satisfies(self, relation: Relation) -> bool {
        matches!(
            (relation, self.along(relation)),
            (Relation::LeftOf, Direction::LeftOf)
                | (Relation::RightOf, Direction::RightOf)
                | (Relation::Above, Direction::Above)
                | (Relation::Below, Direction::Below)
        )
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.along(Relation::LeftOf);
        let v = self.along(Relation::Above);
        match (h, v) {
            (Direction::Neutral, Direction::Neutral) => f.write_str("neutral"),
            (h, Direction::Neutral) => write!(f, "{h}"),
            (Direction::Neutral, v) => write!(f, "{v}"),
            (h, v) => write!(f, "{h}, {v}"),
        }
    }
}

/// Classify where box `b` lies relative to box `a`.
///
/// Centroids must differ by more than `offset_ratio` times the summed box
/// extents along an axis before a direction is asserted; otherwise that axis
/// is neutral. With a ratio of 0 this is the plain sign of the centroid
/// difference. Comparisons are made on the centroid difference so that
/// swapping the boxes mirrors the result exactly.
pub fn classify_relation(a: &BoundingBox, b: &BoundingBox, offset_ratio: f64) -> Result<RelationLabel, VerifyError> {
    if offset_ratio.is_nan() || offset_ratio < 0.0 || !offset_ratio.is_finite() {
        return Err(VerifyError::BadOffsetRatio(offset_ratio));
    }
    let (xa, ya) = a.centroid();
    let (xb, yb) = b.centroid();
    let margin_x = offset_ratio * (a.width() + b.width());
    let margin_y = offset_ratio * (a.height() + b.height());
    let dx = xb - xa;
    let dy = yb - ya;
    let horizontal = if dx > margin_x {
        Horizontal::Right
    } else if dx < -margin_x {
        Horizontal::Left
    } else {
        Horizontal::Neutral
    };
    let vertical = if dy > margin_y {
        Vertical::Below
    } else if dy < -margin_y {
        Vertical::Above
    } else {
        Vertical::Neutral
    };
    Ok(RelationLabel { horizontal, vertical })
}

/// Color with the highest score; ties go to the lexicographically smallest
/// name. `None` only for an empty map.
pub fn argmax_color(scores: &BTreeMap<String, f64>) -> Option<&str> {
    let mut best: Option<(&str, f64)> = None;
    // BTreeMap iterates in name order, so a strict comparison keeps the first tie
    for (color, &score) in scores {
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((color, score)),
        }
    }
    best.map(|(c, _)| c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Presence,
    Count,
    Color,
    Position,
}

/// What the verifier saw for one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observed {
    /// Instances of the class above the task threshold.
    Count(usize),
    /// Predicted color of each instance of the class, in detection order;
    /// `None` when the instance carried no color scores.
    Colors(Vec<Option<String>>),
    /// Relation of the reported (reference, subject) instance pair, indices
    /// into the record's object list.
    Relation {
        label: Option<RelationLabel>,
        pair: Option<[usize; 2]>,
    },
}

impl fmt::Display for Observed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observed::Count(n) => write!(f, "{n}"),
            Observed::Colors(colors) => {
                let names: Vec<&str> = colors.iter().map(|c| c.as_deref().unwrap_or("unknown")).collect();
                if names.is_empty() {
                    f.write_str("none")
                } else {
                    f.write_str(&names.join(", "))
                }
            }
            Observed::Relation { label: Some(l), .. } => write!(f, "{l}"),
            Observed::Relation { label: None, .. } => f.write_str("not evaluated"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub requirement: usize,
    pub class: String,
    pub kind: CheckKind,
    pub expected: String,
    pub observed: Observed,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    MissingObject,
    WrongCount,
    WrongPosition,
    WrongColor,
    ColorSwap,
}

impl FailureKind {
    pub const ALL: [FailureKind; 5] = [
        FailureKind::MissingObject,
        FailureKind::WrongCount,
        FailureKind::WrongPosition,
        FailureKind::WrongColor,
        FailureKind::ColorSwap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::MissingObject => "missing_object",
            FailureKind::WrongCount => "wrong_count",
            FailureKind::WrongPosition => "wrong_position",
            FailureKind::WrongColor => "wrong_color",
            FailureKind::ColorSwap => "color_swap",
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Required versus observed direction for a failed position check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionMiss {
    pub required: Relation,
    pub observed: Direction,
    pub label: RelationLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requirement: Option<usize>,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<PositionMiss>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageVerdict {
    pub prompt_id: String,
    pub image_path: String,
    pub tag: Task,
    pub correct: bool,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn predicted_color(obj: &ObjectInstance) -> Option<String> {
    obj.color_scores.as_ref().and_then(argmax_color).map(str::to_string)
}

// Highest confidence first, detection order breaking ties.
fn by_confidence(objects: &[ObjectInstance], indices: &[usize]) -> Vec<usize> {
    let mut sorted = indices.to_vec();
    sorted.sort_by(|&a, &b| objects[b].confidence.total_cmp(&objects[a].confidence).then(a.cmp(&b)));
    sorted
}

/// Verify one image against its prompt.
///
/// Instances are first filtered by the task's confidence threshold (a no-op
/// for pre-filtered input). Non-counting tasks have no upper limit on the
/// number of instances; counting requires an exact match.
pub fn verify_image(
    spec: &PromptSpec,
    detections: &ImageDetections,
    thresholds: &TaskThresholds,
) -> Result<ImageVerdict, VerifyError> {
    if spec.id != detections.prompt_id {
        return Err(VerifyError::PromptMismatch {
            spec: spec.id.clone(),
            detections: detections.prompt_id.clone(),
        });
    }
    let objects = &detections.objects;
    let kept = kept_indices(detections, spec.tag, thresholds);
    let per_requirement: Vec<Vec<usize>> = spec
        .include
        .iter()
        .map(|r| {
            kept.iter()
                .copied()
                .filter(|&i| objects[i].class_name == r.class_name)
                .collect()
        })
        .collect();

    let mut checks = Vec::new();
    for (i, req) in spec.include.iter().enumerate() {
        let found = per_requirement[i].len();
        if spec.tag == Task::Counting {
            checks.push(Check {
                requirement: i,
                class: req.class_name.clone(),
                kind: CheckKind::Count,
                expected: req.count.to_string(),
                observed: Observed::Count(found),
                satisfied: found == req.count as usize,
            });
        } else {
            checks.push(Check {
                requirement: i,
                class: req.class_name.clone(),
                kind: CheckKind::Presence,
                expected: format!("at least {}", req.count),
                observed: Observed::Count(found),
                satisfied: found >= req.count as usize,
            });
        }
    }

    if spec.tag.uses_color() {
        for (i, req) in spec.include.iter().enumerate() {
            let Some(color) = &req.color else { continue };
            let predicted: Vec<Option<String>> = per_requirement[i]
                .iter()
                .map(|&j| predicted_color(&objects[j]))
                .collect();
            let matching = predicted
                .iter()
                .filter(|p| p.as_deref() == Some(color.as_str()))
                .count();
            checks.push(Check {
                requirement: i,
                class: req.class_name.clone(),
                kind: CheckKind::Color,
                expected: color.clone(),
                observed: Observed::Colors(predicted),
                satisfied: matching >= req.count as usize,
            });
        }
    }

    let mut pairing = None;
    if spec.tag == Task::Position {
        let (subject, relation, reference) = spec
            .relation()
            .filter(|&(s, _, r)| s < spec.include.len() && r < spec.include.len())
            .ok_or_else(|| VerifyError::MissingRelation(spec.id.clone()))?;
        let refs = by_confidence(objects, &per_requirement[reference]);
        let subs = by_confidence(objects, &per_requirement[subject]);
        let mut observed = Observed::Relation {
            label: None,
            pair: None,
        };
        let mut satisfied = false;
        if let (Some(&r0), Some(&s0)) = (refs.first(), subs.first()) {
            let top = classify_relation(&objects[r0].bbox, &objects[s0].bbox, thresholds.position_offset_ratio)?;
            observed = Observed::Relation {
                label: Some(top),
                pair: Some([r0, s0]),
            };
            'search: for &r in &refs {
                for &s in &subs {
                    let label =
                        classify_relation(&objects[r].bbox, &objects[s].bbox, thresholds.position_offset_ratio)?;
                    if label.satisfies(relation) {
                        observed = Observed::Relation {
                            label: Some(label),
                            pair: Some([r, s]),
                        };
                        satisfied = true;
                        break 'search;
                    }
                }
            }
        }
        checks.push(Check {
            requirement: subject,
            class: spec.include[subject].class_name.clone(),
            kind: CheckKind::Position,
            expected: format!("{relation} {}", spec.include[reference].class_name),
            observed,
            satisfied,
        });
        pairing = Some(POSITION_PAIRING.to_string());
    }

    let correct = checks.iter().all(|c| c.satisfied);
    let mut verdict = ImageVerdict {
        prompt_id: detections.prompt_id.clone(),
        image_path: detections.image_path.clone(),
        tag: spec.tag,
        correct,
        checks,
        failure: None,
        pairing,
        note: None,
    };
    if !correct {
        verdict.failure = Some(classify_failure(spec, &verdict)?);
    }
    Ok(verdict)
}

/// Verdict for an image that has no detection record at all: it is judged
/// as an image in which nothing was detected.
pub fn verify_missing_image(
    spec: &PromptSpec,
    image_path: &str,
    thresholds: &TaskThresholds,
) -> Result<ImageVerdict, VerifyError> {
    let empty = ImageDetections {
        prompt_id: spec.id.clone(),
        image_path: image_path.to_string(),
        width: 1,
        height: 1,
        objects: Vec::new(),
        alignment_score: None,
    };
    let mut verdict = verify_image(spec, &empty, thresholds)?;
    verdict.note = Some("no detection record for this image".to_string());
    Ok(verdict)
}

/// Verify many images in parallel; output order follows input order.
pub fn verify_batch(
    items: &[(&PromptSpec, &ImageDetections)],
    thresholds: &TaskThresholds,
) -> Vec<Result<ImageVerdict, VerifyError>> {
    items
        .par_iter()
        .map(|(spec, det)| verify_image(spec, det, thresholds))
        .collect()
}

/// Categorize why an incorrect verdict failed.
///
/// A color swap needs both objects present, an instance of the first object
/// predicted with the second object's color and vice versa. Anything else is
/// the category of the first unsatisfied check.
pub fn classify_failure(spec: &PromptSpec, verdict: &ImageVerdict) -> Result<Failure, VerifyError> {
    if verdict.correct {
        return Err(VerifyError::CorrectVerdict);
    }

    if spec.tag == Task::ColorAttr && spec.include.len() == 2 {
        let present = verdict
            .checks
            .iter()
            .filter(|c| c.kind == CheckKind::Presence)
            .all(|c| c.satisfied);
        let predicted = |req: usize| {
            verdict.checks.iter().find_map(|c| {
                match (&c.observed, c.kind == CheckKind::Color && c.requirement == req) {
                    (Observed::Colors(p), true) => Some(p.clone()),
                    _ => None,
                }
            })
        };
        if let (true, Some(pa), Some(pb), Some(ca), Some(cb)) = (
            present,
            predicted(0),
            predicted(1),
            spec.include[0].color.as_deref(),
            spec.include[1].color.as_deref(),
        ) {
            let a_has_b = pa.iter().any(|p| p.as_deref() == Some(cb));
            let b_has_a = pb.iter().any(|p| p.as_deref() == Some(ca));
            if a_has_b && b_has_a {
                return Ok(Failure {
                    kind: FailureKind::ColorSwap,
                    requirement: None,
                    detail: format!(
                        "{} rendered {cb} and {} rendered {ca}",
                        spec.include[0].class_name, spec.include[1].class_name
                    ),
                    position: None,
                });
            }
        }
    }

    let check = verdict
        .checks
        .iter()
        .find(|c| !c.satisfied)
        .ok_or(VerifyError::CorrectVerdict)?;
    let kind = match check.kind {
        CheckKind::Presence => FailureKind::MissingObject,
        CheckKind::Count => FailureKind::WrongCount,
        CheckKind::Color => FailureKind::WrongColor,
        CheckKind::Position => FailureKind::WrongPosition,
    };
    let detail = match kind {
        FailureKind::MissingObject => format!("expected {} {}, found {}", check.expected, check.class, check.observed),
        FailureKind::WrongCount => format!("expected {} {}, found {}", check.expected, check.class, check.observed),
        FailureKind::WrongColor => format!(
            "expected {} {}, predicted {}",
            check.expected, check.class, check.observed
        ),
        _ => format!(
            "expected {} {}, observed {}",
            check.class, check.expected, check.observed
        ),
    };
    let position = match (&check.observed, spec.relation()) {
        (Observed::Relation { label: Some(label), .. }, Some((_, required, _))) => Some(PositionMiss {
            required,
            observed: label.along(required),
            label: *label,
        }),
        _ => None,
    };
    Ok(Failure {
        kind,
        requirement: Some(check.requirement),
        detail,
        position,
    })
}
