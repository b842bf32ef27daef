//! Aggregate per-image verdicts into task and model scores.
//!
//! The overall score is the unweighted mean of the six task scores, even
//! though tasks have different prompt counts. Reported scores move by about
//! 0.01 to 0.02 across generation seeds, so differences below that are noise.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::Task;
use crate::verifier::ImageVerdict;

/// Images generated per prompt unless configured otherwise.
pub const DEFAULT_IMAGES_PER_PROMPT: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("no verdicts to score")]
    Empty,
    #[error("verdicts mix tasks {0} and {1}")]
    MixedTasks(Task, Task),
    #[error("no verdicts for task {0}")]
    MissingTask(Task),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task: Task,
    pub evaluated: usize,
    pub correct: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: String,
    /// One entry per task, in [`Task::ALL`] order.
    pub tasks: Vec<TaskScore>,
    pub overall: f64,
    /// Mean image-text alignment score over all images, when available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment_score: Option<f64>,
}

impl ModelScore {
    /// Build a score row from published per-task fractions (no image counts).
    pub fn from_fractions(model: impl Into<String>, fractions: [f64; 6]) -> Self {
        let tasks: Vec<TaskScore> = Task::ALL
            .iter()
            .zip(fractions)
            .map(|(&task, fraction)| TaskScore {
                task,
                evaluated: 0,
                correct: 0,
                fraction,
            })
            .collect();
        ModelScore {
            model: model.into(),
            overall: macro_average(&tasks),
            tasks,
            alignment_score: None,
        }
    }

    pub fn task(&self, task: Task) -> Option<&TaskScore> {
        self.tasks.iter().find(|t| t.task == task)
    }

    pub fn with_alignment_score(mut self, score: Option<f64>) -> Self {
        self.alignment_score = score;
        self
    }
}

fn macro_average(tasks: &[TaskScore]) -> f64 {
    tasks.iter().map(|t| t.fraction).sum::<f64>() / tasks.len() as f64
}

/// Fraction of correct verdicts for a single task.
pub fn score_task(verdicts: &[&ImageVerdict]) -> Result<TaskScore, ScoreError> {
    let first = verdicts.first().ok_or(ScoreError::Empty)?;
    if let Some(other) = verdicts.iter().find(|v| v.tag != first.tag) {
        return Err(ScoreError::MixedTasks(first.tag, other.tag));
    }
    let correct = verdicts.iter().filter(|v| v.correct).count();
    Ok(TaskScore {
        task: first.tag,
        evaluated: verdicts.len(),
        correct,
        fraction: correct as f64 / verdicts.len() as f64,
    })
}

/// Score every task and average. Every task must have at least one verdict.
pub fn score_model(model: impl Into<String>, verdicts: &[ImageVerdict]) -> Result<ModelScore, ScoreError> {
    let mut tasks = Vec::with_capacity(Task::ALL.len());
    for task in Task::ALL {
        let subset: Vec<&ImageVerdict> = verdicts.iter().filter(|v| v.tag == task).collect();
        if subset.is_empty() {
            return Err(ScoreError::MissingTask(task));
        }
        tasks.push(score_task(&subset)?);
    }
    Ok(ModelScore {
        model: model.into(),
        overall: macro_average(&tasks),
        tasks,
        alignment_score: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub rank: usize,
    pub model: String,
    pub overall: f64,
    /// Per-task difference from the top-ranked model, in [`Task::ALL`] order.
    pub deltas: Vec<f64>,
}

/// Order models by overall score (descending), breaking ties by name.
pub fn compare_models(models: &[ModelScore]) -> Vec<RankedModel> {
    let mut order: Vec<&ModelScore> = models.iter().collect();
    order.sort_by(|a, b| {
        b.overall
            .partial_cmp(&a.overall)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.model.cmp(&b.model))
    });
    let Some(leader) = order.first().copied() else {
        return Vec::new();
    };
    order
        .iter()
        .enumerate()
        .map(|(i, m)| RankedModel {
            rank: i + 1,
            model: m.model.clone(),
            overall: m.overall,
            deltas: Task::ALL
                .iter()
                .map(|&t| {
                    let mine = m.task(t).map_or(0.0, |s| s.fraction);
                    let top = leader.task(t).map_or(0.0, |s| s.fraction);
                    mine - top
                })
                .collect(),
        })
        .collect()
}
