//! Detection-based evaluation of compositional text-to-image generation.
//!
//! Prompts come from a fixed object and color vocabulary. Each generated
//! image is described by detector output (boxes, masks, color scores), and
//! the verifier checks it against the prompt's structured requirements:
//! presence, exact counts, colors and relative position. Scores average the
//! per-task accuracies; agreement statistics compare verdicts with human
//! annotation.

pub mod agreement;
pub mod detection;
pub mod jsonl;
pub mod prompt;
pub mod reporting;
pub mod scoring;
pub mod verifier;
pub mod vocab;

pub use detection::{BoundingBox, DetectionFile, DetectionHeader, ImageDetections, ObjectInstance, TaskThresholds};
pub use prompt::{ObjectRequirement, PromptSpec, Suite, Task};
pub use scoring::{ModelScore, TaskScore};
pub use verifier::{verify_image, FailureKind, ImageVerdict};
pub use vocab::{Relation, Vocabulary};
