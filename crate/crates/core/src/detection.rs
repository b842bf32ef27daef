//! Detection records: the model-agnostic boundary between vision adapters
//! and the verifier.
//!
//! A detection file starts with a `detections_header` line describing the
//! adapter that produced it, followed by one [`ImageDetections`] record per
//! generated image. See `docs/formats.md` for the field reference.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, FormatError};
use crate::prompt::{Suite, Task};
use crate::vocab::{Vocabulary, GENERATION_COLOR_COUNT};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoxError {
    #[error("degenerate box [{x0}, {y0}, {x1}, {y1}]: need x0 < x1 and y0 < y1")]
    Degenerate { x0: f64, y0: f64, x1: f64, y1: f64 },
}

/// Axis-aligned box in pixel coordinates, y growing downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl BoundingBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, BoxError> {
        // written so that NaN coordinates are rejected too
        if !(x0 < x1 && y0 < y1) || !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return Err(BoxError::Degenerate { x0, y0, x1, y1 });
        }
        Ok(BoundingBox { x0, y0, x1, y1 })
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    pub fn centroid(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = BoxError;

    fn try_from(c: [f64; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(c[0], c[1], c[2], c[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.corners()
    }
}

/// Run-length encoded binary mask over the full image, row-major,
/// alternating runs of background and foreground starting with background.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rle {
    pub counts: Vec<u64>,
}

impl Rle {
    pub fn pixel_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn foreground_area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).sum()
    }

    /// True when the runs cover exactly a `width` x `height` image.
    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.pixel_count() == u64::from(width) * u64::from(height)
    }
}

/// One detected object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectInstance {
    #[serde(rename = "class")]
    pub class_name: String,
    pub confidence: f64,
    pub bbox: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Rle>,
    /// Zero-shot score per candidate color, when the adapter ran its color stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color_scores: Option<BTreeMap<String, f64>>,
}

/// Everything an adapter observed in one generated image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageDetections {
    pub prompt_id: String,
    pub image_path: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<ObjectInstance>,
    /// Image-text alignment score scaled to [0, 100].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment_score: Option<f64>,
}

/// Confidence cut-offs and the position margin used during verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskThresholds {
    pub default_confidence: f64,
    pub counting_confidence: f64,
    pub position_offset_ratio: f64,
}

impl Default for TaskThresholds {
    fn default() -> Self {
        TaskThresholds {
            default_confidence: 0.3,
            counting_confidence: 0.9,
            position_offset_ratio: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("threshold {name} = {value} is outside [0, 1]")]
pub struct ThresholdError {
    pub name: &'static str,
    pub value: f64,
}

impl TaskThresholds {
    pub fn validate(&self) -> Result<(), ThresholdError> {
        for (name, value) in [
            ("default_confidence", self.default_confidence),
            ("counting_confidence", self.counting_confidence),
            ("position_offset_ratio", self.position_offset_ratio),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ThresholdError { name, value });
            }
        }
        Ok(())
    }

    /// Minimum confidence an instance needs to count for `task`.
    pub fn min_confidence(&self, task: Task) -> f64 {
        match task {
            Task::Counting => self.counting_confidence,
            _ => self.default_confidence,
        }
    }
}

/// Adapter provenance carried on the first line of a detection file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionHeader {
    pub format_version: u32,
    pub adapter: String,
    pub detector: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color_classifier: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment_model: Option<String>,
    /// Color stage cropped each instance to its box.
    pub crop: bool,
    /// Color stage replaced background pixels using the instance mask.
    pub mask: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_fill: Option<[u8; 3]>,
    /// Lowest confidence the adapter emitted.
    pub emission_floor: f64,
    /// Name of the text-to-image model whose images were analysed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderLine {
    detections_header: DetectionHeader,
}

/// A parsed and validated detection file.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFile {
    pub header: DetectionHeader,
    pub records: Vec<ImageDetections>,
}

impl DetectionFile {
    pub fn to_jsonl(&self) -> Result<String, serde_json::Error> {
        let mut out = jsonl::to_line(&HeaderLine {
            detections_header: self.header.clone(),
        })?;
        out.push('\n');
        out.push_str(&jsonl::to_lines(&self.records)?);
        Ok(out)
    }

    /// Prompt ids referenced by records but absent from the suite, in file order.
    pub fn unresolved_prompt_ids(&self, suite: &Suite) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for record in &self.records {
            if suite.get(&record.prompt_id).is_none() && !out.contains(&record.prompt_id) {
                out.push(record.prompt_id.clone());
            }
        }
        out
    }
}

/// Check a record against the schema rules that serde cannot express.
pub fn validate_record(record: &ImageDetections, colors: &[String]) -> Result<(), String> {
    if record.width == 0 || record.height == 0 {
        return Err("image width and height must be positive".into());
    }
    if let Some(score) = record.alignment_score {
        if !(0.0..=100.0).contains(&score) {
            return Err(format!("alignment_score {score} outside [0, 100]"));
        }
    }
    for (i, obj) in record.objects.iter().enumerate() {
        if !(0.0..=1.0).contains(&obj.confidence) {
            return Err(format!("objects[{i}]: confidence {} outside [0, 1]", obj.confidence));
        }
        if let Some(mask) = &obj.mask {
            if !mask.fits(record.width, record.height) {
                return Err(format!(
                    "objects[{i}]: mask covers {} pixels, image has {}",
                    mask.pixel_count(),
                    u64::from(record.width) * u64::from(record.height)
                ));
            }
        }
        if let Some(scores) = &obj.color_scores {
            let matches = scores.len() == colors.len() && colors.iter().all(|c| scores.contains_key(c));
            if !matches {
                let found: Vec<&str> = scores.keys().map(String::as_str).collect();
                return Err(format!(
                    "objects[{i}]: expected {GENERATION_COLOR_COUNT} candidate colors, found {} ({})",
                    scores.len(),
                    found.join(", ")
                ));
            }
            if let Some((c, v)) = scores.iter().find(|(_, v)| !v.is_finite()) {
                return Err(format!("objects[{i}]: color score for {c} is not finite ({v})"));
            }
        }
    }
    Ok(())
}

/// Parse a detection file. Raw detector class names are mapped to their
/// generation names through the vocabulary's rename map.
pub fn parse_detections(reader: impl BufRead, vocab: &Vocabulary) -> Result<DetectionFile, FormatError> {
    let lines = jsonl::read_lines(reader)?;
    let mut iter = lines.into_iter();
    let (line_no, first) = iter.next().ok_or(FormatError::Parse {
        line: 1,
        message: "missing detections_header line".into(),
    })?;
    let header: HeaderLine = jsonl::parse_line(line_no, &first).map_err(|e| FormatError::Parse {
        line: line_no,
        message: format!("expected detections_header: {e}"),
    })?;
    if header.detections_header.format_version != FORMAT_VERSION {
        return Err(FormatError::Invalid {
            line: line_no,
            message: format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                header.detections_header.format_version
            ),
        });
    }

    let mut records = Vec::new();
    for (line_no, line) in iter {
        let mut record: ImageDetections = jsonl::parse_line(line_no, &line)?;
        validate_record(&record, vocab.generation_colors())
            .map_err(|message| FormatError::Invalid { line: line_no, message })?;
        for obj in &mut record.objects {
            let canonical = vocab.canonical_name(&obj.class_name);
            if canonical != obj.class_name {
                obj.class_name = canonical.to_string();
            }
        }
        records.push(record);
    }
    Ok(DetectionFile {
        header: header.detections_header,
        records,
    })
}

pub fn load_detections(path: &Path, vocab: &Vocabulary) -> Result<DetectionFile, FormatError> {
    parse_detections(jsonl::open(path)?, vocab)
}

/// Indices of instances that pass the task's confidence threshold, in order.
pub fn kept_indices(detections: &ImageDetections, task: Task, thresholds: &TaskThresholds) -> Vec<usize> {
    let min = thresholds.min_confidence(task);
    detections
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| o.confidence >= min)
        .map(|(i, _)| i)
        .collect()
}

/// Instances passing the task's confidence threshold, order preserved.
/// No suppression is applied; overlapping same-class boxes are all kept.
pub fn filter_by_threshold(
    detections: &ImageDetections,
    task: Task,
    thresholds: &TaskThresholds,
) -> Vec<ObjectInstance> {
    kept_indices(detections, task, thresholds)
        .into_iter()
        .map(|i| detections.objects[i].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = r#"{"detections_header": {"format_version": 1, "adapter": "test", "detector": "none", "crop": true, "mask": true, "emission_floor": 0.3}}"#;

    fn instance(conf: f64) -> ObjectInstance {
        ObjectInstance {
            class_name: "dog".into(),
            confidence: conf,
            bbox: BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap(),
            mask: None,
            color_scores: None,
        }
    }

    fn record(confs: &[f64]) -> ImageDetections {
        ImageDetections {
            prompt_id: "00000".into(),
            image_path: "00000/0.png".into(),
            width: 64,
            height: 64,
            objects: confs.iter().map(|&c| instance(c)).collect(),
            alignment_score: None,
        }
    }

    fn parse(body: &str) -> Result<DetectionFile, FormatError> {
        parse_detections(format!("{HEADER}\n{body}\n").as_bytes(), &Vocabulary::coco())
    }

    #[test]
    fn box_geometry() {
        let b = BoundingBox::new(2.0, 4.0, 12.0, 8.0).unwrap();
        assert_eq!(b.centroid(), (7.0, 6.0));
        assert_eq!(b.width(), 10.0);
        assert_eq!(b.height(), 4.0);
        assert!(BoundingBox::new(1.0, 0.0, 1.0, 5.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, f64::NAN, 5.0).is_err());
    }

    #[test]
    fn counting_filter_uses_raised_threshold() {
        let r = record(&[0.95, 0.92, 0.85]);
        let t = TaskThresholds::default();
        assert_eq!(filter_by_threshold(&r, Task::Counting, &t).len(), 2);
        assert_eq!(filter_by_threshold(&r, Task::Colors, &t).len(), 3);
        assert!(filter_by_threshold(&record(&[]), Task::Counting, &t).is_empty());
    }

    #[test]
    fn threshold_is_inclusive_and_keeps_order() {
        let r = record(&[0.3, 0.1, 0.9, 0.2999]);
        let kept = kept_indices(&r, Task::Position, &TaskThresholds::default());
        assert_eq!(kept, vec![0, 2]);
    }

    #[test]
    fn thresholds_validate() {
        assert!(TaskThresholds::default().validate().is_ok());
        let t = TaskThresholds {
            counting_confidence: 1.5,
            ..Default::default()
        };
        assert_eq!(t.validate().unwrap_err().name, "counting_confidence");
    }

    #[test]
    fn empty_objects_is_valid() {
        let f =
            parse(r#"{"prompt_id": "00000", "image_path": "a.png", "width": 8, "height": 8, "objects": []}"#).unwrap();
        assert_eq!(f.records.len(), 1);
        assert!(f.records[0].objects.is_empty());
    }

    #[test]
    fn confidence_out_of_range() {
        let err = parse(r#"{"prompt_id": "00000", "image_path": "a.png", "width": 8, "height": 8, "objects": [{"class": "dog", "confidence": 1.2, "bbox": [0, 0, 4, 4]}]}"#).unwrap_err();
        assert_eq!(err.line(), Some(2));
        assert!(err.to_string().contains("confidence"), "{err}");
    }

    #[test]
    fn seven_colors_rejected() {
        let err = parse(r#"{"prompt_id": "00000", "image_path": "a.png", "width": 8, "height": 8, "objects": [{"class": "dog", "confidence": 0.9, "bbox": [0, 0, 4, 4], "color_scores": {"red": 0.1, "orange": 0.1, "yellow": 0.1, "green": 0.1, "blue": 0.1, "purple": 0.1, "pink": 0.4}}]}"#).unwrap_err();
        assert!(err.to_string().contains("expected 10 candidate colors"), "{err}");
    }

    #[test]
    fn degenerate_box_rejected_at_parse() {
        let err = parse(r#"{"prompt_id": "00000", "image_path": "a.png", "width": 8, "height": 8, "objects": [{"class": "dog", "confidence": 0.9, "bbox": [4, 0, 4, 4]}]}"#).unwrap_err();
        assert!(err.to_string().contains("degenerate"), "{err}");
    }

    #[test]
    fn mask_must_cover_image() {
        let ok = parse(r#"{"prompt_id": "00000", "image_path": "a.png", "width": 4, "height": 2, "objects": [{"class": "dog", "confidence": 0.9, "bbox": [0, 0, 4, 2], "mask": {"counts": [2, 4, 2]}}]}"#).unwrap();
        assert_eq!(ok.records[0].objects[0].mask.as_ref().unwrap().foreground_area(), 4);
        assert!(parse(r#"{"prompt_id": "00000", "image_path": "a.png", "width": 4, "height": 2, "objects": [{"class": "dog", "confidence": 0.9, "bbox": [0, 0, 4, 2], "mask": {"counts": [2, 4, 3]}}]}"#).is_err());
    }

    #[test]
    fn raw_names_are_renamed() {
        let f = parse(r#"{"prompt_id": "00000", "image_path": "a.png", "width": 8, "height": 8, "objects": [{"class": "mouse", "confidence": 0.9, "bbox": [0, 0, 4, 4]}]}"#).unwrap();
        assert_eq!(f.records[0].objects[0].class_name, "computer mouse");
    }

    #[test]
    fn header_required() {
        let err = parse_detections(
            r#"{"prompt_id": "00000", "image_path": "a.png", "width": 8, "height": 8, "objects": []}"#.as_bytes(),
            &Vocabulary::coco(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("detections_header"));
    }

    #[test]
    fn alignment_score_range() {
        assert!(parse(r#"{"prompt_id": "00000", "image_path": "a.png", "width": 8, "height": 8, "objects": [], "alignment_score": 100.5}"#).is_err());
        assert!(parse(r#"{"prompt_id": "00000", "image_path": "a.png", "width": 8, "height": 8, "objects": [], "alignment_score": 31.25}"#).is_ok());
    }

    #[test]
    fn file_round_trip_and_unresolved_ids() {
        let f = parse(r#"{"prompt_id": "00042", "image_path": "a.png", "width": 8, "height": 8, "objects": [{"class": "dog", "confidence": 0.5, "bbox": [0.0, 0.0, 4.0, 4.0]}]}"#).unwrap();
        let text = f.to_jsonl().unwrap();
        let again = parse_detections(text.as_bytes(), &Vocabulary::coco()).unwrap();
        assert_eq!(again, f);
        let suite = crate::prompt::generate_suite(1, &Vocabulary::coco());
        let suite = Suite {
            header: None,
            specs: suite.specs[..3].to_vec(),
        };
        assert_eq!(f.unresolved_prompt_ids(&suite), vec!["00042".to_string()]);
    }
}
