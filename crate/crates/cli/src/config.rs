//! Optional TOML config file. Command-line flags take precedence over every
//! value set here; relative paths resolve against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use t2i_eval::TaskThresholds;

#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub suite: Option<PathBuf>,
    pub seed: Option<u64>,
    pub vocabulary: Option<PathBuf>,
    #[serde(default)]
    pub detections: Vec<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub model: Option<String>,
    pub images_per_prompt: Option<usize>,
    #[serde(default)]
    pub thresholds: ThresholdOverrides,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdOverrides {
    pub default_confidence: Option<f64>,
    pub counting_confidence: Option<f64>,
    pub position_offset_ratio: Option<f64>,
}

impl ThresholdOverrides {
    /// Layer `self` over `base`.
    pub fn over(self, base: ThresholdOverrides) -> ThresholdOverrides {
        ThresholdOverrides {
            default_confidence: self.default_confidence.or(base.default_confidence),
            counting_confidence: self.counting_confidence.or(base.counting_confidence),
            position_offset_ratio: self.position_offset_ratio.or(base.position_offset_ratio),
        }
    }

    pub fn resolve(self) -> TaskThresholds {
        let d = TaskThresholds::default();
        TaskThresholds {
            default_confidence: self.default_confidence.unwrap_or(d.default_confidence),
            counting_confidence: self.counting_confidence.unwrap_or(d.counting_confidence),
            position_offset_ratio: self.position_offset_ratio.unwrap_or(d.position_offset_ratio),
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("failed to read config {}", path.display()))?;
        let mut config: FileConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.suite.as_mut().map(rebase);
        config.vocabulary.as_mut().map(rebase);
        config.annotations.as_mut().map(rebase);
        config.output.as_mut().map(rebase);
        config.detections.iter_mut().for_each(rebase);
        Ok(config)
    }
}
