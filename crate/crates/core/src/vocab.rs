//! Object, color and relation vocabulary used to build prompts.
//!
//! The default vocabulary ships as `data/vocabulary.json`: the 80 COCO class
//! names, a rename map for ambiguous names, the ten generation colors and the
//! classes excluded from color tasks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_VOCABULARY: &str = include_str!("../data/vocabulary.json");

pub const OBJECT_COUNT: usize = 80;
pub const GENERATION_COLOR_COUNT: usize = 10;

/// Excluded from generation so that it can serve as the neutral background
/// fill during color classification.
pub const BACKGROUND_COLOR: &str = "gray";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read vocabulary {path}: {message}")]
    Read { path: String, message: String },
    #[error("malformed vocabulary: {0}")]
    Malformed(String),
    #[error("expected {expected} object names, found {found}")]
    ObjectCount { expected: usize, found: usize },
    #[error("duplicate object name {0:?}")]
    DuplicateObject(String),
    #[error("rename map entry {0:?} does not name a raw object")]
    UnknownRename(String),
    #[error("expected {expected} generation colors, found {found}")]
    ColorCount { expected: usize, found: usize },
    #[error("duplicate color {0:?}")]
    DuplicateColor(String),
    #[error("{0:?} is reserved for background fill and cannot be a generation color")]
    BackgroundColor(String),
    #[error("color-task exclusion {0:?} is not an object name")]
    UnknownExclusion(String),
}

/// Relative position between two objects, as written in prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "above")]
    Above,
    #[serde(rename = "below")]
    Below,
    #[serde(rename = "left of")]
    LeftOf,
    #[serde(rename = "right of")]
    RightOf,
}

impl Relation {
    pub const ALL: [Relation; 4] = [Relation::Above, Relation::Below, Relation::LeftOf, Relation::RightOf];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Above => "above",
            Relation::Below => "below",
            Relation::LeftOf => "left of",
            Relation::RightOf => "right of",
        }
    }

    /// True for left/right, false for above/below.
    pub fn is_horizontal(self) -> bool {
        matches!(self, Relation::LeftOf | Relation::RightOf)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown relation {s:?}"))
    }
}

/// On-disk form of a vocabulary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabularyConfig {
    pub raw_object_names: Vec<String>,
    #[serde(default)]
    pub rename_map: BTreeMap<String, String>,
    pub generation_colors: Vec<String>,
    #[serde(default)]
    pub color_task_exclusions: Vec<String>,
}

/// Validated vocabulary. Object names are the generation names, i.e. raw
/// names after applying the rename map.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    object_names: Vec<String>,
    rename_map: BTreeMap<String, String>,
    generation_colors: Vec<String>,
    color_task_exclusions: Vec<String>,
}

impl Vocabulary {
    /// The bundled COCO vocabulary.
    pub fn coco() -> Self {
        Self::from_json(DEFAULT_VOCABULARY).expect("bundled vocabulary is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: VocabularyConfig = serde_json::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))?;
        Self::from_config(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn from_config(config: VocabularyConfig) -> Result<Self, ConfigError> {
        if config.raw_object_names.len() != OBJECT_COUNT {
            return Err(ConfigError::ObjectCount {
                expected: OBJECT_COUNT,
                found: config.raw_object_names.len(),
            });
        }
        let raw: BTreeSet<&str> = config.raw_object_names.iter().map(String::as_str).collect();
        if let Some(unknown) = config.rename_map.keys().find(|k| !raw.contains(k.as_str())) {
            return Err(ConfigError::UnknownRename(unknown.clone()));
        }

        let mut seen = BTreeSet::new();
        let mut object_names = Vec::with_capacity(OBJECT_COUNT);
        for name in &config.raw_object_names {
            let renamed = config.rename_map.get(name).unwrap_or(name).clone();
            if !seen.insert(renamed.clone()) {
                return Err(ConfigError::DuplicateObject(renamed));
            }
            object_names.push(renamed);
        }

        if config.generation_colors.len() != GENERATION_COLOR_COUNT {
            return Err(ConfigError::ColorCount {
                expected: GENERATION_COLOR_COUNT,
                found: config.generation_colors.len(),
            });
        }
        let mut colors = BTreeSet::new();
        for color in &config.generation_colors {
            if color == BACKGROUND_COLOR {
                return Err(ConfigError::BackgroundColor(color.clone()));
            }
            if !colors.insert(color.as_str()) {
                return Err(ConfigError::DuplicateColor(color.clone()));
            }
        }

        for excluded in &config.color_task_exclusions {
            if !seen.contains(excluded) {
                return Err(ConfigError::UnknownExclusion(excluded.clone()));
            }
        }

        Ok(Vocabulary {
            object_names,
            rename_map: config.rename_map,
            generation_colors: config.generation_colors,
            color_task_exclusions: config.color_task_exclusions,
        })
    }

    pub fn object_names(&self) -> &[String] {
        &self.object_names
    }

    pub fn generation_colors(&self) -> &[String] {
        &self.generation_colors
    }

    pub fn relations(&self) -> &'static [Relation] {
        &Relation::ALL
    }

    pub fn rename_map(&self) -> &BTreeMap<String, String> {
        &self.rename_map
    }

    /// Objects eligible for the color and attribute-binding tasks.
    pub fn color_task_objects(&self) -> Vec<&str> {
        self.object_names
            .iter()
            .filter(|n| !self.color_task_exclusions.contains(n))
            .map(String::as_str)
            .collect()
    }

    pub fn contains_object(&self, name: &str) -> bool {
        self.object_names.iter().any(|n| n == name)
    }

    pub fn is_generation_color(&self, color: &str) -> bool {
        self.generation_colors.iter().any(|c| c == color)
    }

    pub fn is_color_task_excluded(&self, name: &str) -> bool {
        self.color_task_exclusions.iter().any(|n| n == name)
    }

    /// Map a raw detector class name to its generation name.
    pub fn canonical_name<'a>(&'a self, raw: &'a str) -> &'a str {
        self.rename_map.get(raw).map(String::as_str).unwrap_or(raw)
    }

    pub fn to_config(&self) -> VocabularyConfig {
        let inverse: BTreeMap<&str, &str> = self
            .rename_map
            .iter()
            .map(|(raw, renamed)| (renamed.as_str(), raw.as_str()))
            .collect();
        VocabularyConfig {
            raw_object_names: self
                .object_names
                .iter()
                .map(|n| inverse.get(n.as_str()).copied().unwrap_or(n).to_string())
                .collect(),
            rename_map: self.rename_map.clone(),
            generation_colors: self.generation_colors.clone(),
            color_task_exclusions: self.color_task_exclusions.clone(),
        }
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::coco()
    }
}
