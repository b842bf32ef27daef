//! Input loading and batch verification shared by the subcommands.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::Serialize;
use t2i_eval::detection::{load_detections, DetectionHeader};
use t2i_eval::prompt::{generate_suite, load_suite, GENERATOR_ID};
use t2i_eval::verifier::{verify_batch, verify_missing_image};
use t2i_eval::{ImageDetections, ImageVerdict, Suite, Task, TaskThresholds, Vocabulary};

/// Error caused by how the tool was invoked rather than by input contents.
/// Reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteSource {
    Path(PathBuf),
    Seed { seed: u64, generator: String },
}

pub fn load_vocabulary(path: Option<&Path>) -> Result<Vocabulary> {
    match path {
        Some(p) => Vocabulary::load(p).with_context(|| format!("invalid vocabulary {}", p.display())),
        None => Ok(Vocabulary::coco()),
    }
}

/// Pick the suite source. A flag-level choice replaces the config file's
/// choice as a whole, so `--seed` on the command line wins over `suite = ...`
/// in the file.
pub fn suite_source(
    flag_suite: Option<PathBuf>,
    flag_seed: Option<u64>,
    file_suite: Option<PathBuf>,
    file_seed: Option<u64>,
) -> Result<SuiteSource> {
    let (suite, seed) = if flag_suite.is_some() || flag_seed.is_some() {
        (flag_suite, flag_seed)
    } else {
        (file_suite, file_seed)
    };
    match (suite, seed) {
        (Some(path), None) => Ok(SuiteSource::Path(path)),
        (None, Some(seed)) => Ok(SuiteSource::Seed {
            seed,
            generator: GENERATOR_ID.into(),
        }),
        (Some(_), Some(_)) => Err(usage(
            "both a suite file and a generation seed are set; keep exactly one",
        )),
        (None, None) => Err(usage(
            "no prompt suite given; pass --suite FILE or --seed N (or set `suite` or `seed` in the config file)",
        )),
    }
}

pub fn load_suite_from(source: &SuiteSource, vocab: &Vocabulary) -> Result<Suite> {
    match source {
        SuiteSource::Path(p) => load_suite(p, vocab).with_context(|| format!("invalid prompt suite {}", p.display())),
        SuiteSource::Seed { seed, .. } => Ok(generate_suite(*seed, vocab)),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LoadedDetections {
    pub path: PathBuf,
    pub header: DetectionHeader,
    pub records: usize,
}

/// Load every detection file and check that each record names a prompt of
/// the suite.
pub fn load_detection_files(
    paths: &[PathBuf],
    vocab: &Vocabulary,
    suite: &Suite,
) -> Result<(Vec<LoadedDetections>, Vec<ImageDetections>)> {
    if paths.is_empty() {
        return Err(usage(
            "no detection files given; pass --detections FILE (or set `detections` in the config file)",
        ));
    }
    let mut summary = Vec::new();
    let mut records = Vec::new();
    for path in paths {
        let file =
            load_detections(path, vocab).with_context(|| format!("invalid detection file {}", path.display()))?;
        let unresolved = file.unresolved_prompt_ids(suite);
        if !unresolved.is_empty() {
            bail!(
                "{}: records reference prompt ids missing from the suite: {}",
                path.display(),
                unresolved.join(", ")
            );
        }
        info!(
            "loaded {} detection records from {}",
            file.records.len(),
            path.display()
        );
        summary.push(LoadedDetections {
            path: path.clone(),
            header: file.header,
            records: file.records.len(),
        });
        records.extend(file.records);
    }
    Ok((summary, records))
}

#[derive(Debug, Clone)]
pub struct Verified {
    pub verdicts: Vec<ImageVerdict>,
    pub missing_images: usize,
    /// Mean alignment score over all records, when every record has one.
    pub alignment_score: Option<f64>,
}

/// Verify every record, in suite order. Prompts with fewer than
/// `images_per_prompt` records are padded with verdicts for missing images,
/// which count as incorrect. A task with no records at all is an error.
pub fn verify_run(
    suite: &Suite,
    records: &[ImageDetections],
    thresholds: &TaskThresholds,
    images_per_prompt: usize,
) -> Result<Verified> {
    let mut by_prompt: BTreeMap<&str, Vec<&ImageDetections>> = BTreeMap::new();
    for r in records {
        by_prompt.entry(r.prompt_id.as_str()).or_default().push(r);
    }
    for task in Task::ALL {
        let covered = suite
            .specs
            .iter()
            .any(|s| s.tag == task && by_prompt.contains_key(s.id.as_str()));
        if !covered {
            bail!("no detections for task {task}; every task needs detection records to be scored");
        }
    }

    let mut pairs = Vec::new();
    for spec in &suite.specs {
        for r in by_prompt.get(spec.id.as_str()).into_iter().flatten() {
            pairs.push((spec, *r));
        }
    }
    let mut results = verify_batch(&pairs, thresholds).into_iter();

    let mut verdicts = Vec::with_capacity(suite.specs.len() * images_per_prompt);
    let mut missing_images = 0;
    for spec in &suite.specs {
        let present = by_prompt.get(spec.id.as_str()).map_or(0, Vec::len);
        for _ in 0..present {
            verdicts.push(results.next().expect("one result per pair")?);
        }
        if present > images_per_prompt {
            warn!("prompt {} has {present} images, expected {images_per_prompt}", spec.id);
        }
        for k in present..images_per_prompt {
            let path = format!("{}/missing_{k}", spec.id);
            verdicts.push(verify_missing_image(spec, &path, thresholds)?);
            missing_images += 1;
        }
    }
    if missing_images > 0 {
        warn!("{missing_images} images had no detection record and were counted as incorrect");
    }

    let scores: Option<Vec<f64>> = records.iter().map(|r| r.alignment_score).collect();
    let alignment_score = scores
        .filter(|s| !s.is_empty())
        .map(|s| s.iter().sum::<f64>() / s.len() as f64);
    Ok(Verified {
        verdicts,
        missing_images,
        alignment_score,
    })
}
