//! TOML run configuration. Every key has a command-line flag of the same
//! meaning, and flags win over the file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use annoteq::matrix::Scale;
use annoteq::substitution::RandomLabels;
use annoteq::SampleSize;
use serde::Deserialize;

use crate::UsageError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub groups: GroupsSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub plan: PlanSection,
    #[serde(default)]
    pub elbow: ElbowSection,
    #[serde(default)]
    pub fetch: FetchSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub human: Option<PathBuf>,
    /// A long-format file, or `self` for the self-copy calibration.
    pub candidate: Option<String>,
    pub scale: Option<Scale>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupsSection {
    pub a: Option<Vec<String>>,
    pub b: Option<Vec<String>>,
    /// Setting this selects groups with the automatic filter.
    pub group_size: Option<usize>,
    pub min_items: Option<usize>,
    pub min_coders: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    #[serde(rename = "B")]
    pub iterations: Option<usize>,
    #[serde(rename = "N")]
    pub sample_size: Option<SampleSize>,
    pub fraction: Option<f64>,
    pub sig_level: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub control: Option<bool>,
    pub random_labels: Option<RandomLabels>,
    #[serde(rename = "B_sweep")]
    pub b_sweep: Option<Vec<usize>>,
    pub margin: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub z: Option<f64>,
    pub alpha_min: Option<f64>,
    pub p_c: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElbowSection {
    pub curve: Option<PathBuf>,
    pub sizes: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchSection {
    pub endpoint: Option<String>,
    pub template: Option<PathBuf>,
    pub items: Option<PathBuf>,
    pub batch_size: Option<usize>,
    pub annotator: Option<String>,
    pub labels: Option<Vec<String>>,
    pub backoff_ms: Option<u64>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))
            .with_context(|| format!("loading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut cfg.data.human);
        fix(&mut cfg.evaluate.out);
        fix(&mut cfg.elbow.curve);
        fix(&mut cfg.elbow.out);
        fix(&mut cfg.fetch.template);
        fix(&mut cfg.fetch.items);
        fix(&mut cfg.fetch.out);
        if let Some(c) = &mut cfg.data.candidate {
            if c != "self" && c != "random" && Path::new(c.as_str()).is_relative() {
                *c = base.join(&*c).to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }
}

/// Returns the flag if given, else the file value.
pub fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

pub fn require<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| UsageError(format!("missing {what} (pass the flag or set it in --config)")).into())
}
