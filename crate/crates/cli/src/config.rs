//! Pipeline configuration.
//!
//! A JSON file given with `--config` supplies defaults for any field; flags
//! on the command line override the file, and built-in defaults apply last.

use std::fs;
use std::path::{Path, PathBuf};

use latentage_core::SvrConfig;
use serde::{Deserialize, Serialize};

use crate::Usage;

/// SVR settings; absent fields keep the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl SvrOverrides {
    pub fn resolve(&self) -> SvrConfig {
        let d = SvrConfig::default();
        SvrConfig {
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            c: self.c.unwrap_or(d.c),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latents: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub age_latents: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masks: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calib: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    #[serde(skip_serializing_if = "is_default")]
    pub svr: SvrOverrides,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discriminability_threshold: Option<f64>,
    /// Face-verification decision threshold on similarity scores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fr_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pooled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_ages: Option<Vec<f64>>,

    // thread count never changes results, so it stays out of manifests
    #[serde(skip_serializing)]
    pub jobs: Option<usize>,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        // a config the tool cannot use is a usage problem, like a bad flag
        let text = fs::read_to_string(path)
            .map_err(|e| Usage(format!("reading config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Usage(format!("parsing config {}: {e}", path.display())).into())
    }
}

/// Puts `flag` into `slot` when given on the command line.
pub fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

/// A value that must come from a flag or the config file.
pub fn require<T: Clone>(v: &Option<T>, flag: &str) -> anyhow::Result<T> {
    v.clone()
        .ok_or_else(|| Usage(format!("missing --{flag} (flag or config field)")).into())
}
