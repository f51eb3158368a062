//! JSON run configuration and the flag values that override it.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use vdecor::kernel::Family;
use vdecor::learners::LearnerSpec;
use vdecor::simgen::{Scenario, SimulationConfig};
use vdecor::tune::FoldSplit;

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Every key a config file may set. Commands read the keys they need;
/// command-line flags take precedence over file values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Conditioning set size `C`.
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub neighbors: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Family>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nugget: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learner: Option<LearnerSpec>,
    /// Tuning grids, used when the single-value keys above are absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nuggets: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranges: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learners: Option<Vec<LearnerSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<FoldSplit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// Simulation settings beyond scenario, n and seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Usage(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn empty() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            ..Default::default()
        }
    }
}

/// Replace `slot` with `flag` when the flag was given.
pub fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

pub fn require<T: Clone>(value: &Option<T>, flag: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Usage(format!("missing required option {flag} (or the matching config key)")))
}

pub fn parse_scenario(s: &str) -> Result<Scenario, String> {
    Scenario::from_str(s).map_err(|e| e.to_string())
}

/// `exponential` or `matern:<smoothness>`.
pub fn parse_kernel(s: &str) -> Result<Family, String> {
    let (name, arg) = split_arg(s);
    match (name, arg) {
        ("exponential" | "exp", None) => Ok(Family::Exponential),
        ("matern", Some(nu)) => {
            let smoothness: f64 = nu.parse().map_err(|_| format!("bad smoothness {nu:?}"))?;
            if smoothness > 0.0 && smoothness.is_finite() {
                Ok(Family::Matern { smoothness })
            } else {
                Err(format!("smoothness must be positive, got {nu}"))
            }
        }
        ("matern", None) => Err("matern needs a smoothness, e.g. matern:1.5".into()),
        _ => Err(format!("unknown kernel {s:?} (expected exponential or matern:<nu>)")),
    }
}

pub fn parse_learner(s: &str) -> Result<LearnerSpec, String> {
    LearnerSpec::from_str(s).map_err(|e| e.to_string())
}

fn split_arg(s: &str) -> (&str, Option<&str>) {
    match s.trim().split_once(':') {
        Some((a, b)) => (a, Some(b)),
        None => (s.trim(), None),
    }
}
