use std::path::{Path, PathBuf};

use handover_core::ergonomics::{DEFAULT_GRANULARITY_DEG, DEFAULT_MAX_REACH};
use handover_core::eval::success::{DEFAULT_SAMPLE_N, DEFAULT_THRESHOLD};
use handover_core::grounding::DEFAULT_GRID_N;
use handover_core::selection::{DEFAULT_ALPHA, DEFAULT_EPSILON};
use handover_core::vlm::VlmConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_ENV: &str = "HANDOVER_CONFIG";

/// Everything a config file may set. Command-line flags override each field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub vlm: VlmConfig,
    pub epsilon: f64,
    pub alpha: f64,
    pub grid_n: usize,
    pub sample_n: usize,
    pub threshold: f64,
    pub max_reach: f64,
    pub granularity_deg: f64,
    /// Transcript directory for record and replay.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            vlm: VlmConfig::default(),
            epsilon: DEFAULT_EPSILON,
            alpha: DEFAULT_ALPHA,
            grid_n: DEFAULT_GRID_N,
            sample_n: DEFAULT_SAMPLE_N,
            threshold: DEFAULT_THRESHOLD,
            max_reach: DEFAULT_MAX_REACH,
            granularity_deg: DEFAULT_GRANULARITY_DEG,
            cache_dir: None,
        }
    }
}

impl GlobalConfig {
    /// `--config` wins over the environment variable; neither means defaults.
    pub fn load(flag: Option<&Path>) -> Result<Self, CliError> {
        let env = std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        let Some(path) = flag.map(Path::to_path_buf).or(env) else {
            return Ok(Self::default());
        };
        let bytes = std::fs::read(&path).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_slice(&bytes).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Range checks shared by file values and flag overrides.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |name: &str, why: String| Err(CliError::usage(format!("{name}: {why}")));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", format!("{} must be positive", self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", format!("{} outside [0, 1]", self.alpha));
        }
        if self.grid_n == 0 {
            return bad("grid_n", "must be at least 1".into());
        }
        if self.sample_n == 0 {
            return bad("sample_n", "must be at least 1".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold", format!("{} outside (0, 1)", self.threshold));
        }
        if !(self.max_reach >= 0.0) {
            return bad("max_reach", format!("{} must be non-negative", self.max_reach));
        }
        if !(self.granularity_deg > 0.0 && self.granularity_deg.is_finite()) {
            return bad("granularity_deg", format!("{} must be positive", self.granularity_deg));
        }
        self.vlm.validate().map_err(|e| CliError::usage(e.to_string()))
    }
}
