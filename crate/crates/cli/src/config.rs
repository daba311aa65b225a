use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use adoptfit_core::{FitConfig, OnsetConfig};

/// Effective settings of a run, as read from TOML:
///
/// ```toml
/// [fit]
/// max_iterations = 300
/// weight_floor = 0.5
///
/// [onset]
/// drift = 2.5
/// threshold = 12.0
/// baseline_window = 16
/// scale = { kind = "baseline_sd", floor = 1.0 }
/// ```
///
/// Missing tables and keys take their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fit: FitConfig,
    pub onset: OnsetConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        config
            .fit
            .validate()
            .and_then(|()| config.onset.validate())
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(config)
    }
}
