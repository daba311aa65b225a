use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use adoptfit_core::Family;

use crate::config::RunConfig;
use crate::output::write_atomic;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a `fit` run. Holds no timestamps or host
/// details, so identical invocations produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Paths exactly as given on the command line.
    pub inputs: BTreeMap<String, String>,
    pub config: RunConfig,
    pub families: Vec<Family>,
    pub launch_dates: BTreeMap<String, NaiveDate>,
    pub out: String,
    pub seed: Option<u64>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))
    }
}

/// Reads a `service,launch_date` CSV.
pub fn read_launch_dates(path: &Path) -> Result<BTreeMap<String, NaiveDate>> {
    #[derive(Deserialize)]
    struct Row {
        service: String,
        launch_date: NaiveDate,
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read launch dates {}", path.display()))?;
    let mut dates = BTreeMap::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.with_context(|| format!("invalid launch dates {}", path.display()))?;
        if let Some(previous) = dates.insert(row.service.clone(), row.launch_date) {
            anyhow::bail!(
                "{}: service {} has two launch dates ({previous} and {})",
                path.display(),
                row.service,
                row.launch_date
            );
        }
    }
    Ok(dates)
}
