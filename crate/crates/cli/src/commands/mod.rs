pub mod fit;
pub mod forecast;
pub mod onset;
pub mod report;
pub mod synth;

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use adoptfit_core::{load_csv, FitRecord, RawSeries};

use crate::output::files_with_extension;

pub const FITS_DIR: &str = "fits";
pub const SERIES_DIR: &str = "series";
pub const ONSETS_FILE: &str = "onsets.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

pub fn read_input(path: &Path) -> Result<Vec<RawSeries>> {
    let raw = load_csv(path).with_context(|| format!("cannot load {}", path.display()))?;
    if raw.is_empty() {
        anyhow::bail!("{} contains no series", path.display());
    }
    Ok(raw)
}

/// One row of an onset report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetRow {
    pub service: String,
    pub region: String,
    pub onset_index: Option<usize>,
    pub onset_date: Option<chrono::NaiveDate>,
    pub triggered: bool,
}

pub fn write_onset_rows<W: std::io::Write>(rows: &[OnsetRow], out: W) -> adoptfit_core::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["service", "region", "onset_index", "onset_date", "triggered"])?;
    for r in rows {
        wtr.write_record([
            r.service.clone(),
            r.region.clone(),
            r.onset_index.map(|i| i.to_string()).unwrap_or_default(),
            r.onset_date.map(|d| d.to_string()).unwrap_or_default(),
            r.triggered.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_onset_rows(path: &Path) -> Result<Vec<OnsetRow>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    rdr.deserialize()
        .collect::<csv::Result<Vec<OnsetRow>>>()
        .with_context(|| format!("invalid onset table {}", path.display()))
}

/// All fit records of a results directory, in file-name order.
pub fn read_fit_records(results: &Path) -> Result<Vec<FitRecord>> {
    let dir = results.join(FITS_DIR);
    files_with_extension(&dir, "json")?
        .iter()
        .map(|path| {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid fit record {}", path.display()))
        })
        .collect()
}
