//! Weekly search-frequency series: CSV ingestion, spelling averages and
//! preparation of onset-shifted, binned series for fitting.
//!
//! Input is long-format CSV with header `date,service,region,value` (columns
//! in any order), ISO-8601 dates on a weekly grid. Values are relative search
//! volumes on a 0–100 scale and are used as pseudo-counts.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::onset::{detect_onset, shift_to_onset, OnsetConfig, OnsetReport};

pub const REQUIRED_COLUMNS: [&str; 4] = ["date", "service", "region", "value"];

/// Values above this are accepted with a warning.
const SOFT_MAX: f64 = 100.0 + 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub service: String,
    pub region: String,
    pub start_date: NaiveDate,
    pub values: Vec<f64>,
    /// Indices of weeks absent from the input and filled with 0.
    pub filled_weeks: Vec<usize>,
}

impl RawSeries {
    pub fn new(
        service: impl Into<String>,
        region: impl Into<String>,
        start_date: NaiveDate,
        values: Vec<f64>,
    ) -> Result<Self> {
        let series = Self {
            service: service.into(),
            region: region.into(),
            start_date,
            values,
            filled_weeks: Vec::new(),
        };
        series.validate()?;
        Ok(series)
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Mismatch(format!(
                "{}/{} has no values",
                self.service, self.region
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Mismatch(format!(
                "{}/{} contains invalid value {v}",
                self.service, self.region
            )));
        }
        if self.values.iter().any(|&v| v > SOFT_MAX) {
            warn!(
                "{}/{} has values above 100; treating them as pseudo-counts anyway",
                self.service, self.region
            );
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date_of(&self, index: usize) -> NaiveDate {
        self.start_date + Duration::weeks(index as i64)
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<RawSeries>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file)
}

struct Row {
    date: NaiveDate,
    value: f64,
    line: u64,
}

/// Parses long-format CSV into one series per `(service, region)`, ordered by
/// that key.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<RawSeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let [c_date, c_service, c_region, c_value] =
        [column("date")?, column("service")?, column("region")?, column("value")?];

    let mut groups: BTreeMap<(String, String), Vec<Row>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize| {
            record.get(idx).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing field {}", headers.get(idx).unwrap_or("?")),
            })
        };
        let date = NaiveDate::parse_from_str(field(c_date)?, "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            message: format!("bad date `{}`: {e}", field(c_date).unwrap_or("")),
        })?;
        let raw_value = field(c_value)?;
        let value: f64 = raw_value.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad value `{raw_value}`"),
        })?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Parse {
                line,
                message: format!("value must be finite and >= 0, got {value}"),
            });
        }
        let service = field(c_service)?.to_string();
        let region = field(c_region)?.to_string();
        if service.is_empty() || region.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty service or region".into(),
            });
        }
        groups
            .entry((service, region))
            .or_default()
            .push(Row { date, value, line });
    }

    groups
        .into_iter()
        .map(|((service, region), rows)| assemble(service, region, rows))
        .collect()
}

fn assemble(service: String, region: String, mut rows: Vec<Row>) -> Result<RawSeries> {
    rows.sort_by_key(|r| (r.date, r.line));
    for pair in rows.windows(2) {
        if pair[0].date == pair[1].date {
            return Err(Error::DuplicateRow {
                service,
                region,
                date: pair[1].date,
                line: pair[1].line,
            });
        }
    }
    let start = rows[0].date;
    let last = rows[rows.len() - 1].date;
    let weeks = ((last - start).num_days() / 7) as usize + 1;
    let mut values = vec![0.0; weeks];
    let mut present = vec![false; weeks];
    for row in &rows {
        let days = (row.date - start).num_days();
        if days % 7 != 0 {
            return Err(Error::Parse {
                line: row.line,
                message: format!("date {} is not on the weekly grid starting {start}", row.date),
            });
        }
        let idx = (days / 7) as usize;
        values[idx] = row.value;
        present[idx] = true;
    }
    let filled_weeks: Vec<usize> = (0..weeks).filter(|&i| !present[i]).collect();
    if !filled_weeks.is_empty() {
        warn!(
            "{service}/{region}: {} missing week(s) filled with 0",
            filled_weeks.len()
        );
    }
    let mut series = RawSeries::new(service, region, start, values)?;
    series.filled_weeks = filled_weeks;
    Ok(series)
}

/// Pointwise mean of alternative spellings of one query.
pub fn average_spellings(series: &[RawSeries], canonical: &str) -> Result<RawSeries> {
    let first = series
        .first()
        .ok_or_else(|| Error::Mismatch("no series to average".into()))?;
    for s in &series[1..] {
        if s.region != first.region {
            return Err(Error::Mismatch(format!(
                "regions differ: {} vs {}",
                first.region, s.region
            )));
        }
        if s.start_date != first.start_date || s.len() != first.len() {
            return Err(Error::Mismatch(format!(
                "date ranges differ for {} and {}",
                first.service, s.service
            )));
        }
    }
    let k = series.len() as f64;
    let values = (0..first.len())
        .map(|i| series.iter().map(|s| s.values[i]).sum::<f64>() / k)
        .collect();
    let mut filled: Vec<usize> = series.iter().flat_map(|s| s.filled_weeks.iter().copied()).collect();
    filled.sort_unstable();
    filled.dedup();
    let mut out = RawSeries::new(canonical, first.region.clone(), first.start_date, values)?;
    out.filled_weeks = filled;
    Ok(out)
}

/// Onset-shifted, binned counts `y_1..y_m` over edges `t_0 < ... < t_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PreparedRepr")]
pub struct PreparedSeries {
    pub service: String,
    pub region: String,
    #[serde(rename = "T")]
    pub offset_weeks: u32,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<f64>,
}

#[derive(Deserialize)]
struct PreparedRepr {
    service: String,
    region: String,
    #[serde(rename = "T")]
    offset_weeks: u32,
    bin_edges: Vec<f64>,
    counts: Vec<f64>,
}

impl TryFrom<PreparedRepr> for PreparedSeries {
    type Error = Error;

    fn try_from(r: PreparedRepr) -> Result<Self> {
        PreparedSeries::with_edges(r.service, r.region, r.offset_weeks, r.bin_edges, r.counts)
    }
}

impl PreparedSeries {
    /// Weekly bins starting at `t = offset_weeks`.
    pub fn weekly(
        service: impl Into<String>,
        region: impl Into<String>,
        offset_weeks: u32,
        counts: Vec<f64>,
    ) -> Result<Self> {
        let t0 = f64::from(offset_weeks);
        let edges = (0..=counts.len()).map(|i| t0 + i as f64).collect();
        Self::with_edges(service, region, offset_weeks, edges, counts)
    }

    pub fn with_edges(
        service: impl Into<String>,
        region: impl Into<String>,
        offset_weeks: u32,
        bin_edges: Vec<f64>,
        counts: Vec<f64>,
    ) -> Result<Self> {
        let service = service.into();
        let region = region.into();
        if bin_edges.len() != counts.len() + 1 || counts.is_empty() {
            return Err(Error::Mismatch(format!(
                "{} edges for {} counts",
                bin_edges.len(),
                counts.len()
            )));
        }
        if !(bin_edges[0].is_finite() && bin_edges[0] >= 0.0)
            || bin_edges
                .windows(2)
                .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::InvalidEdges);
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Mismatch("counts must be finite and >= 0".into()));
        }
        if counts.iter().sum::<f64>() <= 0.0 {
            return Err(Error::EmptySeries { service, region });
        }
        Ok(Self {
            service,
            region,
            offset_weeks,
            bin_edges,
            counts,
        })
    }

    /// `n = Σ y_i`.
    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn first_edge(&self) -> f64 {
        self.bin_edges[0]
    }

    pub fn last_edge(&self) -> f64 {
        self.bin_edges[self.bin_edges.len() - 1]
    }

    /// Same series with every count multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.counts.iter_mut().for_each(|c| *c *= factor);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Everything `prepare` decided along the way.
#[derive(Debug, Clone)]
pub struct Preparation {
    pub series: PreparedSeries,
    /// Index into the raw values where the retained slice starts.
    pub onset_index: usize,
    /// Date of the diffusion start: the launch date for pre-window launches,
    /// otherwise the date of the detected onset week.
    pub onset_date: NaiveDate,
    /// CUSUM report, absent when a launch date decided the onset.
    pub report: Option<OnsetReport>,
}

pub fn prepare(raw: &RawSeries, onset_cfg: &OnsetConfig, launch_date: Option<NaiveDate>) -> Result<PreparedSeries> {
    prepare_detailed(raw, onset_cfg, launch_date).map(|p| p.series)
}

pub fn prepare_detailed(
    raw: &RawSeries,
    onset_cfg: &OnsetConfig,
    launch_date: Option<NaiveDate>,
) -> Result<Preparation> {
    let (onset_index, offset, onset_date, report) = match launch_date {
        Some(launch) if launch < raw.start_date => {
            let weeks = (raw.start_date - launch).num_days() / 7;
            let weeks =
                u32::try_from(weeks).map_err(|_| Error::Config(format!("launch date {launch} is too early")))?;
            (0, weeks, launch, None)
        }
        _ => {
            let report = detect_onset(&raw.values, onset_cfg)?;
            let onset = report.onset_index.ok_or_else(|| Error::NoOnset {
                service: raw.service.clone(),
                region: raw.region.clone(),
            })?;
            (onset, 0, raw.date_of(onset), Some(report))
        }
    };
    let shifted = shift_to_onset(&raw.values, onset_index, offset)?;
    if shifted.values.iter().sum::<f64>() <= 0.0 {
        return Err(Error::EmptySeries {
            service: raw.service.clone(),
            region: raw.region.clone(),
        });
    }
    let series = PreparedSeries::weekly(
        raw.service.clone(),
        raw.region.clone(),
        shifted.offset_weeks,
        shifted.values,
    )?;
    Ok(Preparation {
        series,
        onset_index,
        onset_date,
        report,
    })
}
