use thiserror::Error;

use crate::model::Family;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("time t = {0} is outside the support [0, inf)")]
    Domain(f64),

    #[error("density is unbounded at t = 0 for Weibull shape {kappa} < 1")]
    DensityEdge { kappa: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("series of length {len} is shorter than the baseline window {window}")]
    SeriesTooShort { len: usize, window: usize },

    #[error("index {index} out of range for series of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("no onset detected for {service}/{region}")]
    NoOnset { service: String, region: String },

    #[error("series {service}/{region} has no positive mass after onset")]
    EmptySeries { service: String, region: String },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("duplicate row for {service}/{region} on {date} (line {line})")]
    DuplicateRow {
        service: String,
        region: String,
        date: chrono::NaiveDate,
        line: u64,
    },

    #[error("incompatible series: {0}")]
    Mismatch(String),

    #[error("bin edges must be finite-start, non-negative and strictly increasing")]
    InvalidEdges,

    #[error("truncation mass {0:e} is too small to renormalize bin probabilities")]
    DegenerateTruncation(f64),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("need at least 4 bins to fit two parameters, got {0}")]
    TooFewBins(usize),

    #[error("every family failed to fit: {}", summarize(.0))]
    AllFamiliesFailed(Vec<(Family, Error)>),

    #[error("fitted density vanishes on the observed window")]
    ZeroDensity,

    #[error("no unobserved past: the series starts at t = 0")]
    NoPastWindow,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn summarize(failures: &[(Family, Error)]) -> String {
    failures
        .iter()
        .map(|(family, err)| format!("{family}: {err}"))
        .collect::<Vec<_>>()
        .join("; ")
}
