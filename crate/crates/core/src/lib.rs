//! Fitting two-parameter diffusion models (Bass, shifted Gompertz, Weibull)
//! to binned, truncated attention time series.
//!
//! The pipeline is: [`dataset::read_csv`] → [`dataset::prepare`] (CUSUM onset
//! detection and shifting) → [`fit::fit`] / [`fit::fit_all`] (multinomial
//! maximum likelihood by IRLS, χ² goodness of fit) → [`analytics`] and
//! [`forecast`].

pub mod analytics;
pub mod dataset;
pub mod error;
pub mod fit;
pub mod forecast;
pub mod model;
pub mod onset;
pub mod synth;

// adaptive quadrature oracle shared with the integration tests
#[cfg(test)]
#[path = "../tests/common/quad.rs"]
mod quad;

pub use dataset::{average_spellings, load_csv, prepare, read_csv, PreparedSeries, RawSeries};
pub use error::{Error, Result};
pub use fit::{bin_probabilities, chi2_survival, fit, fit_all, select_best, FitConfig, FitRecord, FitResult, FitSet};
pub use forecast::{forecast, reconstruct_past, Forecast, PastReconstruction, Segment};
pub use model::{BassParams, CompoundLink, Diffusion, Family, ModelParams, ShiftedGompertzParams, WeibullParams};
pub use onset::{detect_onset, shift_to_onset, CusumScale, OnsetConfig, OnsetReport};
