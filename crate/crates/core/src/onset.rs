//! Onset detection with a one-sided upward CUSUM.
//!
//! The recursion is `S_0 = 0`, `S_k = max(0, S_{k-1} + z_k - μ̂ - drift)` where
//! `μ̂` is the mean of the first `baseline_window` samples. A change is
//! signalled at the first `k` with `S_k >= threshold`, and the onset is the
//! last `k' <= k` at which the trace was still zero. Since `S_k` has consumed
//! samples `z_1..z_k`, `k'` is also the 0-based index of the first sample of
//! the excursion that triggered.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Units in which `drift` and `threshold` are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CusumScale {
    /// Raw series units.
    Absolute,
    /// Multiples of the baseline-window sample standard deviation, with a
    /// floor (in series units) for flat baselines.
    BaselineSd { floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnsetConfig {
    pub drift: f64,
    pub threshold: f64,
    pub baseline_window: usize,
    pub scale: CusumScale,
}

impl Default for OnsetConfig {
    /// 16-week baseline, allowance 2.5σ, decision level 12σ.
    fn default() -> Self {
        Self {
            drift: 2.5,
            threshold: 12.0,
            baseline_window: 16,
            scale: CusumScale::BaselineSd { floor: 1.0 },
        }
    }
}

impl OnsetConfig {
    /// Configuration with `drift` and `threshold` in series units.
    pub fn absolute(drift: f64, threshold: f64, baseline_window: usize) -> Result<Self> {
        let cfg = Self {
            drift,
            threshold,
            baseline_window,
            scale: CusumScale::Absolute,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.drift.is_finite() && self.drift >= 0.0) {
            return Err(Error::Config(format!("drift must be >= 0, got {}", self.drift)));
        }
        if !(self.threshold.is_finite() && self.threshold > self.drift) {
            return Err(Error::Config(format!(
                "threshold must exceed drift ({} <= {})",
                self.threshold, self.drift
            )));
        }
        if self.baseline_window < 4 {
            return Err(Error::Config(format!(
                "baseline window must be >= 4, got {}",
                self.baseline_window
            )));
        }
        if let CusumScale::BaselineSd { floor } = self.scale {
            if !(floor.is_finite() && floor > 0.0) {
                return Err(Error::Config(format!("sd floor must be > 0, got {floor}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetReport {
    pub onset_index: Option<usize>,
    /// `S_0..S_n`, one entry longer than the series.
    pub cusum_trace: Vec<f64>,
    pub triggered: bool,
    /// Trace index at which `S_k` first reached the threshold.
    pub detection_index: Option<usize>,
    pub baseline_mean: f64,
    /// Drift and threshold actually used, in series units.
    pub drift: f64,
    pub threshold: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn detect_onset(series: &[f64], config: &OnsetConfig) -> Result<OnsetReport> {
    config.validate()?;
    let window = config.baseline_window;
    if series.len() < window {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            window,
        });
    }
    let (mu, sd) = mean_sd(&series[..window]);
    let unit = match config.scale {
        CusumScale::Absolute => 1.0,
        CusumScale::BaselineSd { floor } => {
            if sd > 0.0 {
                sd.max(floor)
            } else {
                floor
            }
        }
    };
    let drift = config.drift * unit;
    let threshold = config.threshold * unit;

    let mut trace = Vec::with_capacity(series.len() + 1);
    trace.push(0.0);
    let mut s = 0.0_f64;
    let mut last_zero = 0;
    let mut detection = None;
    for (i, &z) in series.iter().enumerate() {
        s = (s + (z - mu - drift)).max(0.0);
        trace.push(s);
        let k = i + 1;
        if s == 0.0 {
            last_zero = k;
        }
        if detection.is_none() && s >= threshold {
            detection = Some((k, last_zero));
        }
    }

    Ok(OnsetReport {
        onset_index: detection.map(|(_, onset)| onset),
        cusum_trace: trace,
        triggered: detection.is_some(),
        detection_index: detection.map(|(k, _)| k),
        baseline_mean: mu,
        drift,
        threshold,
    })
}

/// A series cut at its onset and placed on the diffusion time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedSeries {
    pub values: Vec<f64>,
    /// Weeks `T` between the start of the diffusion and the first retained
    /// sample; bins start at `t = T`.
    pub offset_weeks: u32,
}

pub fn shift_to_onset(series: &[f64], onset_index: usize, pre_period_weeks: u32) -> Result<ShiftedSeries> {
    if onset_index >= series.len() {
        return Err(Error::IndexOutOfRange {
            index: onset_index,
            len: series.len(),
        });
    }
    Ok(ShiftedSeries {
        values: series[onset_index..].to_vec(),
        offset_weeks: pre_period_weeks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step(zeros: usize, level: f64, len: usize) -> Vec<f64> {
        (0..len).map(|i| if i < zeros { 0.0 } else { level }).collect()
    }

    #[test]
    fn flat_zero_series_never_triggers() {
        let report = detect_onset(&[0.0; 100], &OnsetConfig::default()).unwrap();
        assert!(!report.triggered);
        assert_eq!(report.onset_index, None);
        assert!(report.cusum_trace.iter().all(|&s| s == 0.0));
        assert_eq!(report.cusum_trace.len(), 101);
    }

    #[test]
    fn step_onset_located_exactly() {
        let cfg = OnsetConfig::absolute(1.0, 5.0, 8).unwrap();
        let report = detect_onset(&step(20, 50.0, 60), &cfg).unwrap();
        assert!(report.triggered);
        assert_eq!(report.onset_index, Some(20));
        assert_eq!(report.detection_index, Some(21));
        assert!(report.cusum_trace[21] >= 5.0);
    }

    #[test]
    fn prepending_zeros_shifts_onset() {
        let cfg = OnsetConfig::absolute(1.0, 5.0, 8).unwrap();
        let base = step(20, 50.0, 60);
        let mut padded = vec![0.0; 10];
        padded.extend_from_slice(&base);
        let a = detect_onset(&base, &cfg).unwrap().onset_index.unwrap();
        let b = detect_onset(&padded, &cfg).unwrap().onset_index.unwrap();
        assert_eq!(b, a + 10);
    }

    #[test]
    fn short_series_is_an_error() {
        let err = detect_onset(&[1.0; 3], &OnsetConfig::absolute(0.0, 1.0, 4).unwrap());
        assert!(matches!(err, Err(Error::SeriesTooShort { len: 3, window: 4 })));
    }

    #[test]
    fn config_validation() {
        assert!(OnsetConfig::absolute(5.0, 5.0, 8).is_err());
        assert!(OnsetConfig::absolute(-1.0, 5.0, 8).is_err());
        assert!(OnsetConfig::absolute(1.0, 5.0, 3).is_err());
        assert!(OnsetConfig::default().validate().is_ok());
    }

    #[test]
    fn default_config_uses_floor_on_flat_baseline() {
        let report = detect_onset(&step(30, 3.0, 80), &OnsetConfig::default()).unwrap();
        assert_eq!(report.drift, 2.5);
        assert_eq!(report.threshold, 12.0);
        assert_eq!(report.onset_index, Some(30));
    }

    #[test]
    fn shift_examples() {
        let s: Vec<f64> = (0..483).map(f64::from).collect();
        let id = shift_to_onset(&s, 0, 0).unwrap();
        assert_eq!(id.values, s);
        assert_eq!(id.offset_weeks, 0);
        let cut = shift_to_onset(&s, 100, 0).unwrap();
        assert_eq!(cut.values.len(), 383);
        assert_eq!(cut.values[0], 100.0);
        let pre = shift_to_onset(&s, 0, 260).unwrap();
        assert_eq!(pre.offset_weeks, 260);
        assert!(matches!(shift_to_onset(&s, 483, 0), Err(Error::IndexOutOfRange { .. })));
    }

    proptest! {
        #[test]
        fn trace_is_nonnegative_and_zero_before_first_excess(
            values in proptest::collection::vec(0.0f64..100.0, 8..120),
            drift in 0.0f64..5.0,
            extra in 0.1f64..50.0,
        ) {
            let cfg = OnsetConfig::absolute(drift, drift + extra, 8).unwrap();
            let report = detect_onset(&values, &cfg).unwrap();
            prop_assert!(report.cusum_trace.iter().all(|&s| s >= 0.0));
            let mu = report.baseline_mean;
            let first = values.iter().position(|&z| z > mu + drift);
            let zero_until = first.map(|i| i + 1).unwrap_or(values.len() + 1);
            prop_assert!(report.cusum_trace[..zero_until].iter().all(|&s| s == 0.0));
            if let (Some(onset), Some(det)) = (report.onset_index, report.detection_index) {
                prop_assert!(report.cusum_trace[det] >= cfg.threshold);
                prop_assert_eq!(report.cusum_trace[onset], 0.0);
                prop_assert!(report.cusum_trace[onset + 1..det].iter().all(|&s| s > 0.0));
            }
        }

        #[test]
        fn scale_equivariance(
            values in proptest::collection::vec(0.0f64..100.0, 8..120),
            drift in 0.0f64..5.0,
            extra in 0.1f64..50.0,
            c in prop::sample::select(vec![0.25f64, 0.5, 2.0, 4.0, 8.0]),
        ) {
            let cfg = OnsetConfig::absolute(drift, drift + extra, 8).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
            let cfg_scaled = OnsetConfig::absolute(drift * c, (drift + extra) * c, 8).unwrap();
            let a = detect_onset(&values, &cfg).unwrap();
            let b = detect_onset(&scaled, &cfg_scaled).unwrap();
            prop_assert_eq!(a.onset_index, b.onset_index);
            prop_assert_eq!(&a, &detect_onset(&values, &cfg).unwrap());
        }
    }
}
