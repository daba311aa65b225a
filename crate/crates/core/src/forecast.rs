//! Extrapolation of a fitted curve past the observed window and
//! reconstruction of the unobserved past, on the relative 0–100 scale where
//! the fitted curve's in-window maximum is 100.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::PreparedSeries;
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::model::{Diffusion, Family, ModelParams};

/// Share of the peak that marks the implied onset of a reconstructed past.
pub const ONSET_PEAK_SHARE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Past,
    ObservedFit,
    Forecast,
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Segment::Past => "past",
            Segment::ObservedFit => "observed_fit",
            Segment::Forecast => "forecast",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub week: f64,
    pub value: f64,
    pub segment: Segment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PastReconstruction {
    pub samples: Vec<Sample>,
    /// First week whose scaled value exceeds 1% of the curve's peak.
    pub implied_onset: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub family: Family,
    pub params: ModelParams,
    pub horizon_weeks: u32,
    /// Observed-window and forecast samples, one per week from the first edge.
    pub samples: Vec<Sample>,
    pub scale_factor: f64,
    pub past_segment: Option<PastReconstruction>,
}

/// Fitted curve at week `t`. Where the density is unbounded (Weibull with
/// shape < 1 at the origin) the mean density over the following week is used.
fn curve(params: &ModelParams, t: f64) -> f64 {
    let f = params.density(t);
    if f.is_finite() {
        f
    } else {
        let (lo, _) = params.cdf_sf(t);
        let (hi, _) = params.cdf_sf(t + 1.0);
        hi - lo
    }
}

fn observed_weeks(series: &PreparedSeries) -> impl Iterator<Item = f64> + '_ {
    let t0 = series.first_edge();
    let span = (series.last_edge() - t0).floor() as u64;
    (0..=span).map(move |k| t0 + k as f64)
}

/// `100 / max f(t)` over the weekly points of the observed window.
pub fn scale_factor(params: &ModelParams, series: &PreparedSeries) -> Result<f64> {
    let peak = observed_weeks(series).map(|t| curve(params, t)).fold(0.0_f64, f64::max);
    if !(peak.is_finite() && peak > f64::MIN_POSITIVE) {
        return Err(Error::ZeroDensity);
    }
    Ok(100.0 / peak)
}

fn past(params: &ModelParams, series: &PreparedSeries, scale: f64) -> Result<PastReconstruction> {
    let offset = series.offset_weeks;
    if offset == 0 {
        return Err(Error::NoPastWindow);
    }
    let samples: Vec<Sample> = (0..offset)
        .map(|w| Sample {
            week: f64::from(w),
            value: scale * curve(params, f64::from(w)),
            segment: Segment::Past,
        })
        .collect();
    let last = series.last_edge().floor() as u32;
    let values: Vec<f64> = (0..=last).map(|w| scale * curve(params, f64::from(w))).collect();
    let peak = values.iter().copied().fold(0.0_f64, f64::max);
    let implied_onset = values
        .iter()
        .position(|&v| v > ONSET_PEAK_SHARE * peak)
        .map(|w| w as u32);
    Ok(PastReconstruction { samples, implied_onset })
}

/// Scaled fitted curve over the observed window and `horizon_weeks` beyond
/// it, plus the reconstructed past when the series starts after `t = 0`.
///
/// Whether to forecast from an unconverged fit is the caller's decision.
pub fn forecast(result: &FitResult, series: &PreparedSeries, horizon_weeks: u32) -> Result<Forecast> {
    let params = result.params;
    let scale = scale_factor(&params, series)?;
    let last = series.last_edge();
    let mut samples: Vec<Sample> = observed_weeks(series)
        .map(|t| Sample {
            week: t,
            value: scale * curve(&params, t),
            segment: Segment::ObservedFit,
        })
        .collect();
    let end = samples.last().map_or(last, |s| s.week);
    samples.extend((1..=horizon_weeks).map(|k| {
        let t = end + f64::from(k);
        Sample {
            week: t,
            value: scale * curve(&params, t),
            segment: Segment::Forecast,
        }
    }));
    let past_segment = if series.offset_weeks > 0 {
        Some(past(&params, series, scale)?)
    } else {
        None
    };
    Ok(Forecast {
        family: result.family,
        params,
        horizon_weeks,
        samples,
        scale_factor: scale,
        past_segment,
    })
}

/// Scaled fitted curve on the unobserved weeks `0..T`.
pub fn reconstruct_past(result: &FitResult, series: &PreparedSeries) -> Result<PastReconstruction> {
    if series.offset_weeks == 0 {
        return Err(Error::NoPastWindow);
    }
    let scale = scale_factor(&result.params, series)?;
    past(&result.params, series, scale)
}

impl Forecast {
    /// Past, observed and forecast samples in week order.
    pub fn all_samples(&self) -> impl Iterator<Item = &Sample> {
        self.past_segment
            .iter()
            .flat_map(|p| p.samples.iter())
            .chain(self.samples.iter())
    }

    /// Writes `week,value,segment` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["week", "value", "segment"])?;
        for s in self.all_samples() {
            wtr.write_record([format!("{}", s.week), format!("{:.6}", s.value), s.segment.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{evaluate_fit, FitConfig};
    use crate::model::{ShiftedGompertzParams, WeibullParams};
    use crate::synth::{expected_series, weekly_edges};

    fn exact_fit(params: ModelParams, edges: Vec<f64>) -> (FitResult, PreparedSeries) {
        let series = expected_series(&params, edges, 10_000.0).unwrap();
        let result = evaluate_fit(&series, params, &FitConfig::default()).unwrap();
        (result, series)
    }

    #[test]
    fn zero_horizon_covers_window_with_max_100() {
        let params: ModelParams = WeibullParams::new(2.0, 80.0).unwrap().into();
        let (result, series) = exact_fit(params, weekly_edges(0.0, 300));
        let f = forecast(&result, &series, 0).unwrap();
        assert_eq!(f.samples.len(), 301);
        assert_eq!(f.samples.first().unwrap().week, 0.0);
        assert_eq!(f.samples.last().unwrap().week, 300.0);
        let max = f.samples.iter().map(|s| s.value).fold(0.0, f64::max);
        assert!((max - 100.0).abs() < 1e-12);
        assert!(f.samples.iter().all(|s| s.segment == Segment::ObservedFit));
        assert!(f.past_segment.is_none());
    }

    #[test]
    fn tail_after_in_window_peak_decreases() {
        let params: ModelParams = WeibullParams::new(2.0, 80.0).unwrap().into();
        let (result, series) = exact_fit(params, weekly_edges(0.0, 200));
        let f = forecast(&result, &series, 260).unwrap();
        assert_eq!(f.samples.len(), 201 + 260);
        let future: Vec<f64> = f
            .samples
            .iter()
            .filter(|s| s.segment == Segment::Forecast)
            .map(|s| s.value)
            .collect();
        assert_eq!(future.len(), 260);
        assert!(future.iter().all(|&v| (0.0..100.0).contains(&v)));
        assert!(future.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn five_year_ratio_matches_density_ratio() {
        let sg = ShiftedGompertzParams::new(0.0045, 30.0).unwrap();
        let params: ModelParams = sg.into();
        let (result, series) = exact_fit(params, weekly_edges(0.0, 483));
        let f = forecast(&result, &series, 260).unwrap();
        // with eta = 30 the density peaks near ln(30)/beta ~ week 756, so the
        // in-window maximum sits at the last observed week
        let (peak_idx, peak) = f
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.segment == Segment::ObservedFit)
            .max_by(|a, b| a.1.value.total_cmp(&b.1.value))
            .map(|(i, s)| (i, *s))
            .unwrap();
        assert_eq!(peak.week, 483.0);
        assert!((peak.value - 100.0).abs() < 1e-12);
        let later = f.samples[peak_idx + 260];
        assert_eq!(later.week, peak.week + 260.0);
        let ratio = later.value / peak.value;
        let oracle = sg.pdf(peak.week + 260.0).unwrap() / sg.pdf(peak.week).unwrap();
        assert!((ratio - oracle).abs() < 1e-9);
    }

    #[test]
    fn past_requires_offset() {
        let params: ModelParams = WeibullParams::new(2.0, 80.0).unwrap().into();
        let (result, series) = exact_fit(params, weekly_edges(0.0, 100));
        assert!(matches!(reconstruct_past(&result, &series), Err(Error::NoPastWindow)));
    }

    #[test]
    fn past_segment_for_late_window() {
        let params: ModelParams = WeibullParams::new(2.0, 80.0).unwrap().into();
        let (result, series) = exact_fit(params, weekly_edges(77.0, 300));
        let f = forecast(&result, &series, 10).unwrap();
        let past = f.past_segment.as_ref().unwrap();
        assert_eq!(past.samples.len(), 77);
        assert_eq!(past.samples[0].week, 0.0);
        assert_eq!(past.implied_onset, Some(1));
        // the mode lies in the past, above the in-window maximum
        assert!(past.samples[57].value > 100.0);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("week,value,segment\n0,0.000000,past\n"));
        assert_eq!(text.lines().count(), 1 + 77 + 301 + 10);
    }

    #[test]
    fn unbounded_origin_uses_first_week_mass() {
        let params: ModelParams = WeibullParams::new(0.7, 50.0).unwrap().into();
        let (result, series) = exact_fit(params, weekly_edges(0.0, 100));
        let f = forecast(&result, &series, 0).unwrap();
        assert!(f.samples.iter().all(|s| s.value.is_finite()));
        assert!((f.samples[0].value - 100.0).abs() < 1e-12);
    }
}
