//! Synthetic binned series drawn from known parameters, for tests, benches
//! and the bundled smoke corpus.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::dataset::PreparedSeries;
use crate::error::{Error, Result};
use crate::fit::bin_probabilities;
use crate::model::Diffusion;

/// Weekly edges `start, start+1, ..., start+bins`.
pub fn weekly_edges(start: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| start + i as f64).collect()
}

/// `n p_i` for each bin.
pub fn expected_counts(params: &impl Diffusion, edges: &[f64], n: f64) -> Result<Vec<f64>> {
    Ok(bin_probabilities(params, edges)?
        .probs
        .into_iter()
        .map(|p| n * p)
        .collect())
}

/// One multinomial draw of `n` events over the bins, by sequential binomials.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<f64> {
    let mut remaining = n;
    let mut mass_left = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        if remaining == 0 || mass_left <= 0.0 {
            out.push(0.0);
            continue;
        }
        let share = (p / mass_left).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, share)
            .expect("share is clamped to [0, 1]")
            .sample(rng);
        out.push(k as f64);
        remaining -= k;
        mass_left -= p;
    }
    if remaining > 0 {
        if let Some(last) = out.last_mut() {
            *last += remaining as f64;
        }
    }
    out
}

pub fn sample_counts<R: Rng + ?Sized>(rng: &mut R, params: &impl Diffusion, edges: &[f64], n: u64) -> Result<Vec<f64>> {
    let probs = bin_probabilities(params, edges)?.probs;
    Ok(multinomial(rng, n, &probs))
}

/// Sampled series on the given edges; `T` is taken from the first edge.
pub fn sampled_series<R: Rng + ?Sized>(
    rng: &mut R,
    params: &impl Diffusion,
    edges: Vec<f64>,
    n: u64,
) -> Result<PreparedSeries> {
    let counts = sample_counts(rng, params, &edges, n)?;
    let offset = edges[0].floor() as u32;
    PreparedSeries::with_edges("synthetic", "WW", offset, edges, counts)
}

/// Exact expected counts as a series.
pub fn expected_series(params: &impl Diffusion, edges: Vec<f64>, n: f64) -> Result<PreparedSeries> {
    let counts = expected_counts(params, &edges, n)?;
    let offset = edges[0].floor() as u32;
    PreparedSeries::with_edges("synthetic", "WW", offset, edges, counts)
}

/// `t` with `F(t) = u`, by bisection.
pub fn quantile(params: &impl Diffusion, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Config(format!("quantile level must be in (0, 1), got {u}")));
    }
    let mut hi = 1.0;
    while params.cdf_sf(hi).0 < u {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Config("quantile does not exist below 1e12".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if params.cdf_sf(mid).0 < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
