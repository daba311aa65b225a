//! Multinomial maximum likelihood for binned, truncated series.
//!
//! Bin probabilities are cdf differences renormalized by the observed mass
//! `F(t_m) - F(t_0)`. Estimation runs iteratively reweighted least squares on
//! `Σ w_i (y_i - n p_i(θ))²` with `w_i = 1 / max(n p_i, floor)`: each
//! iteration freezes the weights, takes one damped Gauss–Newton step in
//! log-parameter space and halves it until the frozen objective decreases.
//! Without the floor, the fixed point of this iteration is the multinomial
//! maximum-likelihood estimate.
//!
//! Goodness of fit is Pearson's statistic at the estimate, computed after
//! merging adjacent bins until every expected count is at least 1, against
//! χ² with `groups - 3` degrees of freedom.

pub mod chi2;

use serde::{Deserialize, Serialize};

use crate::dataset::PreparedSeries;
use crate::error::{Error, Result};
use crate::model::{Diffusion, Family, ModelParams};

pub use chi2::chi2_survival;

/// Below this the truncated bin probabilities cannot be renormalized.
pub const MIN_TRUNCATION_MASS: f64 = 1e-12;

const MAX_HALVINGS: u32 = 20;

/// Scaling of a grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisScale {
    #[default]
    Absolute,
    /// Multiples of the last bin edge of the series.
    SeriesSpan,
    /// Multiples of the first parameter of the same grid point.
    TimesFirst,
}

/// Log-spaced grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: AxisScale,
}

impl Axis {
    pub const fn new(min: f64, max: f64, points: usize, scale: AxisScale) -> Self {
        Self {
            min,
            max,
            points,
            scale,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points <= 1 {
            return vec![self.min];
        }
        let ratio = (self.max / self.min).ln();
        (0..self.points)
            .map(|i| self.min * (ratio * i as f64 / (self.points - 1) as f64).exp())
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let ok =
            self.min.is_finite() && self.max.is_finite() && self.min > 0.0 && self.max >= self.min && self.points >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid grid axis {self:?}")))
        }
    }
}

/// Starting points tried before the iteration; the one with the lowest
/// weighted residual sum of squares wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitializerGrid {
    pub bass: [Axis; 2],
    pub sg: [Axis; 2],
    pub weibull: [Axis; 2],
}

impl Default for InitializerGrid {
    fn default() -> Self {
        use AxisScale::*;
        Self {
            // p, and q as a multiple of p
            bass: [Axis::new(1e-4, 1e-1, 7, Absolute), Axis::new(1.0, 100.0, 5, TimesFirst)],
            sg: [Axis::new(1e-3, 0.3, 7, Absolute), Axis::new(0.1, 100.0, 5, Absolute)],
            weibull: [Axis::new(0.5, 4.0, 6, Absolute), Axis::new(0.1, 2.0, 5, SeriesSpan)],
        }
    }
}

impl InitializerGrid {
    fn axes(&self, family: Family) -> &[Axis; 2] {
        match family {
            Family::Bass => &self.bass,
            Family::ShiftedGompertz => &self.sg,
            Family::Weibull => &self.weibull,
        }
    }

    /// Candidate `(θ₁, θ₂)` for `family` on a series whose last edge is `span`.
    pub fn points(&self, family: Family, span: f64) -> Vec<[f64; 2]> {
        let [a1, a2] = self.axes(family);
        let mut out = Vec::with_capacity(a1.points * a2.points);
        for t1 in a1.values() {
            for raw in a2.values() {
                let t2 = match a2.scale {
                    AxisScale::Absolute => raw,
                    AxisScale::SeriesSpan => raw * span,
                    AxisScale::TimesFirst => raw * t1,
                };
                let t1 = match a1.scale {
                    AxisScale::SeriesSpan => t1 * span,
                    _ => t1,
                };
                out.push([t1, t2]);
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        for axis in self.bass.iter().chain(&self.sg).chain(&self.weibull) {
            axis.validate()?;
        }
        for axes in [&self.bass, &self.sg, &self.weibull] {
            if axes[0].scale == AxisScale::TimesFirst {
                return Err(Error::Config("first grid axis cannot be relative to itself".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iterations: u32,
    /// Stop when the largest relative parameter change falls below this.
    pub param_tolerance: f64,
    /// Stop when the relative change of the reweighted objective falls below this.
    pub objective_tolerance: f64,
    pub initializer_grid: InitializerGrid,
    /// Minimum expected count `n p_i` used in the weights.
    pub weight_floor: f64,
    /// Levenberg-style diagonal damping of the Gauss–Newton normal equations.
    pub damping: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            param_tolerance: 1e-9,
            objective_tolerance: 1e-12,
            initializer_grid: InitializerGrid::default(),
            weight_floor: 0.5,
            damping: 0.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        for (name, v) in [
            ("param_tolerance", self.param_tolerance),
            ("objective_tolerance", self.objective_tolerance),
            ("weight_floor", self.weight_floor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(Error::Config(format!("damping must be >= 0, got {}", self.damping)));
        }
        self.initializer_grid.validate()
    }
}

/// Renormalized bin probabilities and the observed mass they were divided by.
#[derive(Debug, Clone, PartialEq)]
pub struct BinProbabilities {
    pub probs: Vec<f64>,
    pub truncation_mass: f64,
}

fn check_edges(edges: &[f64]) -> Result<()> {
    let ok = edges.len() >= 2 && edges[0].is_finite() && edges[0] >= 0.0 && edges.windows(2).all(|w| w[1] > w[0]);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidEdges)
    }
}

/// Unnormalized probability of `(a, b]` from cdf/sf pairs, taking the
/// difference on whichever side of the median it is exact.
fn bin_mass(lo: (f64, f64), hi: (f64, f64)) -> f64 {
    if hi.0 <= 0.5 {
        (hi.0 - lo.0).max(0.0)
    } else {
        (lo.1 - hi.1).max(0.0)
    }
}

/// `p_i = (F(t_i) - F(t_{i-1})) / (F(t_m) - F(t_0))`. The last edge may be
/// `+inf`.
pub fn bin_probabilities(params: &impl Diffusion, edges: &[f64]) -> Result<BinProbabilities> {
    check_edges(edges)?;
    raw_probabilities(params, edges)
}

fn raw_probabilities(params: &impl Diffusion, edges: &[f64]) -> Result<BinProbabilities> {
    let cs: Vec<(f64, f64)> = edges.iter().map(|&t| params.cdf_sf(t)).collect();
    let mut probs: Vec<f64> = cs.windows(2).map(|w| bin_mass(w[0], w[1])).collect();
    let mass: f64 = probs.iter().sum();
    if mass.is_nan() || mass < MIN_TRUNCATION_MASS {
        return Err(Error::DegenerateTruncation(mass));
    }
    probs.iter_mut().for_each(|p| *p /= mass);
    Ok(BinProbabilities {
        probs,
        truncation_mass: mass,
    })
}

/// Probabilities plus their Jacobian with respect to `ln θ`.
struct Evaluation {
    probs: Vec<f64>,
    jacobian: Vec<[f64; 2]>,
}

fn evaluate(params: &ModelParams, edges: &[f64]) -> Result<Evaluation> {
    let bp = raw_probabilities(params, edges)?;
    let theta = params.theta();
    let grads: Vec<[f64; 2]> = edges
        .iter()
        .map(|&t| {
            let g = params.cdf_gradient(t);
            [g[0] * theta[0], g[1] * theta[1]]
        })
        .collect();
    let raw_grad: Vec<[f64; 2]> = grads
        .windows(2)
        .map(|w| [w[1][0] - w[0][0], w[1][1] - w[0][1]])
        .collect();
    let dmass = raw_grad
        .iter()
        .fold([0.0, 0.0], |acc, g| [acc[0] + g[0], acc[1] + g[1]]);
    let inv = 1.0 / bp.truncation_mass;
    let jacobian = raw_grad
        .iter()
        .zip(&bp.probs)
        .map(|(g, &p)| [(g[0] - p * dmass[0]) * inv, (g[1] - p * dmass[1]) * inv])
        .collect();
    Ok(Evaluation {
        probs: bp.probs,
        jacobian,
    })
}

fn weights(probs: &[f64], n: f64, floor: f64) -> Vec<f64> {
    probs.iter().map(|&p| 1.0 / (n * p).max(floor)).collect()
}

fn weighted_rss(counts: &[f64], probs: &[f64], weights: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .zip(probs)
        .zip(weights)
        .map(|((&y, &p), &w)| {
            let r = y - n * p;
            w * r * r
        })
        .sum()
}

/// Pearson statistic over groups of adjacent bins, each with expected count
/// at least 1. A short remainder joins the last group.
pub fn merged_pearson(counts: &[f64], expected: &[f64]) -> (f64, usize) {
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut y_acc, mut e_acc) = (0.0, 0.0);
    for (&y, &e) in counts.iter().zip(expected) {
        y_acc += y;
        e_acc += e;
        if e_acc >= 1.0 {
            groups.push((y_acc, e_acc));
            y_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if y_acc > 0.0 || e_acc > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += y_acc;
                last.1 += e_acc;
            }
            None => groups.push((y_acc, e_acc)),
        }
    }
    let stat = groups
        .iter()
        .map(|&(y, e)| if e > 0.0 { (y - e).powi(2) / e } else { 0.0 })
        .sum();
    (stat, groups.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub family: Family,
    pub params: ModelParams,
    /// Pearson χ² statistic on merged bins: the final weighted residual sum of
    /// squares with `w_i = 1/(n p_i)`.
    pub rss: f64,
    /// IRLS objective at the estimate with floored weights, before merging.
    pub objective: f64,
    pub dof: u32,
    pub p_value: f64,
    pub iterations: u32,
    pub converged: bool,
    /// `F(t_m) - F(t_0)` at the estimate.
    pub truncation_mass: f64,
    /// Parameters after each accepted step, starting with the initializer.
    #[serde(skip)]
    pub iterates: Vec<[f64; 2]>,
}

impl FitResult {
    pub fn theta(&self) -> [f64; 2] {
        self.params.theta()
    }
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !det.is_finite() || det.abs() <= f64::EPSILON * (a[0][0] * a[1][1]).abs() {
        return None;
    }
    Some([
        (b[0] * a[1][1] - b[1] * a[0][1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ])
}

fn params_at(family: Family, log_theta: [f64; 2]) -> Result<ModelParams> {
    ModelParams::from_theta(family, [log_theta[0].exp(), log_theta[1].exp()])
}

/// Best grid point by weighted RSS, or `None` if no grid point is usable.
fn initialize(series: &PreparedSeries, family: Family, config: &FitConfig) -> Option<ModelParams> {
    let n = series.total();
    let mut best: Option<(f64, ModelParams)> = None;
    for theta in config.initializer_grid.points(family, series.last_edge()) {
        let Ok(params) = ModelParams::from_theta(family, theta) else {
            continue;
        };
        let Ok(bp) = raw_probabilities(&params, &series.bin_edges) else {
            continue;
        };
        let w = weights(&bp.probs, n, config.weight_floor);
        let rss = weighted_rss(&series.counts, &bp.probs, &w, n);
        if rss.is_finite() && best.as_ref().is_none_or(|(b, _)| rss < *b) {
            best = Some((rss, params));
        }
    }
    best.map(|(_, p)| p)
}

/// Fits one family to a prepared series.
pub fn fit(series: &PreparedSeries, family: Family, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    check_edges(&series.bin_edges)?;
    let m = series.bins();
    if m < 4 {
        return Err(Error::TooFewBins(m));
    }
    if series.counts.iter().filter(|&&y| y > 0.0).count() < 2 {
        return Err(Error::DegenerateData(
            "fewer than two bins carry positive counts".into(),
        ));
    }
    let n = series.total();
    let y = &series.counts;
    let edges = &series.bin_edges;
    let floor = config.weight_floor;

    let start = initialize(series, family, config)
        .ok_or_else(|| Error::DegenerateData(format!("no {family} initializer gives usable bin probabilities")))?;
    let theta0 = start.theta();
    let mut x = [theta0[0].ln(), theta0[1].ln()];
    let mut iterates = vec![theta0];
    let mut iterations = 0;
    let mut converged = false;
    let mut previous_objective = f64::INFINITY;

    while iterations < config.max_iterations {
        let params = params_at(family, x)?;
        let ev = evaluate(&params, edges)?;
        let w = weights(&ev.probs, n, floor);
        let objective = weighted_rss(y, &ev.probs, &w, n);

        let mut a = [[0.0; 2]; 2];
        let mut g = [0.0; 2];
        for i in 0..m {
            let j = [n * ev.jacobian[i][0], n * ev.jacobian[i][1]];
            let r = y[i] - n * ev.probs[i];
            for row in 0..2 {
                g[row] += w[i] * j[row] * r;
                for col in 0..2 {
                    a[row][col] += w[i] * j[row] * j[col];
                }
            }
        }
        a[0][0] *= 1.0 + config.damping;
        a[1][1] *= 1.0 + config.damping;
        let Some(delta) = solve2(a, g) else {
            break;
        };

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = [x[0] + scale * delta[0], x[1] + scale * delta[1]];
            let frozen = params_at(family, trial)
                .and_then(|p| raw_probabilities(&p, edges))
                .map(|bp| weighted_rss(y, &bp.probs, &w, n));
            if let Ok(value) = frozen {
                if value < objective {
                    accepted = Some(trial);
                    break;
                }
            }
            scale *= 0.5;
        }
        let step = delta[0].abs().max(delta[1].abs());
        let Some(next) = accepted else {
            // no descent left along the Gauss–Newton direction
            converged = step < config.param_tolerance.sqrt();
            break;
        };
        let moved = (next[0] - x[0]).abs().max((next[1] - x[1]).abs());
        x = next;
        iterations += 1;
        iterates.push([x[0].exp(), x[1].exp()]);

        let objective_change = (previous_objective - objective).abs();
        previous_objective = objective;
        if moved < config.param_tolerance || objective_change <= config.objective_tolerance * objective.max(1.0) {
            converged = true;
            break;
        }
    }

    let params = params_at(family, x)?;
    finish(series, params, iterations, converged, iterates, floor)
}

fn finish(
    series: &PreparedSeries,
    params: ModelParams,
    iterations: u32,
    converged: bool,
    iterates: Vec<[f64; 2]>,
    floor: f64,
) -> Result<FitResult> {
    let n = series.total();
    let bp = raw_probabilities(&params, &series.bin_edges)?;
    let w = weights(&bp.probs, n, floor);
    let objective = weighted_rss(&series.counts, &bp.probs, &w, n);
    let expected: Vec<f64> = bp.probs.iter().map(|p| n * p).collect();
    let (rss, groups) = merged_pearson(&series.counts, &expected);
    let dof = groups.saturating_sub(3).max(1) as u32;
    let p_value = chi2_survival(rss, dof)?;
    Ok(FitResult {
        family: params.family(),
        params,
        rss,
        objective,
        dof,
        p_value,
        iterations,
        converged,
        truncation_mass: bp.truncation_mass,
        iterates,
    })
}

/// Goodness of fit of given parameters, without estimation.
pub fn evaluate_fit(series: &PreparedSeries, params: ModelParams, config: &FitConfig) -> Result<FitResult> {
    check_edges(&series.bin_edges)?;
    let theta = params.theta();
    finish(series, params, 0, true, vec![theta], config.weight_floor)
}

/// Results of fitting every family to one series.
#[derive(Debug)]
pub struct FitSet {
    pub results: Vec<FitResult>,
    pub failures: Vec<(Family, Error)>,
    pub best_family: Family,
}

impl FitSet {
    pub fn get(&self, family: Family) -> Option<&FitResult> {
        self.results.iter().find(|r| r.family == family)
    }

    pub fn best(&self) -> &FitResult {
        self.get(self.best_family).expect("best family is always present")
    }
}

fn preference(family: Family) -> u8 {
    match family {
        Family::ShiftedGompertz => 0,
        Family::Bass => 1,
        Family::Weibull => 2,
    }
}

/// Highest p-value; ties go to the lower residual sum of squares, then to the
/// shifted Gompertz.
pub fn select_best<'a>(results: impl IntoIterator<Item = &'a FitResult>) -> Option<&'a FitResult> {
    results.into_iter().min_by(|a, b| {
        b.p_value
            .total_cmp(&a.p_value)
            .then(a.rss.total_cmp(&b.rss))
            .then(preference(a.family).cmp(&preference(b.family)))
    })
}

pub fn fit_all(series: &PreparedSeries, config: &FitConfig) -> Result<FitSet> {
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for family in Family::ALL {
        match fit(series, family, config) {
            Ok(r) => results.push(r),
            Err(e) => failures.push((family, e)),
        }
    }
    let best_family = match select_best(&results) {
        Some(best) => best.family,
        None => return Err(Error::AllFamiliesFailed(failures)),
    };
    Ok(FitSet {
        results,
        failures,
        best_family,
    })
}

/// Flat record written by the CLI, one per `(series, family)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub service: String,
    pub region: String,
    pub family: Family,
    pub theta1: f64,
    pub theta2: f64,
    pub rss: f64,
    pub dof: u32,
    pub p_value: f64,
    pub converged: bool,
    pub truncation_mass: f64,
}

impl FitRecord {
    pub fn new(series: &PreparedSeries, result: &FitResult) -> Self {
        let [theta1, theta2] = result.theta();
        Self {
            service: series.service.clone(),
            region: series.region.clone(),
            family: result.family,
            theta1,
            theta2,
            rss: result.rss,
            dof: result.dof,
            p_value: result.p_value,
            converged: result.converged,
            truncation_mass: result.truncation_mass,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::from_theta(self.family, [self.theta1, self.theta2])
    }

    /// Rebuilds a result from a record. Diagnostics not stored in the record
    /// (objective, iterations) are zeroed.
    pub fn to_result(&self) -> Result<FitResult> {
        Ok(FitResult {
            family: self.family,
            params: self.params()?,
            rss: self.rss,
            objective: 0.0,
            dof: self.dof,
            p_value: self.p_value,
            iterations: 0,
            converged: self.converged,
            truncation_mass: self.truncation_mass,
            iterates: Vec::new(),
        })
    }
}
