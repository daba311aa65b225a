//! The three two-parameter diffusion families: Bass, shifted Gompertz and
//! Weibull.
//!
//! Parameters are validated once at construction. The `Diffusion` trait then
//! exposes checked evaluation (`pdf`, `cdf`, ...) for callers and unchecked
//! kernels (`cdf_sf`, `cdf_gradient`) for the fitting loop, which validates
//! its time grid up front.
//!
//! Exponentials are always evaluated with non-positive arguments and powers
//! `(t/λ)^κ` through logarithms, so long horizons underflow to 0 instead of
//! overflowing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Bass,
    #[serde(rename = "sg")]
    ShiftedGompertz,
    Weibull,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Bass, Family::ShiftedGompertz, Family::Weibull];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Bass => "bass",
            Family::ShiftedGompertz => "sg",
            Family::Weibull => "weibull",
        }
    }

    /// Names of `(θ₁, θ₂)` for this family.
    pub fn param_names(self) -> [&'static str; 2] {
        match self {
            Family::Bass => ["p", "q"],
            Family::ShiftedGompertz => ["beta", "eta"],
            Family::Weibull => ["kappa", "lambda"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bass" | "ba" => Ok(Family::Bass),
            "sg" | "shifted_gompertz" | "shifted-gompertz" | "gompertz" => Ok(Family::ShiftedGompertz),
            "weibull" | "wb" => Ok(Family::Weibull),
            other => Err(Error::Config(format!("unknown model family `{other}`"))),
        }
    }
}

/// Common interface of the diffusion families.
pub trait Diffusion {
    fn family(&self) -> Family;

    /// `(θ₁, θ₂)` in the family's natural parameterization.
    fn theta(&self) -> [f64; 2];

    /// Cumulative and survival function at `t`, each computed in the form that
    /// is accurate in its own tail. `t` must be non-negative; `+inf` is allowed.
    fn cdf_sf(&self, t: f64) -> (f64, f64);

    /// Partial derivatives of the cdf at `t` with respect to `(θ₁, θ₂)`.
    fn cdf_gradient(&self, t: f64) -> [f64; 2];

    /// Density without the domain check.
    fn density(&self, t: f64) -> f64;

    fn pdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.density(t))
    }

    fn cdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.cdf_sf(t).0)
    }

    fn sf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.cdf_sf(t).1)
    }

    /// Instantaneous adoption rate among non-adopters, `f(t) / (1 - F(t))`.
    fn hazard(&self, t: f64) -> Result<f64> {
        let f = self.pdf(t)?;
        let s = self.sf(t)?;
        Ok(if s > 0.0 { f / s } else { f64::INFINITY })
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        Err(Error::Domain(t))
    } else {
        Ok(())
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and >= 0",
        })
    }
}

// ---------------------------------------------------------------------------
// Bass
// ---------------------------------------------------------------------------

/// Bass model with innovation rate `p` and imitation rate `q` (per week).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BassParams {
    p: f64,
    q: f64,
}

impl BassParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        Ok(Self {
            p: positive("p", p)?,
            q: non_negative("q", q)?,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Location of the density maximum, `ln(q/p) / (p+q)`, or 0 when `q <= p`.
    pub fn peak_time(&self) -> f64 {
        if self.q > self.p {
            (self.q / self.p).ln() / (self.p + self.q)
        } else {
            0.0
        }
    }

    fn decay(&self, t: f64) -> f64 {
        (-(self.p + self.q) * t).exp()
    }
}

impl Diffusion for BassParams {
    fn family(&self) -> Family {
        Family::Bass
    }

    fn theta(&self) -> [f64; 2] {
        [self.p, self.q]
    }

    fn density(&self, t: f64) -> f64 {
        let s = self.p + self.q;
        let e = self.decay(t);
        let denom = 1.0 + (self.q / self.p) * e;
        s * s / self.p * e / (denom * denom)
    }

    fn cdf_sf(&self, t: f64) -> (f64, f64) {
        if t == f64::INFINITY {
            return (1.0, 0.0);
        }
        let s = self.p + self.q;
        let r = self.q / self.p;
        let e = self.decay(t);
        let denom = 1.0 + r * e;
        let one_minus_e = -(-s * t).exp_m1();
        (one_minus_e / denom, (1.0 + r) * e / denom)
    }

    fn cdf_gradient(&self, t: f64) -> [f64; 2] {
        if t == f64::INFINITY || t == 0.0 {
            return [0.0, 0.0];
        }
        let (p, q) = (self.p, self.q);
        let s = p + q;
        let r = q / p;
        let e = self.decay(t);
        let denom = 1.0 + r * e;
        let d2 = denom * denom;
        let one_minus_e = -(-s * t).exp_m1();
        let d_ds = t * e * (1.0 + r) / d2;
        let d_dr = -one_minus_e * e / d2;
        [d_ds - d_dr * q / (p * p), d_ds + d_dr / p]
    }

    fn hazard(&self, t: f64) -> Result<f64> {
        Ok(self.p + self.q * self.cdf(t)?)
    }
}

// ---------------------------------------------------------------------------
// Shifted Gompertz
// ---------------------------------------------------------------------------

/// Shifted Gompertz distribution with scale rate `beta` (per week) and shape
/// `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftedGompertzParams {
    beta: f64,
    eta: f64,
}

impl ShiftedGompertzParams {
    pub fn new(beta: f64, eta: f64) -> Result<Self> {
        Ok(Self {
            beta: positive("beta", beta)?,
            eta: non_negative("eta", eta)?,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

impl Diffusion for ShiftedGompertzParams {
    fn family(&self) -> Family {
        Family::ShiftedGompertz
    }

    fn theta(&self) -> [f64; 2] {
        [self.beta, self.eta]
    }

    fn density(&self, t: f64) -> f64 {
        let (b, eta) = (self.beta, self.eta);
        let e = (-b * t).exp();
        let one_minus_e = -(-b * t).exp_m1();
        b * e * (-eta * e).exp() * (1.0 + eta * one_minus_e)
    }

    fn cdf_sf(&self, t: f64) -> (f64, f64) {
        if t == f64::INFINITY {
            return (1.0, 0.0);
        }
        let (b, eta) = (self.beta, self.eta);
        let e = (-b * t).exp();
        let one_minus_e = -(-b * t).exp_m1();
        // F = exp(ln(1 - e) - eta e); expm1 keeps the survival side accurate
        let log_cdf = one_minus_e.ln() - eta * e;
        (log_cdf.exp(), -log_cdf.exp_m1())
    }

    fn cdf_gradient(&self, t: f64) -> [f64; 2] {
        if t == f64::INFINITY || t == 0.0 {
            return [0.0, 0.0];
        }
        let (b, eta) = (self.beta, self.eta);
        let e = (-b * t).exp();
        let one_minus_e = -(-b * t).exp_m1();
        let g = (-eta * e).exp();
        [t * e * g * (1.0 + eta * one_minus_e), -e * one_minus_e * g]
    }
}

// ---------------------------------------------------------------------------
// Weibull
// ---------------------------------------------------------------------------

/// Weibull distribution with shape `kappa` and scale `lambda` (weeks).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeibullParams {
    kappa: f64,
    lambda: f64,
}

impl WeibullParams {
    pub fn new(kappa: f64, lambda: f64) -> Result<Self> {
        let kappa = positive("kappa", kappa)?;
        let lambda = positive("lambda", lambda)?;
        let alpha = (-kappa * lambda.ln()).exp();
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: lambda,
                reason: "rate (1/lambda)^kappa must be finite and > 0",
            });
        }
        Ok(Self { kappa, lambda })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Rate `α = (1/λ)^κ`.
    pub fn alpha(&self) -> f64 {
        (-self.kappa * self.lambda.ln()).exp()
    }

    /// `(t/λ)^κ` for `t > 0`.
    fn scaled_power(&self, t: f64) -> f64 {
        (self.kappa * (t / self.lambda).ln()).exp()
    }
}

impl Diffusion for WeibullParams {
    fn family(&self) -> Family {
        Family::Weibull
    }

    fn theta(&self) -> [f64; 2] {
        [self.kappa, self.lambda]
    }

    fn density(&self, t: f64) -> f64 {
        if t == 0.0 {
            return match self.kappa.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Greater) => 0.0,
                Some(std::cmp::Ordering::Equal) => 1.0 / self.lambda,
                _ => f64::INFINITY,
            };
        }
        let (k, l) = (self.kappa, self.lambda);
        let log_ratio = (t / l).ln();
        let u = (k * log_ratio).exp();
        (k.ln() - l.ln() + (k - 1.0) * log_ratio - u).exp()
    }

    fn pdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        if t == 0.0 && self.kappa < 1.0 {
            return Err(Error::DensityEdge { kappa: self.kappa });
        }
        Ok(self.density(t))
    }

    fn cdf_sf(&self, t: f64) -> (f64, f64) {
        if t == 0.0 {
            return (0.0, 1.0);
        }
        if t == f64::INFINITY {
            return (1.0, 0.0);
        }
        let u = self.scaled_power(t);
        (-(-u).exp_m1(), (-u).exp())
    }

    fn cdf_gradient(&self, t: f64) -> [f64; 2] {
        if t == 0.0 || t == f64::INFINITY {
            return [0.0, 0.0];
        }
        let log_ratio = (t / self.lambda).ln();
        let u = (self.kappa * log_ratio).exp();
        let s = (-u).exp();
        [s * u * log_ratio, -s * self.kappa * u / self.lambda]
    }

    fn hazard(&self, t: f64) -> Result<f64> {
        let f = self.pdf(t)?;
        if t == 0.0 {
            return Ok(f);
        }
        Ok(self.kappa / self.lambda * ((self.kappa - 1.0) * (t / self.lambda).ln()).exp())
    }
}

// ---------------------------------------------------------------------------
// Family-agnostic parameter vector
// ---------------------------------------------------------------------------

/// Parameters of one fitted family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelParams {
    Bass(BassParams),
    #[serde(rename = "sg")]
    ShiftedGompertz(ShiftedGompertzParams),
    Weibull(WeibullParams),
}

impl ModelParams {
    pub fn from_theta(family: Family, theta: [f64; 2]) -> Result<Self> {
        Ok(match family {
            Family::Bass => ModelParams::Bass(BassParams::new(theta[0], theta[1])?),
            Family::ShiftedGompertz => ModelParams::ShiftedGompertz(ShiftedGompertzParams::new(theta[0], theta[1])?),
            Family::Weibull => ModelParams::Weibull(WeibullParams::new(theta[0], theta[1])?),
        })
    }

    fn inner(&self) -> &dyn Diffusion {
        match self {
            ModelParams::Bass(m) => m,
            ModelParams::ShiftedGompertz(m) => m,
            ModelParams::Weibull(m) => m,
        }
    }
}

impl From<BassParams> for ModelParams {
    fn from(p: BassParams) -> Self {
        ModelParams::Bass(p)
    }
}

impl From<ShiftedGompertzParams> for ModelParams {
    fn from(p: ShiftedGompertzParams) -> Self {
        ModelParams::ShiftedGompertz(p)
    }
}

impl From<WeibullParams> for ModelParams {
    fn from(p: WeibullParams) -> Self {
        ModelParams::Weibull(p)
    }
}

impl Diffusion for ModelParams {
    fn family(&self) -> Family {
        self.inner().family()
    }

    fn theta(&self) -> [f64; 2] {
        self.inner().theta()
    }

    fn cdf_sf(&self, t: f64) -> (f64, f64) {
        self.inner().cdf_sf(t)
    }

    fn cdf_gradient(&self, t: f64) -> [f64; 2] {
        self.inner().cdf_gradient(t)
    }

    fn density(&self, t: f64) -> f64 {
        self.inner().density(t)
    }

    fn pdf(&self, t: f64) -> Result<f64> {
        self.inner().pdf(t)
    }

    fn hazard(&self, t: f64) -> Result<f64> {
        self.inner().hazard(t)
    }
}

/// Exponential mixing of the shifted Gompertz shape: averaging
/// `f_SG(t | β, η)` over `η ~ Exponential(mean σ)` gives a Bass density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompoundLink {
    beta: f64,
    sigma: f64,
}

impl CompoundLink {
    pub fn new(beta: f64, sigma: f64) -> Result<Self> {
        Ok(Self {
            beta: positive("beta", beta)?,
            sigma: positive("sigma", sigma)?,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The implied Bass parameters `p = β/(1+σ)`, `q = pσ`.
    pub fn to_bass(&self) -> BassParams {
        let p = self.beta / (1.0 + self.sigma);
        BassParams { p, q: p * self.sigma }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use approx::assert_relative_eq;

    #[test]
    fn bass_density_at_origin_is_p() {
        let m = BassParams::new(0.01, 0.2).unwrap();
        assert_relative_eq!(m.pdf(0.0).unwrap(), 0.01, max_relative = 1e-14);
    }

    #[test]
    fn bass_without_imitation_is_exponential() {
        let m = BassParams::new(0.03, 0.0).unwrap();
        for t in [0.0, 1.0, 17.5, 300.0] {
            assert_relative_eq!(m.pdf(t).unwrap(), 0.03 * (-0.03 * t).exp(), max_relative = 1e-13);
        }
    }

    #[test]
    fn bass_peak_matches_grid_argmax() {
        let m = BassParams::new(0.03, 0.38).unwrap();
        let step = 1e-3;
        let (arg, _) = (0..20_000)
            .map(|i| i as f64 * step)
            .map(|t| (t, m.pdf(t).unwrap()))
            .fold((0.0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        let closed = (0.38f64 / 0.03).ln() / 0.41;
        assert!((arg - closed).abs() <= step);
        assert_relative_eq!(m.peak_time(), closed, max_relative = 1e-15);
    }

    #[test]
    fn bass_cdf_limits() {
        let m = BassParams::new(0.01, 0.2).unwrap();
        assert_eq!(m.cdf(0.0).unwrap(), 0.0);
        assert!(1.0 - m.cdf(10.0 / 0.21).unwrap() < 1e-3);
    }

    #[test]
    fn bass_hazard_limits_and_ratio() {
        let m = BassParams::new(0.02, 0.3).unwrap();
        assert_relative_eq!(m.hazard(0.0).unwrap(), 0.02, max_relative = 1e-15);
        assert_relative_eq!(m.hazard(1e4).unwrap(), 0.32, max_relative = 1e-12);
        for t in [1.0, 5.0, 9.0, 15.0] {
            let ratio = m.pdf(t).unwrap() / (1.0 - m.cdf(t).unwrap());
            assert_relative_eq!(m.hazard(t).unwrap(), ratio, max_relative = 1e-9);
        }
    }

    #[test]
    fn sg_limits() {
        let m = ShiftedGompertzParams::new(0.05, 0.0).unwrap();
        for t in [0.0, 3.0, 80.0] {
            assert_relative_eq!(m.pdf(t).unwrap(), 0.05 * (-0.05 * t).exp(), max_relative = 1e-13);
            assert_relative_eq!(m.cdf(t).unwrap(), 1.0 - (-0.05 * t).exp(), max_relative = 1e-13);
        }
        let m = ShiftedGompertzParams::new(0.05, 10.0).unwrap();
        assert_relative_eq!(m.pdf(0.0).unwrap(), 0.05 * (-10.0f64).exp(), max_relative = 1e-13);
        assert_eq!(m.cdf(0.0).unwrap(), 0.0);
    }

    #[test]
    fn sg_density_normalizes() {
        let m = ShiftedGompertzParams::new(0.05, 10.0).unwrap();
        let total = integrate(|t| m.density(t), 0.0, 2000.0, 1e-12);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn weibull_values() {
        let m = WeibullParams::new(2.0, 1.0).unwrap();
        assert_relative_eq!(m.pdf(1.0).unwrap(), 2.0 * (-1.0f64).exp(), max_relative = 1e-14);
        let e = WeibullParams::new(1.0, 7.0).unwrap();
        for t in [0.0, 2.0, 40.0] {
            assert_relative_eq!(e.pdf(t).unwrap(), (-t / 7.0).exp() / 7.0, max_relative = 1e-13);
        }
        let m = WeibullParams::new(1.7, 30.0).unwrap();
        assert_relative_eq!(m.cdf(30.0).unwrap(), 1.0 - (-1.0f64).exp(), max_relative = 1e-14);
        assert_eq!(m.cdf(0.0).unwrap(), 0.0);
    }

    #[test]
    fn weibull_rejects_unbounded_origin() {
        let m = WeibullParams::new(0.6, 10.0).unwrap();
        assert!(matches!(m.pdf(0.0), Err(Error::DensityEdge { .. })));
        assert_eq!(m.cdf(0.0).unwrap(), 0.0);
    }

    #[test]
    fn weibull_near_normal_shape() {
        // third standardized moment by quadrature
        let m = WeibullParams::new(3.5, 1.0).unwrap();
        let moment = |k: i32| integrate(|t| t.powi(k) * m.density(t), 0.0, 6.0, 1e-13);
        let mean = moment(1);
        let var = moment(2) - mean * mean;
        let third = moment(3) - 3.0 * mean * moment(2) + 2.0 * mean.powi(3);
        let skew = third / var.powf(1.5);
        assert!(skew.abs() < 0.1, "skewness {skew}");
    }

    #[test]
    fn negative_time_is_a_domain_error() {
        let m: ModelParams = BassParams::new(0.01, 0.1).unwrap().into();
        assert!(matches!(m.pdf(-1.0), Err(Error::Domain(_))));
        assert!(matches!(m.cdf(-1e-9), Err(Error::Domain(_))));
        assert!(matches!(m.hazard(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(BassParams::new(0.0, 0.1).is_err());
        assert!(BassParams::new(0.1, -0.1).is_err());
        assert!(ShiftedGompertzParams::new(-1.0, 1.0).is_err());
        assert!(ShiftedGompertzParams::new(1.0, f64::NAN).is_err());
        assert!(WeibullParams::new(1.0, 0.0).is_err());
        assert!(WeibullParams::new(400.0, 1e-3).is_err());
        assert!(CompoundLink::new(0.1, 0.0).is_err());
    }

    #[test]
    fn compound_link_arithmetic() {
        let b = CompoundLink::new(0.2, 19.0).unwrap().to_bass();
        assert_relative_eq!(b.p(), 0.01, max_relative = 1e-14);
        assert_relative_eq!(b.q(), 0.19, max_relative = 1e-14);
        let b = CompoundLink::new(0.2, 1e-12).unwrap().to_bass();
        assert_relative_eq!(b.p(), 0.2, max_relative = 1e-10);
        assert!(b.q() < 1e-12);
    }

    #[test]
    fn bass_rate_splits_into_growth_and_decline() {
        let m = BassParams::new(0.01, 0.19).unwrap();
        let (p, q) = (m.p(), m.q());
        for t in [0.0, 3.0, 15.0, 40.0, 120.0] {
            let f = m.cdf(t).unwrap();
            let pdf = m.pdf(t).unwrap();
            assert!((pdf - (p + (q - p) * f - q * f * f)).abs() < 1e-12);
            // without the -pF term the split only holds at the origin
            let short = p + q * f - q * f * f;
            if t > 0.0 {
                assert!((pdf - short).abs() > 1e-4 * p);
            }
        }
    }

    #[test]
    fn weibull_rate_splits_into_growth_and_decline() {
        let m = WeibullParams::new(2.4, 35.0).unwrap();
        for t in [0.5f64, 10.0, 35.0, 90.0] {
            let grow = m.alpha() * 2.4 * t.powf(1.4);
            let f = m.cdf(t).unwrap();
            assert!((m.pdf(t).unwrap() - (grow - grow * f)).abs() < 1e-12);
        }
    }

    #[test]
    fn family_names_round_trip() {
        for family in Family::ALL {
            assert_eq!(family.as_str().parse::<Family>().unwrap(), family);
        }
        assert!("logistic".parse::<Family>().is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let models: Vec<ModelParams> = vec![
            BassParams::new(0.01, 0.09).unwrap().into(),
            ShiftedGompertzParams::new(0.03, 8.0).unwrap().into(),
            WeibullParams::new(2.0, 80.0).unwrap().into(),
        ];
        for m in models {
            let theta = m.theta();
            for t in [0.5, 10.0, 55.0, 140.0] {
                let grad = m.cdf_gradient(t);
                for k in 0..2 {
                    let h = theta[k] * 1e-6;
                    let mut up = theta;
                    let mut dn = theta;
                    up[k] += h;
                    dn[k] -= h;
                    // difference the survival function, which has no cancellation near F = 1
                    let su = ModelParams::from_theta(m.family(), up).unwrap().sf(t).unwrap();
                    let sd = ModelParams::from_theta(m.family(), dn).unwrap().sf(t).unwrap();
                    let fdiff = -(su - sd) / (2.0 * h);
                    assert!(
                        (grad[k] - fdiff).abs() <= 1e-6 * fdiff.abs().max(1e-6),
                        "{:?} t={t} k={k}: {} vs {}",
                        m.family(),
                        grad[k],
                        fdiff
                    );
                }
            }
        }
    }
}
