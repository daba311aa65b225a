//! χ² survival function for goodness-of-fit p-values.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// `P(X > x)` for `X ~ χ²(dof)`.
pub fn chi2_survival(x: f64, dof: u32) -> crate::Result<f64> {
    if dof == 0 {
        return Err(crate::Error::Config("χ² degrees of freedom must be >= 1".into()));
    }
    if x.is_nan() || x < 0.0 {
        return Err(crate::Error::Domain(x));
    }
    let dist = ChiSquared::new(f64::from(dof)).expect("dof is positive");
    Ok(dist.sf(x).clamp(0.0, 1.0))
}
