mod common;

use adoptfit_core::{BassParams, CompoundLink, Diffusion, ModelParams, ShiftedGompertzParams, WeibullParams};
use common::quad::{integrate, integrate_to_inf};
use proptest::prelude::*;

fn any_model() -> impl Strategy<Value = ModelParams> {
    prop_oneof![
        (1e-3f64..0.1, 0.0f64..40.0).prop_map(|(p, ratio)| BassParams::new(p, p * ratio).unwrap().into()),
        (1e-3f64..0.3, 0.0f64..60.0).prop_map(|(b, e)| ShiftedGompertzParams::new(b, e).unwrap().into()),
        (0.5f64..4.0, 5.0f64..300.0).prop_map(|(k, l)| WeibullParams::new(k, l).unwrap().into()),
    ]
}

/// A time scale over which most of the mass has arrived.
fn horizon(m: &ModelParams) -> f64 {
    let mut t = 1.0;
    while m.cdf(t).unwrap() < 0.999 {
        t *= 1.5;
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_is_nonnegative_and_cdf_monotone(m in any_model()) {
        let h = horizon(&m);
        let mut last = 0.0;
        for i in 1..=400 {
            let t = h * f64::from(i) / 200.0;
            prop_assert!(m.pdf(t).unwrap() >= 0.0);
            let f = m.cdf(t).unwrap();
            prop_assert!(f >= last);
            prop_assert!((0.0..=1.0).contains(&f));
            last = f;
        }
        prop_assert_eq!(m.cdf(0.0).unwrap(), 0.0);
        prop_assert!(m.cdf(h * 50.0).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn cdf_derivative_is_density(m in any_model()) {
        let h = horizon(&m);
        for frac in [0.05, 0.2, 0.5, 0.9] {
            let t = h * frac;
            let step = t * 1e-5;
            // difference whichever side of the distribution is small
            let (fu, su) = m.cdf_sf(t + step);
            let (fd_, sd) = m.cdf_sf(t - step);
            let diff = if fu < 0.5 { fu - fd_ } else { sd - su };
            let fd = diff / (2.0 * step);
            let pdf = m.pdf(t).unwrap();
            prop_assert!((fd - pdf).abs() <= 1e-5 * pdf.max(1e-12), "{:?} t={}: {} vs {}", m, t, fd, pdf);
        }
    }

    #[test]
    fn density_integrates_to_cdf(m in any_model()) {
        let h = horizon(&m);
        // start just off the origin so an unbounded Weibull density stays finite
        let a = 1e-9 * h;
        for frac in [0.1, 0.6, 1.5] {
            let t = h * frac;
            let mass = integrate(|s| m.density(s), a, t, 1e-11) + m.cdf(a).unwrap();
            prop_assert!((mass - m.cdf(t).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn hazard_is_density_over_survival(m in any_model()) {
        let h = horizon(&m);
        let t = 0.4 * h;
        let ratio = m.pdf(t).unwrap() / m.sf(t).unwrap();
        prop_assert!((m.hazard(t).unwrap() / ratio - 1.0).abs() < 1e-10);
    }
}

#[test]
fn total_mass_is_one() {
    let models: [ModelParams; 3] = [
        BassParams::new(0.01, 0.09).unwrap().into(),
        ShiftedGompertzParams::new(0.03, 8.0).unwrap().into(),
        WeibullParams::new(2.0, 80.0).unwrap().into(),
    ];
    for m in models {
        let total = integrate_to_inf(|t| m.density(t), 0.0, 1e-12);
        assert!((total - 1.0).abs() < 1e-9, "{m:?}: {total}");
    }
}

#[test]
fn bass_with_strong_imitation_is_unimodal() {
    for (p, q) in [(0.01, 0.09), (0.002, 0.3), (0.05, 0.06)] {
        let m = BassParams::new(p, q).unwrap();
        let h = 3.0 * m.peak_time() + 50.0;
        let values: Vec<f64> = (0..=20_000)
            .map(|i| m.pdf(h * f64::from(i) / 20_000.0).unwrap())
            .collect();
        let signs: Vec<bool> = values.windows(2).map(|w| w[1] > w[0]).collect();
        let changes = signs.windows(2).filter(|s| s[0] != s[1]).count();
        assert_eq!(changes, 1, "p={p} q={q}");
        assert!(signs[0], "rises first");
    }
}

#[test]
fn exponential_mixture_of_shifted_gompertz_is_bass() {
    for (beta, sigma) in [(0.2, 19.0), (0.1, 9.0), (0.05, 1.0), (0.3, 0.5), (0.02, 40.0)] {
        let bass = CompoundLink::new(beta, sigma).unwrap().to_bass();
        let h = 3.0 * bass.peak_time().max(1.0 / beta);
        for i in 0..20 {
            let t = h * f64::from(i) / 19.0;
            let mixed = integrate_to_inf(
                |eta| {
                    let sg = ShiftedGompertzParams::new(beta, eta).unwrap();
                    sg.density(t) * (-eta / sigma).exp() / sigma
                },
                0.0,
                1e-12,
            );
            let target = bass.pdf(t).unwrap();
            assert!(
                (mixed - target).abs() < 1e-4,
                "beta={beta} sigma={sigma} t={t}: {mixed} vs {target}"
            );
            assert!((mixed - target).abs() < 1e-8 * target.max(1.0));
        }
    }
}
