//! The bundled synthetic smoke corpus: four services in three regions drawn
//! from known diffusion curves, scaled to 0–100 like exported search volumes.
//!
//! | service | generator      | observation                                    |
//! |---------|----------------|------------------------------------------------|
//! | alpha   | Bass           | full curve, onsets early in the window         |
//! | bravo   | shifted Gomp.  | cut off before the peak by the window end      |
//! | charlie | Weibull        | full curve                                     |
//! | delta   | Weibull and SG | launched 150 weeks before the window opens     |

use chrono::{Duration, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use adoptfit_core::synth::multinomial;
use adoptfit_core::{bin_probabilities, BassParams, ModelParams, ShiftedGompertzParams, WeibullParams};

pub const DEFAULT_SEED: u64 = 2024;
pub const WINDOW_WEEKS: usize = 260;
/// Weeks between the launch of `delta` and the first observed week.
pub const PRE_WINDOW_WEEKS: i64 = 150;

pub fn window_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2004, 1, 4).expect("valid date")
}

struct Spec {
    service: &'static str,
    region: &'static str,
    params: ModelParams,
    /// Window week at which diffusion time starts; negative for launches
    /// before the window.
    start_week: i64,
    events: u64,
}

fn bass(p: f64, q: f64) -> ModelParams {
    BassParams::new(p, q).expect("valid").into()
}

fn sg(beta: f64, eta: f64) -> ModelParams {
    ShiftedGompertzParams::new(beta, eta).expect("valid").into()
}

fn weibull(k: f64, l: f64) -> ModelParams {
    WeibullParams::new(k, l).expect("valid").into()
}

fn specs() -> Vec<Spec> {
    let s = |service, region, params, start_week, events| Spec {
        service,
        region,
        params,
        start_week,
        events,
    };
    vec![
        s("alpha", "WW", bass(0.01, 0.09), 20, 8000),
        s("alpha", "US", bass(0.012, 0.1), 26, 6000),
        s("alpha", "DE", bass(0.008, 0.08), 34, 4000),
        s("bravo", "WW", sg(0.03, 8.0), 195, 8000),
        s("bravo", "US", sg(0.03, 10.0), 200, 6000),
        s("bravo", "DE", sg(0.025, 6.0), 185, 4000),
        s("charlie", "WW", weibull(2.0, 80.0), 40, 8000),
        s("charlie", "US", weibull(2.2, 90.0), 48, 6000),
        s("charlie", "DE", weibull(1.8, 70.0), 60, 4000),
        s("delta", "WW", weibull(1.6, 180.0), -PRE_WINDOW_WEEKS, 8000),
        s("delta", "US", sg(0.015, 4.0), -PRE_WINDOW_WEEKS, 6000),
        s("delta", "DE", weibull(2.4, 220.0), -PRE_WINDOW_WEEKS, 4000),
    ]
}

pub struct Series {
    pub service: &'static str,
    pub region: &'static str,
    pub values: Vec<f64>,
}

/// Events drawn over the window, rescaled so the largest week reads 100 and
/// rounded to whole numbers.
fn draw(spec: &Spec, rng: &mut ChaCha8Rng) -> Series {
    let first = spec.start_week.max(0) as usize;
    let t0 = (first as i64 - spec.start_week) as f64;
    let observed = WINDOW_WEEKS - first;
    // trailing open bin catches events after the window closes
    let mut edges: Vec<f64> = (0..=observed).map(|k| t0 + k as f64).collect();
    edges.push(f64::INFINITY);
    let probs = bin_probabilities(&spec.params, &edges)
        .expect("corpus parameters are valid")
        .probs;
    let counts = multinomial(rng, spec.events, &probs);
    let peak = counts[..observed].iter().copied().fold(0.0, f64::max);
    let mut values = vec![0.0; first];
    values.extend(counts[..observed].iter().map(|c| (100.0 * c / peak).round()));
    Series {
        service: spec.service,
        region: spec.region,
        values,
    }
}

pub fn build(seed: u64) -> Vec<Series> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    specs().iter().map(|s| draw(s, &mut rng)).collect()
}

pub fn corpus_csv(series: &[Series]) -> String {
    let start = window_start();
    let mut out = String::from("date,service,region,value\n");
    for s in series {
        for (i, v) in s.values.iter().enumerate() {
            let date = start + Duration::weeks(i as i64);
            out.push_str(&format!("{date},{},{},{v}\n", s.service, s.region));
        }
    }
    out
}

pub fn launches_csv() -> String {
    let launch = window_start() - Duration::weeks(PRE_WINDOW_WEEKS);
    format!("service,launch_date\ndelta,{launch}\n")
}

pub fn languages_csv() -> String {
    "region,group\nWW,worldwide\nUS,english\nDE,german\n".to_string()
}
