use std::io::Write;

use adoptfit_core::dataset::prepare_detailed;
use adoptfit_core::synth::expected_counts;
use adoptfit_core::{fit_all, forecast, load_csv, Diffusion, Family, FitConfig, OnsetConfig, WeibullParams};
use chrono::{Duration, NaiveDate};

fn write_series(file: &mut impl Write, service: &str, region: &str, start: NaiveDate, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        let date = start + Duration::weeks(i as i64);
        writeln!(file, "{region},{v:.4},{date},{service}").unwrap();
    }
}

#[test]
fn csv_to_forecast() {
    let truth = WeibullParams::new(2.2, 60.0).unwrap();
    let curve: Vec<f64> = expected_counts(&truth, &(0..=200).map(f64::from).collect::<Vec<_>>(), 8000.0).unwrap();
    let lead = 30;
    let mut values = vec![0.0; lead];
    values.extend(curve.iter().map(|c| c.round()));
    let start = NaiveDate::from_ymd_opt(2004, 1, 4).unwrap();

    let mut file = tempfile::NamedTempFile::new().unwrap();
    // columns deliberately out of order
    writeln!(file, "region,value,date,service").unwrap();
    write_series(&mut file, "alpha", "WW", start, &values);
    write_series(&mut file, "alpha", "US", start, &values[..120]);
    file.flush().unwrap();

    let raw = load_csv(file.path()).unwrap();
    assert_eq!(raw.len(), 2);
    let ww = raw.iter().find(|r| r.region == "WW").unwrap();
    let prep = prepare_detailed(ww, &OnsetConfig::default(), None).unwrap();
    assert!(prep.onset_index.abs_diff(lead) <= 2, "onset {}", prep.onset_index);
    assert_eq!(prep.onset_date, ww.date_of(prep.onset_index));

    let set = fit_all(&prep.series, &FitConfig::default()).unwrap();
    assert_eq!(set.best_family, Family::Weibull);
    let best = set.best();
    assert!(best.converged);
    let theta = best.params.theta();
    assert!(
        (theta[0] / 2.2 - 1.0).abs() < 0.1 && (theta[1] / 60.0 - 1.0).abs() < 0.1,
        "{theta:?}"
    );

    let f = forecast(best, &prep.series, 52).unwrap();
    let mut out = Vec::new();
    f.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 1 + prep.series.bins() + 1 + 52);
}

#[test]
fn pre_window_launch_sets_offset() {
    let start = NaiveDate::from_ymd_opt(2004, 1, 4).unwrap();
    let launch = start - Duration::weeks(260);
    let values: Vec<f64> = (0..100).map(|i| 50.0 + f64::from(i % 7)).collect();
    let raw = adoptfit_core::RawSeries::new("old", "WW", start, values).unwrap();
    let prep = prepare_detailed(&raw, &OnsetConfig::default(), Some(launch)).unwrap();
    assert_eq!(prep.series.offset_weeks, 260);
    assert_eq!(prep.series.first_edge(), 260.0);
    assert_eq!(prep.onset_index, 0);
    assert_eq!(prep.onset_date, launch);
}
