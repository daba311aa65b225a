use std::collections::BTreeMap;

use anyhow::{Context, Result};
use log::warn;

use adoptfit_core::dataset::prepare_detailed;
use adoptfit_core::{forecast, select_best, Family, FitRecord, FitResult, PreparedSeries};

use super::{read_fit_records, read_input, FITS_DIR, SERIES_DIR};
use crate::manifest::RunManifest;
use crate::output::{series_key, write_with};
use crate::{ForecastArgs, Outcome};

type Key = (String, String);

/// Prepared series for every `(service, region)`, either re-derived from the
/// raw CSV with the settings of the fit run or read from its stored copies.
fn load_series(args: &ForecastArgs, wanted: &[Key]) -> Result<BTreeMap<Key, PreparedSeries>> {
    let mut out = BTreeMap::new();
    if let Some(input) = &args.input {
        let manifest = RunManifest::read(&args.results)?;
        for raw in read_input(input)? {
            let key = (raw.service.clone(), raw.region.clone());
            if !wanted.contains(&key) {
                continue;
            }
            let launch = manifest.launch_dates.get(&raw.service).copied();
            let prep = prepare_detailed(&raw, &manifest.config.onset, launch)
                .with_context(|| format!("cannot prepare {}/{}", raw.service, raw.region))?;
            out.insert(key, prep.series);
        }
    } else {
        for key in wanted {
            let path = args
                .results
                .join(SERIES_DIR)
                .join(format!("{}.json", series_key(&key.0, &key.1)));
            let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
            let series =
                PreparedSeries::from_json(&text).with_context(|| format!("invalid series {}", path.display()))?;
            out.insert(key.clone(), series);
        }
    }
    Ok(out)
}

pub fn run(args: &ForecastArgs) -> Result<Outcome> {
    let records = read_fit_records(&args.results)?;
    if records.is_empty() {
        anyhow::bail!("no fit results in {}", args.results.join(FITS_DIR).display());
    }
    let mut grouped: BTreeMap<Key, Vec<(FitRecord, FitResult)>> = BTreeMap::new();
    for record in records {
        let result = record.to_result()?;
        grouped
            .entry((record.service.clone(), record.region.clone()))
            .or_default()
            .push((record, result));
    }
    let keys: Vec<Key> = grouped.keys().cloned().collect();
    let series = load_series(args, &keys)?;
    let out = args.out.clone().unwrap_or_else(|| args.results.join("forecasts"));

    let mut written = 0;
    for (key, fits) in &grouped {
        let Some(s) = series.get(key) else {
            warn!("{}/{} is not in the input; skipping", key.0, key.1);
            continue;
        };
        let best: Option<Family> = select_best(fits.iter().map(|(_, r)| r)).map(|r| r.family);
        for (record, result) in fits {
            if args.best_only && best != Some(record.family) {
                continue;
            }
            if !record.converged && !args.force {
                warn!(
                    "{}/{} {}: fit did not converge; skipping (use --force to forecast anyway)",
                    key.0, key.1, record.family
                );
                continue;
            }
            let f = forecast(result, s, args.horizon_weeks)
                .with_context(|| format!("cannot forecast {}/{} {}", key.0, key.1, record.family))?;
            let path = out.join(format!("{}__{}.csv", series_key(&key.0, &key.1), record.family));
            write_with(&path, |buf| f.write_csv(buf))?;
            written += 1;
        }
    }
    println!("{written} forecasts -> {}", out.display());
    Ok(Outcome::Complete)
}
