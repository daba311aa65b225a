use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{Context, Result};
use log::warn;
use rayon::prelude::*;

use adoptfit_core::dataset::prepare_detailed;
use adoptfit_core::{fit, select_best, Error, Family, FitRecord, FitResult, PreparedSeries};

use super::{read_input, write_onset_rows, OnsetRow, FITS_DIR, ONSETS_FILE, SERIES_DIR, SUMMARY_FILE};
use crate::config::RunConfig;
use crate::manifest::{read_launch_dates, RunManifest, MANIFEST_FILE};
use crate::output::{remove_stale, series_key, write_atomic, write_with};
use crate::{FitArgs, Outcome};

struct SeriesFits {
    series: PreparedSeries,
    fits: Vec<(Family, adoptfit_core::Result<FitResult>)>,
}

impl SeriesFits {
    fn best(&self) -> Option<Family> {
        select_best(self.fits.iter().filter_map(|(_, r)| r.as_ref().ok())).map(|r| r.family)
    }
}

pub fn run(args: &FitArgs) -> Result<Outcome> {
    let config = RunConfig::load(args.config.config.as_deref())?;
    let raw = read_input(&args.input)?;
    let launches = match &args.launch_dates {
        Some(path) => read_launch_dates(path)?,
        None => BTreeMap::new(),
    };
    let services: BTreeSet<&str> = raw.iter().map(|r| r.service.as_str()).collect();
    for service in launches.keys().filter(|s| !services.contains(s.as_str())) {
        warn!("launch date given for unknown service {service}");
    }
    let families = args.family.families();
    let mut partial = false;

    let mut onsets = Vec::with_capacity(raw.len());
    let mut prepared = Vec::with_capacity(raw.len());
    for r in &raw {
        match prepare_detailed(r, &config.onset, launches.get(&r.service).copied()) {
            Ok(prep) => {
                onsets.push(OnsetRow {
                    service: r.service.clone(),
                    region: r.region.clone(),
                    onset_index: Some(prep.onset_index),
                    onset_date: Some(prep.onset_date),
                    triggered: prep.report.as_ref().is_some_and(|rep| rep.triggered),
                });
                prepared.push(prep.series);
            }
            Err(e @ (Error::NoOnset { .. } | Error::EmptySeries { .. })) => {
                warn!("skipping {}/{}: {e}", r.service, r.region);
                partial = true;
                onsets.push(OnsetRow {
                    service: r.service.clone(),
                    region: r.region.clone(),
                    onset_index: None,
                    onset_date: None,
                    triggered: false,
                });
            }
            Err(e) => return Err(e).with_context(|| format!("cannot prepare {}/{}", r.service, r.region)),
        }
    }

    let mut keys = BTreeSet::new();
    for s in &prepared {
        if !keys.insert(series_key(&s.service, &s.region)) {
            anyhow::bail!(
                "{}/{} maps to the same file name as another series; rename one of them",
                s.service,
                s.region
            );
        }
    }

    // results come back in input order whatever the scheduling
    let results: Vec<SeriesFits> = prepared
        .into_par_iter()
        .map(|series| {
            let fits = families.iter().map(|&f| (f, fit(&series, f, &config.fit))).collect();
            SeriesFits { series, fits }
        })
        .collect();

    let out = &args.out;
    let previous_run = out.join(MANIFEST_FILE).exists();
    let mut series_files = Vec::new();
    let mut fit_files = Vec::new();
    let mut summary = csv::Writer::from_writer(Vec::new());
    summary.write_record([
        "service",
        "region",
        "family",
        "theta1",
        "theta2",
        "rss",
        "dof",
        "p_value",
        "converged",
        "truncation_mass",
        "iterations",
        "best",
    ])?;
    let (mut n_fits, mut n_converged) = (0, 0);

    for sf in &results {
        let s = &sf.series;
        let key = series_key(&s.service, &s.region);
        let path = out.join(SERIES_DIR).join(format!("{key}.json"));
        write_atomic(&path, format!("{}\n", s.to_json()?).as_bytes())?;
        series_files.push(path);
        let best = sf.best();

        for (family, result) in &sf.fits {
            let r = match result {
                Ok(r) => r,
                Err(e) => {
                    warn!("{}/{} {family}: fit failed: {e}", s.service, s.region);
                    partial = true;
                    continue;
                }
            };
            n_fits += 1;
            if r.converged {
                n_converged += 1;
            } else {
                warn!(
                    "{}/{} {family}: no convergence after {} iterations",
                    s.service, s.region, r.iterations
                );
                partial = true;
            }
            let record = FitRecord::new(s, r);
            let path = out.join(FITS_DIR).join(format!("{key}__{family}.json"));
            let text = format!("{}\n", serde_json::to_string_pretty(&record)?);
            write_atomic(&path, text.as_bytes())?;
            fit_files.push(path);
            summary.write_record([
                s.service.clone(),
                s.region.clone(),
                family.to_string(),
                record.theta1.to_string(),
                record.theta2.to_string(),
                record.rss.to_string(),
                record.dof.to_string(),
                record.p_value.to_string(),
                record.converged.to_string(),
                record.truncation_mass.to_string(),
                r.iterations.to_string(),
                (best == Some(*family)).to_string(),
            ])?;
        }
    }

    write_atomic(&out.join(SUMMARY_FILE), &summary.into_inner()?)?;
    write_with(&out.join(ONSETS_FILE), |buf| write_onset_rows(&onsets, buf))?;
    if previous_run {
        remove_stale(&out.join(SERIES_DIR), "json", &series_files)?;
        remove_stale(&out.join(FITS_DIR), "json", &fit_files)?;
    }

    let mut inputs = BTreeMap::new();
    inputs.insert("input".to_string(), display(&args.input));
    if let Some(p) = &args.launch_dates {
        inputs.insert("launch_dates".to_string(), display(p));
    }
    if let Some(p) = &args.config.config {
        inputs.insert("config".to_string(), display(p));
    }
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: "fit".to_string(),
        inputs,
        config,
        families,
        launch_dates: launches,
        out: display(out),
        seed: None,
    }
    .write(out)?;

    println!(
        "{} series, {n_fits} fits, {n_converged} converged -> {}",
        results.len(),
        out.display()
    );
    Ok(if partial { Outcome::Partial } else { Outcome::Complete })
}

fn display(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}
