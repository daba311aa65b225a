use std::io::Write;

use anyhow::{Context, Result};

use adoptfit_core::{detect_onset, CusumScale};

use super::{read_input, write_onset_rows, OnsetRow};
use crate::config::RunConfig;
use crate::output::write_with;
use crate::{OnsetArgs, Outcome};

pub fn run(args: &OnsetArgs) -> Result<Outcome> {
    let mut cfg = RunConfig::load(args.config.config.as_deref())?.onset;
    if let Some(d) = args.drift {
        cfg.drift = d;
    }
    if let Some(t) = args.threshold {
        cfg.threshold = t;
    }
    if let Some(w) = args.baseline_window {
        cfg.baseline_window = w;
    }
    if args.absolute {
        cfg.scale = CusumScale::Absolute;
    }
    cfg.validate().context("invalid onset settings")?;

    let raw = read_input(&args.input)?;
    let rows = raw
        .iter()
        .map(|r| {
            let report = detect_onset(&r.values, &cfg)
                .with_context(|| format!("onset detection failed for {}/{}", r.service, r.region))?;
            Ok(OnsetRow {
                service: r.service.clone(),
                region: r.region.clone(),
                onset_index: report.onset_index,
                onset_date: report.onset_index.map(|i| r.date_of(i)),
                triggered: report.triggered,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    match &args.out {
        Some(path) => write_with(path, |buf| write_onset_rows(&rows, buf))?,
        None => {
            let mut buf = Vec::new();
            write_onset_rows(&rows, &mut buf)?;
            std::io::stdout().write_all(&buf)?;
        }
    }
    Ok(Outcome::Complete)
}
