use std::collections::BTreeMap;
use std::fs::File;

use anyhow::{Context, Result};
use log::warn;

use adoptfit_core::analytics::{
    adoption_stats, embed, group_gof, write_embedding_csv, write_group_gof_csv, write_rankings_csv, GroupGofSummary,
    Grouping, OnsetRecord,
};
use adoptfit_core::Family;

use super::{read_fit_records, read_onset_rows, FITS_DIR, ONSETS_FILE};
use crate::output::write_with;
use crate::{GroupBy, Outcome, ReportArgs};

pub const GOF_SUMMARY_FILE: &str = "gof_summary.csv";
pub const GOF_TABLE_FILE: &str = "gof_table.csv";
pub const ADOPTION_FILE: &str = "adoption.csv";
pub const EMBEDDING_FILE: &str = "embedding.csv";

pub fn run(args: &ReportArgs) -> Result<Outcome> {
    let records = read_fit_records(&args.results)?;
    if records.is_empty() {
        anyhow::bail!("no fit results in {}", args.results.join(FITS_DIR).display());
    }
    let grouping = match (args.group_by, &args.map) {
        (_, Some(path)) => {
            let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
            Grouping::read_map(file).with_context(|| format!("invalid group map {}", path.display()))?
        }
        (GroupBy::Region, None) => Grouping::Region,
        (GroupBy::Language, None) => anyhow::bail!("--group-by language needs --map region,group CSV"),
    };
    let out = args.out.clone().unwrap_or_else(|| args.results.join("report"));

    let gof = group_gof(&records, &grouping);
    write_with(&out.join(GOF_SUMMARY_FILE), |buf| write_group_gof_csv(&gof, buf))?;
    write_with(&out.join(GOF_TABLE_FILE), |buf| write_gof_table(&gof, buf))?;

    let points = embed(&records, args.include_unconverged);
    write_with(&out.join(EMBEDDING_FILE), |buf| write_embedding_csv(&points, buf))?;

    let onsets_path = args.results.join(ONSETS_FILE);
    if onsets_path.exists() {
        let onsets: Vec<OnsetRecord> = read_onset_rows(&onsets_path)?
            .into_iter()
            .filter_map(|r| {
                r.onset_date.map(|onset_date| OnsetRecord {
                    service: r.service,
                    region: r.region,
                    onset_date,
                })
            })
            .collect();
        let stats = adoption_stats(&onsets);
        write_with(&out.join(ADOPTION_FILE), |buf| write_rankings_csv(&stats, buf))?;
    } else {
        warn!("{} not found; skipping adoption delays", onsets_path.display());
    }

    println!("{} fit records summarized -> {}", records.len(), out.display());
    Ok(Outcome::Complete)
}

/// One row per group with ⟨p⟩ and the share of p > 0.05 for each family side
/// by side. Families without fits in a group are left blank.
fn write_gof_table<W: std::io::Write>(rows: &[GroupGofSummary], out: W) -> adoptfit_core::Result<()> {
    let mut by_group: BTreeMap<&str, BTreeMap<Family, &GroupGofSummary>> = BTreeMap::new();
    for r in rows {
        by_group.entry(r.group.as_str()).or_default().insert(r.family, r);
    }
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["group".to_string()];
    for f in Family::ALL {
        header.push(format!("{f}_mean_p"));
        header.push(format!("{f}_frac_sig"));
    }
    wtr.write_record(&header)?;
    for (group, fams) in by_group {
        let mut row = vec![group.to_string()];
        for f in Family::ALL {
            match fams.get(&f) {
                Some(s) => {
                    row.push(format!("{:.4}", s.mean_p));
                    row.push(format!("{:.4}", s.frac_significant));
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
