//! Corpus-level summaries: adoption delays between global and regional
//! onsets, goodness of fit aggregated by region group, and the fitted
//! parameter scatter ("embedding") of many series.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::FitRecord;
use crate::model::Family;

/// Region code of worldwide series.
pub const GLOBAL_REGION: &str = "WW";

/// Significance level used for `frac_significant`.
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnsetRecord {
    pub service: String,
    pub region: String,
    pub onset_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdoptionDelay {
    pub service: String,
    pub region: String,
    pub delta_days: u32,
    /// The regional onset preceded the global one and was clamped to 0.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAdoption {
    pub region: String,
    pub mean_days: f64,
    pub median_days: f64,
    pub services: usize,
    pub rank_mu: usize,
    pub rank_m: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdoptionStats {
    pub delays: Vec<AdoptionDelay>,
    /// Sorted by region code.
    pub regions: Vec<RegionAdoption>,
}

/// Median with the even-count convention of averaging the central pair.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    })
}

fn ranks(regions: &[RegionAdoption], key: impl Fn(&RegionAdoption) -> f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by(|&a, &b| {
        key(&regions[a])
            .total_cmp(&key(&regions[b]))
            .then_with(|| regions[a].region.cmp(&regions[b].region))
    });
    let mut rank = vec![0; regions.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}

/// Per-region mean and median delay of regional onsets behind the global
/// onset of the same service. Services without a global onset are skipped;
/// missing `(service, region)` pairs are not imputed.
pub fn adoption_stats(onsets: &[OnsetRecord]) -> AdoptionStats {
    let global: HashMap<&str, NaiveDate> = onsets
        .iter()
        .filter(|o| o.region == GLOBAL_REGION)
        .map(|o| (o.service.as_str(), o.onset_date))
        .collect();

    let mut delays = Vec::new();
    let mut by_region: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for o in onsets.iter().filter(|o| o.region != GLOBAL_REGION) {
        let Some(&g) = global.get(o.service.as_str()) else {
            warn!("no global onset for {}; skipping {}", o.service, o.region);
            continue;
        };
        let raw = (o.onset_date - g).num_days();
        let clamped = raw < 0;
        if clamped {
            warn!(
                "{}/{} onset precedes the global onset by {} days",
                o.service, o.region, -raw
            );
        }
        let delta = raw.max(0) as u32;
        by_region.entry(o.region.as_str()).or_default().push(f64::from(delta));
        delays.push(AdoptionDelay {
            service: o.service.clone(),
            region: o.region.clone(),
            delta_days: delta,
            clamped,
        });
    }

    let mut regions: Vec<RegionAdoption> = by_region
        .into_iter()
        .map(|(region, d)| RegionAdoption {
            region: region.to_string(),
            mean_days: d.iter().sum::<f64>() / d.len() as f64,
            median_days: median(&d).expect("regions are only created with a delay"),
            services: d.len(),
            rank_mu: 0,
            rank_m: 0,
        })
        .collect();
    let by_mu = ranks(&regions, |r| r.mean_days);
    let by_m = ranks(&regions, |r| r.median_days);
    for (i, r) in regions.iter_mut().enumerate() {
        r.rank_mu = by_mu[i];
        r.rank_m = by_m[i];
    }
    AdoptionStats { delays, regions }
}

pub fn write_rankings_csv<W: Write>(stats: &AdoptionStats, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["region", "mean_days", "median_days", "rank_mu", "rank_m"])?;
    for r in &stats.regions {
        wtr.write_record([
            r.region.clone(),
            format!("{:.2}", r.mean_days),
            format!("{:.1}", r.median_days),
            r.rank_mu.to_string(),
            r.rank_m.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// How regions are pooled for goodness-of-fit summaries.
#[derive(Debug, Clone, PartialEq)]
pub enum Grouping {
    /// Every region is its own group.
    Region,
    /// Region code to group name; unmapped regions are dropped.
    Map(BTreeMap<String, String>),
}

impl Grouping {
    fn group_of(&self, region: &str) -> Option<String> {
        match self {
            Grouping::Region => Some(region.to_string()),
            Grouping::Map(map) => map.get(region).cloned(),
        }
    }

    /// Reads a `region,group` CSV.
    pub fn read_map<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let (c_region, c_group) = (col("region")?, col("group")?);
        let mut map = BTreeMap::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            match (record.get(c_region), record.get(c_group)) {
                (Some(r), Some(g)) if !r.is_empty() && !g.is_empty() => {
                    map.insert(r.to_string(), g.to_string());
                }
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: "expected region,group".into(),
                    })
                }
            }
        }
        Ok(Grouping::Map(map))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupGofSummary {
    pub group: String,
    pub family: Family,
    /// Mean p-value ⟨p⟩.
    pub mean_p: f64,
    /// Share of fits with p > 0.05.
    pub frac_significant: f64,
    pub count: usize,
}

impl GroupGofSummary {
    /// Pools two summaries of the same `(group, family)` from disjoint batches.
    pub fn pool(&self, other: &Self) -> Self {
        let count = self.count + other.count;
        let c = count as f64;
        let (a, b) = (self.count as f64, other.count as f64);
        Self {
            group: self.group.clone(),
            family: self.family,
            mean_p: (self.mean_p * a + other.mean_p * b) / c,
            frac_significant: (self.frac_significant * a + other.frac_significant * b) / c,
            count,
        }
    }
}

/// ⟨p⟩ and share of significant fits per `(group, family)`, sorted by group
/// then family.
pub fn group_gof(results: &[FitRecord], grouping: &Grouping) -> Vec<GroupGofSummary> {
    let mut acc: BTreeMap<(String, Family), (f64, usize, usize)> = BTreeMap::new();
    for r in results {
        let Some(group) = grouping.group_of(&r.region) else {
            warn!("region {} has no group; skipping {}", r.region, r.service);
            continue;
        };
        let e = acc.entry((group, r.family)).or_default();
        e.0 += r.p_value;
        e.1 += usize::from(r.p_value > SIGNIFICANCE);
        e.2 += 1;
    }
    acc.into_iter()
        .map(|((group, family), (sum, sig, count))| GroupGofSummary {
            group,
            family,
            mean_p: sum / count as f64,
            frac_significant: sig as f64 / count as f64,
            count,
        })
        .collect()
}

pub fn write_group_gof_csv<W: Write>(rows: &[GroupGofSummary], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["group", "family", "mean_p", "frac_sig", "count"])?;
    for r in rows {
        wtr.write_record([
            r.group.clone(),
            r.family.to_string(),
            format!("{:.4}", r.mean_p),
            format!("{:.4}", r.frac_significant),
            r.count.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPoint {
    pub service: String,
    pub region: String,
    pub family: Family,
    pub theta1: f64,
    pub theta2: f64,
}

impl EmbeddingPoint {
    /// Coordinates with natural-log scaling applied to the selected axes.
    pub fn coordinates(&self, log_axes: [bool; 2]) -> [f64; 2] {
        let f = |v: f64, log: bool| if log { v.ln() } else { v };
        [f(self.theta1, log_axes[0]), f(self.theta2, log_axes[1])]
    }
}

/// One point `(θ₁, θ₂)` per fit. Unconverged fits are dropped unless
/// `include_unconverged` is set.
pub fn embed(results: &[FitRecord], include_unconverged: bool) -> Vec<EmbeddingPoint> {
    results
        .iter()
        .filter(|r| include_unconverged || r.converged)
        .filter(|r| r.theta1.is_finite() && r.theta2.is_finite())
        .map(|r| EmbeddingPoint {
            service: r.service.clone(),
            region: r.region.clone(),
            family: r.family,
            theta1: r.theta1,
            theta2: r.theta2,
        })
        .collect()
}

pub fn write_embedding_csv<W: Write>(points: &[EmbeddingPoint], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for p in points {
        wtr.serialize(p)?;
    }
    if points.is_empty() {
        wtr.write_record(["service", "region", "family", "theta1", "theta2"])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_embedding_csv<R: Read>(reader: R) -> Result<Vec<EmbeddingPoint>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}
