//! `stats`: λ histograms and band-count frequencies from a provenance log.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use specmix_core::augment::{Provenance, Strategy};
use specmix_core::mask::Axis;

use crate::error::{CliError, Result};
use crate::job::ProvenanceRecord;

pub const HISTOGRAM_BINS: usize = 20;
const MAX_LISTED_GAMMAS: usize = 8;

pub fn load_log(path: &Path) -> Result<Vec<Provenance>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            serde_json::from_str::<ProvenanceRecord>(line)
                .map(|r| r.provenance)
                .map_err(|e| {
                    CliError::Config(format!("{}:{}: {e}", path.display(), n + 1))
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    /// Strategy name, with the mask variant for SpecMix ablations.
    pub key: String,
    pub count: u64,
    pub applied: u64,
    pub lambda_count: u64,
    pub histogram: [u64; HISTOGRAM_BINS],
    pub lambda_mean: f64,
    pub lambda_variance: f64,
    /// Masks with 0..=3 frequency bands, and likewise for time bands.
    pub freq_band_counts: [u64; 4],
    pub time_band_counts: [u64; 4],
    pub band_masks: u64,
    /// Sorted distinct γ values.
    pub gammas: Vec<f64>,
}

impl GroupStats {
    fn new(key: String) -> Self {
        Self {
            key,
            count: 0,
            applied: 0,
            lambda_count: 0,
            histogram: [0; HISTOGRAM_BINS],
            lambda_mean: 0.0,
            lambda_variance: 0.0,
            freq_band_counts: [0; 4],
            time_band_counts: [0; 4],
            band_masks: 0,
            gammas: Vec::new(),
        }
    }

    pub fn band_count_frequencies(&self, axis: Axis) -> [f64; 4] {
        let counts = match axis {
            Axis::Frequency => &self.freq_band_counts,
            Axis::Time => &self.time_band_counts,
        };
        let n = self.band_masks.max(1) as f64;
        counts.map(|c| c as f64 / n)
    }
}

pub fn histogram_bin(lambda: f64) -> usize {
    ((lambda * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1)
}

fn group_key(p: &Provenance) -> String {
    match p.variant {
        Some(v) if p.strategy == Strategy::SpecMix && v != Default::default() => {
            format!("{}[{}]", p.strategy.name(), v.name())
        }
        _ => p.strategy.name().to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatsReport {
    pub groups: Vec<GroupStats>,
}

pub fn compute_stats<'a>(records: impl IntoIterator<Item = &'a Provenance>) -> StatsReport {
    let mut groups: BTreeMap<String, (GroupStats, Vec<f64>)> = BTreeMap::new();
    for p in records {
        let key = group_key(p);
        let (g, lambdas) = groups
            .entry(key.clone())
            .or_insert_with(|| (GroupStats::new(key), Vec::new()));
        g.count += 1;
        if !p.applied {
            continue;
        }
        g.applied += 1;
        if let Some(l) = p.lambda {
            lambdas.push(l);
            g.histogram[histogram_bin(l)] += 1;
        }
        if p.strategy == Strategy::SpecMix {
            let count = |axis| p.bands.iter().filter(|b| b.axis == axis).count().min(3);
            g.freq_band_counts[count(Axis::Frequency)] += 1;
            g.time_band_counts[count(Axis::Time)] += 1;
            g.band_masks += 1;
        }
        if let Some(gamma) = p.gamma {
            g.gammas.push(gamma);
        }
    }

    let groups = groups
        .into_values()
        .map(|(mut g, lambdas)| {
            g.lambda_count = lambdas.len() as u64;
            if !lambdas.is_empty() {
                let n = lambdas.len() as f64;
                g.lambda_mean = lambdas.iter().sum::<f64>() / n;
                g.lambda_variance =
                    lambdas.iter().map(|l| (l - g.lambda_mean).powi(2)).sum::<f64>() / n;
            }
            g.gammas.sort_by(f64::total_cmp);
            g.gammas.dedup();
            g
        })
        .collect();
    StatsReport { groups }
}

fn bin_label(i: usize) -> String {
    let w = 1.0 / HISTOGRAM_BINS as f64;
    let close = if i + 1 == HISTOGRAM_BINS { ']' } else { ')' };
    format!("[{:.2}, {:.2}{close}", i as f64 * w, (i + 1) as f64 * w)
}

impl StatsReport {
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group(&self, key: &str) -> Option<&GroupStats> {
        self.groups.iter().find(|g| g.key == key)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.groups.is_empty() {
            out.push_str("no provenance records\n");
            return out;
        }
        for g in &self.groups {
            let _ = writeln!(out, "== {} ==", g.key);
            let _ = writeln!(out, "records: {}  applied: {}", g.count, g.applied);
            if g.lambda_count > 0 {
                let _ = writeln!(
                    out,
                    "lambda: n={} mean={:.6} variance={:.6}",
                    g.lambda_count, g.lambda_mean, g.lambda_variance
                );
                let peak = g.histogram.iter().copied().max().unwrap_or(0).max(1);
                for (i, &c) in g.histogram.iter().enumerate() {
                    let bar = "#".repeat((c * 40 / peak) as usize);
                    let _ = writeln!(out, "  {} {:>8} {bar}", bin_label(i), c);
                }
            }
            if g.band_masks > 0 {
                let fmt = |f: [f64; 4]| {
                    f.iter()
                        .enumerate()
                        .map(|(k, v)| format!("{k}:{v:.4}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                let _ = writeln!(out, "freq band counts: {}", fmt(g.band_count_frequencies(Axis::Frequency)));
                let _ = writeln!(out, "time band counts: {}", fmt(g.band_count_frequencies(Axis::Time)));
            }
            if !g.gammas.is_empty() {
                if g.gammas.len() <= MAX_LISTED_GAMMAS {
                    let list: Vec<String> = g.gammas.iter().map(|v| v.to_string()).collect();
                    let _ = writeln!(out, "gamma: {}", list.join(", "));
                } else {
                    let n = g.gammas.len();
                    let _ = writeln!(
                        out,
                        "gamma: {n} distinct values in [{:.4}, {:.4}]",
                        g.gammas[0],
                        g.gammas[n - 1]
                    );
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,metric,key,value\n");
        for g in &self.groups {
            let k = &g.key;
            let _ = writeln!(out, "{k},records,,{}", g.count);
            let _ = writeln!(out, "{k},applied,,{}", g.applied);
            let _ = writeln!(out, "{k},lambda_count,,{}", g.lambda_count);
            if g.lambda_count > 0 {
                let _ = writeln!(out, "{k},lambda_mean,,{}", g.lambda_mean);
                let _ = writeln!(out, "{k},lambda_variance,,{}", g.lambda_variance);
                let w = 1.0 / HISTOGRAM_BINS as f64;
                for (i, c) in g.histogram.iter().enumerate() {
                    let _ = writeln!(out, "{k},lambda_hist,{:.2}-{:.2},{c}", i as f64 * w, (i + 1) as f64 * w);
                }
            }
            for (axis, name) in [(Axis::Frequency, "freq_bands"), (Axis::Time, "time_bands")] {
                if g.band_masks > 0 {
                    for (n, f) in g.band_count_frequencies(axis).iter().enumerate() {
                        let _ = writeln!(out, "{k},{name},{n},{f}");
                    }
                }
            }
            for gamma in &g.gammas {
                let _ = writeln!(out, "{k},gamma,,{gamma}");
            }
        }
        out
    }
}
