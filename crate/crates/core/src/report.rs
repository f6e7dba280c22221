//! Summary tables: interaction totals, UpSet combinations, cluster
//! composition per repository and distribution summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::ingest::InteractionKind;
use crate::metrics::RepoIndividual;

pub const UPSET_FORMAT: &str = "persona-miner-upset";
pub const SUMMARY_FORMAT: &str = "persona-miner-summary";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalRow {
    pub kind: InteractionKind,
    pub count: u64,
    pub percentage: f64,
}

/// Every kind in canonical order, with its share of all interactions.
pub fn interaction_totals(individuals: &[RepoIndividual]) -> Vec<TotalRow> {
    let mut counts = [0u64; 6];
    for ind in individuals {
        for k in InteractionKind::ALL {
            counts[k.index()] += ind.counts[k];
        }
    }
    let total: u64 = counts.iter().sum();
    InteractionKind::ALL
        .iter()
        .map(|&k| TotalRow {
            kind: k,
            count: counts[k.index()],
            percentage: if total == 0 { 0.0 } else { counts[k.index()] as f64 / total as f64 * 100.0 },
        })
        .collect()
}

pub const TOTALS_HEADER: [&str; 3] = ["kind", "count", "percentage"];

pub fn write_totals_csv<W: Write>(rows: &[TotalRow], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TOTALS_HEADER)?;
    for r in rows {
        w.write_record([r.kind.as_str().to_string(), r.count.to_string(), format!("{}", r.percentage)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Canonical key of a kind subset: kinds in metric order joined by `+`.
pub fn combination_key(kinds: &BTreeSet<InteractionKind>) -> String {
    let mut v: Vec<_> = kinds.iter().copied().collect();
    v.sort_by_key(|k| k.index());
    v.iter().map(|k| k.as_str()).collect::<Vec<_>>().join("+")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpSetTable {
    pub format: String,
    pub version: u32,
    pub individuals: usize,
    /// Fraction of individuals a combination needs to be listed; 0 lists all.
    pub frequency_floor: f64,
    pub combinations: BTreeMap<String, usize>,
    /// Individuals whose combination fell under the floor.
    pub below_floor: usize,
}

/// Counts individuals by the exact set of kinds they performed.
pub fn upset_counts(individuals: &[RepoIndividual], frequency_floor: f64) -> UpSetTable {
    let mut all: BTreeMap<String, usize> = BTreeMap::new();
    let mut counted = 0;
    for ind in individuals {
        let kinds: BTreeSet<_> = ind.counts.present_kinds().into_iter().collect();
        if kinds.is_empty() {
            continue;
        }
        counted += 1;
        *all.entry(combination_key(&kinds)).or_insert(0) += 1;
    }
    let min_count = frequency_floor * counted as f64;
    let mut combinations = BTreeMap::new();
    let mut below_floor = 0;
    for (key, n) in all {
        if (n as f64) >= min_count {
            combinations.insert(key, n);
        } else {
            below_floor += n;
        }
    }
    UpSetTable {
        format: UPSET_FORMAT.into(),
        version: REPORT_VERSION,
        individuals: counted,
        frequency_floor,
        combinations,
        below_floor,
    }
}

impl UpSetTable {
    pub fn write_json<W: Write>(&self, out: W) -> Result<(), ReportError> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, ReportError> {
        let t: UpSetTable = serde_json::from_reader(input)?;
        if t.format != UPSET_FORMAT || t.version != REPORT_VERSION {
            return Err(ReportError::Format(format!("unsupported {} version {}", t.format, t.version)));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub repo: String,
    pub clusters_present: BTreeSet<usize>,
    pub n_individuals_per_cluster: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionSummary {
    pub repos: usize,
    pub repos_with_two_or_more_clusters: usize,
    pub fraction_multi_cluster: f64,
}

/// `labelled` pairs each individual's repository with its initial cluster.
pub fn composition<S: AsRef<str>>(labelled: &[(S, usize)]) -> (Vec<CompositionRow>, CompositionSummary) {
    let mut per_repo: BTreeMap<&str, BTreeMap<usize, usize>> = BTreeMap::new();
    for (repo, c) in labelled {
        *per_repo.entry(repo.as_ref()).or_default().entry(*c).or_insert(0) += 1;
    }
    let rows: Vec<CompositionRow> = per_repo
        .into_iter()
        .map(|(repo, counts)| CompositionRow {
            repo: repo.to_string(),
            clusters_present: counts.keys().copied().collect(),
            n_individuals_per_cluster: counts,
        })
        .collect();
    let multi = rows.iter().filter(|r| r.clusters_present.len() >= 2).count();
    let summary = CompositionSummary {
        repos: rows.len(),
        repos_with_two_or_more_clusters: multi,
        fraction_multi_cluster: if rows.is_empty() { 0.0 } else { multi as f64 / rows.len() as f64 },
    };
    (rows, summary)
}

/// One row per repository; a column per cluster id seen anywhere.
pub fn write_composition_csv<W: Write>(rows: &[CompositionRow], out: W) -> Result<(), ReportError> {
    let clusters: BTreeSet<usize> = rows.iter().flat_map(|r| r.clusters_present.iter().copied()).collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["repo".to_string(), "clusters_present".to_string()];
    header.extend(clusters.iter().map(|c| format!("cluster_{c}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.repo.clone(), r.clusters_present.len().to_string()];
        rec.extend(clusters.iter().map(|c| r.n_individuals_per_cluster.get(c).copied().unwrap_or(0).to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

pub fn describe(values: &[f64]) -> Option<Distribution> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 { (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    Some(Distribution { n, mean, sd, min: sorted[0], median, max: sorted[n - 1] })
}

/// Values grouped by a key, each group summarised.
pub fn describe_by<K: Ord + Clone>(pairs: &[(K, f64)]) -> BTreeMap<K, Distribution> {
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for (k, v) in pairs {
        groups.entry(k.clone()).or_default().push(*v);
    }
    groups.into_iter().filter_map(|(k, vs)| describe(&vs).map(|d| (k, d))).collect()
}

pub fn uit_distribution(uits: &[u8]) -> BTreeMap<u8, usize> {
    let mut out = BTreeMap::new();
    for &u in uits {
        *out.entry(u).or_insert(0) += 1;
    }
    out
}
