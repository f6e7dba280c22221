//! Cluster validation: PCA with feature importance, one-way ANOVA and
//! Tukey HSD, plus the special functions they rest on.

pub mod anova;
pub mod pca;
pub mod quad;
pub mod special;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use anova::{normal_range_cdf, one_way_anova, ptukey, tukey_hsd, AnovaResult, TukeyPair, TukeyResult};
pub use pca::{feature_importance, jacobi_eigen, pca, FeatureImportance, PcaResult, RankedFeature, Ranking};

/// p-values below this are reported as 0 and flagged.
pub const P_FLOOR: f64 = 1e-300;

pub const STATS_FORMAT: &str = "persona-miner-stats";
pub const STATS_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("{0}")]
    Domain(String),
    #[error("stats file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One named analysis: a PCA over the clustered rows and per-variable tests
/// across the cluster groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub groups: Vec<String>,
    pub pca: Option<PcaResult>,
    pub feature_importance: Option<FeatureImportance>,
    pub anova: BTreeMap<String, AnovaResult>,
    pub tukey: BTreeMap<String, TukeyResult>,
    /// Variables skipped because the groups did not satisfy the test's preconditions.
    #[serde(default)]
    pub skipped: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub format: String,
    pub version: u32,
    pub analyses: BTreeMap<String, Analysis>,
}

impl Default for StatsReport {
    fn default() -> Self {
        StatsReport { format: STATS_FORMAT.into(), version: STATS_VERSION, analyses: BTreeMap::new() }
    }
}

impl StatsReport {
    pub fn write_json<W: Write>(&self, out: W) -> Result<(), StatsError> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, StatsError> {
        let r: StatsReport = serde_json::from_reader(input)?;
        if r.format != STATS_FORMAT || r.version != STATS_VERSION {
            return Err(StatsError::Format(format!("unsupported {} version {}", r.format, r.version)));
        }
        Ok(r)
    }
}

/// Runs PCA, feature importance and per-variable ANOVA/Tukey for `rows`
/// grouped by `labels` (one label per row, `groups` distinct values).
pub fn analyze<S: AsRef<str>>(
    rows: &[Vec<f64>],
    labels: &[usize],
    group_names: &[String],
    feature_names: &[S],
    n_components: usize,
    ranking: Ranking,
    alpha: f64,
) -> Result<Analysis, StatsError> {
    if rows.len() != labels.len() {
        return Err(StatsError::Domain(format!("{} labels for {} rows", labels.len(), rows.len())));
    }
    let dim = feature_names.len();
    let (pca_result, importance) = if rows.len() >= 2 && n_components > 0 {
        let p = pca(rows, n_components.min(dim))?;
        let fi = feature_importance(&p, feature_names, ranking)?;
        (Some(p), Some(fi))
    } else {
        (None, None)
    };
    let mut anova_map = BTreeMap::new();
    let mut tukey_map = BTreeMap::new();
    let mut skipped = BTreeMap::new();
    for (f, name) in feature_names.iter().enumerate() {
        let mut groups = vec![Vec::new(); group_names.len()];
        for (r, &l) in rows.iter().zip(labels) {
            groups[l].push(r[f]);
        }
        match (one_way_anova(&groups), tukey_hsd(&groups, alpha)) {
            (Ok(a), Ok(t)) => {
                anova_map.insert(name.as_ref().to_string(), a);
                tukey_map.insert(name.as_ref().to_string(), t);
            }
            (Err(e), _) | (_, Err(e)) => {
                skipped.insert(name.as_ref().to_string(), e.to_string());
            }
        }
    }
    Ok(Analysis {
        groups: group_names.to_vec(),
        pca: pca_result,
        feature_importance: importance,
        anova: anova_map,
        tukey: tukey_map,
        skipped,
    })
}
