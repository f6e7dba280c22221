//! Run configuration, read from TOML and overridden from the command line.

use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use persona_miner::ingest::{GithubConfig, RepoSlug, ZenodoQuery};
use persona_miner::sampling::CriteriaConfig;
use persona_miner::stats::Ranking;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, ErrorKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Where stage files go. Not part of the config hash.
    pub output_dir: PathBuf,
    pub exclude_bots: bool,
    pub bot_deny_list: Vec<String>,
    /// Day used for repository age; defaults to the stored age (archive) or today (live).
    pub reference_date: Option<NaiveDate>,
    pub source: SourceConfig,
    pub criteria: CriteriaConfig,
    pub sampling: SamplingConfig,
    pub cluster: ClusterConfig,
    pub personas: PersonaConfig,
    pub analysis: AnalysisConfig,
    pub classify: ClassifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            exclude_bots: true,
            bot_deny_list: vec!["dependabot".into(), "github-actions".into(), "renovate".into()],
            reference_date: None,
            source: SourceConfig::default(),
            criteria: CriteriaConfig::default(),
            sampling: SamplingConfig::default(),
            cluster: ClusterConfig::default(),
            personas: PersonaConfig::default(),
            analysis: AnalysisConfig::default(),
            classify: ClassifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    /// JSON Lines archive written by `fetch`.
    pub archive: Option<PathBuf>,
    pub live: Option<LiveSource>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveSource {
    /// Explicit candidates; used as well as any Zenodo results.
    pub repos: Vec<String>,
    /// Zenodo result pages to walk; 0 skips the search.
    pub zenodo_pages: u32,
    pub zenodo: ZenodoQuery,
    pub github: GithubConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub fraction: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { fraction: 0.45 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Fixed number of initial clusters; unset picks it by CH over the k range.
    pub initial_k: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub sub_k_min: usize,
    pub sub_k_max: usize,
    pub memory_budget_mb: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { initial_k: None, k_min: 2, k_max: 10, sub_k_min: 2, sub_k_max: 10, memory_budget_mb: 8192 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonaConfig {
    /// Profile table; the bundled reference table when unset.
    pub profiles: Option<PathBuf>,
    pub match_threshold: f64,
}

impl Default for PersonaConfig {
    fn default() -> Self {
        PersonaConfig { profiles: None, match_threshold: persona_miner::personas::DEFAULT_MATCH_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub components: usize,
    pub alpha: f64,
    pub ranking: Ranking,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { components: 3, alpha: 0.05, ranking: Ranking::Absolute }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub keywords: Option<PathBuf>,
    pub activity_rules: Option<PathBuf>,
}

/// Command-line values that win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub fraction: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub exclude_bots: Option<bool>,
    pub reference_date: Option<NaiveDate>,
    pub k_max: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::new("config", ErrorKind::Config, msg)
}

impl RunConfig {
    /// Reads `path`; relative paths inside it are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(p) = self.source.archive.as_mut() {
            fix(p);
        }
        if let Some(p) = self.personas.profiles.as_mut() {
            fix(p);
        }
        if let Some(p) = self.classify.keywords.as_mut() {
            fix(p);
        }
        if let Some(p) = self.classify.activity_rules.as_mut() {
            fix(p);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(f) = o.fraction {
            self.sampling.fraction = f;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(b) = o.exclude_bots {
            self.exclude_bots = b;
        }
        if let Some(d) = o.reference_date {
            self.reference_date = Some(d);
        }
        if let Some(k) = o.k_max {
            self.cluster.k_max = k;
            self.cluster.sub_k_max = k;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.validate_source()?;
        self.validate_settings()
    }

    pub fn validate_source(&self) -> Result<(), CliError> {
        match (&self.source.archive, &self.source.live) {
            (Some(_), Some(_)) => return Err(config_err("source: give either an archive or a live source, not both")),
            (None, None) => return Err(config_err("source: no data source configured")),
            (Some(p), None) if !p.is_file() => {
                return Err(config_err(format!("source.archive: {} does not exist", p.display())))
            }
            (None, Some(live)) => {
                if live.repos.is_empty() && live.zenodo_pages == 0 {
                    return Err(config_err("source.live: no repositories listed and the Zenodo search is off"));
                }
                for r in &live.repos {
                    r.parse::<RepoSlug>().map_err(|e| config_err(format!("source.live.repos: {e}")))?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Everything but the data source.
    pub fn validate_settings(&self) -> Result<(), CliError> {
        self.criteria.validate().map_err(|e| config_err(e.to_string()))?;
        if !(self.sampling.fraction > 0.0 && self.sampling.fraction <= 1.0) {
            return Err(config_err(format!("sampling.fraction must be in (0, 1], got {}", self.sampling.fraction)));
        }
        let c = &self.cluster;
        if c.k_min < 2 || c.k_min > c.k_max {
            return Err(config_err(format!("cluster: need 2 <= k_min <= k_max, got {}..{}", c.k_min, c.k_max)));
        }
        if c.sub_k_min < 2 || c.sub_k_min > c.sub_k_max {
            return Err(config_err(format!("cluster: need 2 <= sub_k_min <= sub_k_max, got {}..{}", c.sub_k_min, c.sub_k_max)));
        }
        if c.initial_k == Some(0) {
            return Err(config_err("cluster.initial_k must be at least 1"));
        }
        for p in [&self.personas.profiles, &self.classify.keywords, &self.classify.activity_rules].into_iter().flatten() {
            if !p.is_file() {
                return Err(config_err(format!("{} does not exist", p.display())));
            }
        }
        if !(self.personas.match_threshold > 0.0) {
            return Err(config_err("personas.match_threshold must be positive"));
        }
        if !(self.analysis.alpha > 0.0 && self.analysis.alpha < 1.0) {
            return Err(config_err("analysis.alpha must be in (0, 1)"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, output directory left out, so
    /// the same run written to two places hashes the same.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn reference_instant(&self) -> Option<DateTime<Utc>> {
        self.reference_date.map(|d| d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc())
    }
}
