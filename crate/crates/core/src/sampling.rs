//! Repository inclusion criteria and seeded sub-sampling.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{RepoSlug, RepoSummary, Visibility};

const DEFAULT_LANGUAGES: &str = include_str!("../data/languages.toml");

#[derive(Debug, thiserror::Error)]
pub enum SamplingError {
    #[error("sample fraction must be in (0, 1], got {0}")]
    Fraction(f64),
    #[error("invalid criteria: {0}")]
    Criteria(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriteriaConfig {
    /// Inclusive lower bound on unique committers.
    pub min_committers: u64,
    /// Exclusive upper bound on unique committers.
    pub max_committers: u64,
    /// Repositories must be strictly older than this.
    pub min_age_days: i64,
    pub allowed_licenses: Vec<String>,
    pub allowed_languages: Vec<String>,
    pub exclude_forks: bool,
    pub require_public: bool,
}

#[derive(Deserialize)]
struct LanguageFile {
    languages: Vec<String>,
}

pub fn default_languages() -> Vec<String> {
    toml::from_str::<LanguageFile>(DEFAULT_LANGUAGES).expect("bundled language list parses").languages
}

pub fn default_licenses() -> Vec<String> {
    ["MIT", "BSD-2-Clause", "BSD-3-Clause", "Apache-2.0", "ISC"].iter().map(|s| s.to_string()).collect()
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        CriteriaConfig {
            min_committers: 10,
            max_committers: 307,
            min_age_days: 1000,
            allowed_licenses: default_licenses(),
            allowed_languages: default_languages(),
            exclude_forks: true,
            require_public: true,
        }
    }
}

impl CriteriaConfig {
    pub fn validate(&self) -> Result<(), SamplingError> {
        if self.min_committers > self.max_committers {
            return Err(SamplingError::Criteria(format!(
                "min_committers {} exceeds max_committers {}",
                self.min_committers, self.max_committers
            )));
        }
        if self.min_age_days < 0 {
            return Err(SamplingError::Criteria("min_age_days must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Public,
    MinCommitters,
    MaxCommitters,
    License,
    Language,
    Fork,
    Age,
}

impl Criterion {
    pub fn id(self) -> &'static str {
        match self {
            Criterion::Public => "public",
            Criterion::MinCommitters => "min_committers",
            Criterion::MaxCommitters => "max_committers",
            Criterion::License => "license",
            Criterion::Language => "language",
            Criterion::Fork => "fork",
            Criterion::Age => "age",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedCriterion {
    pub criterion: Criterion,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityDecision {
    pub slug: RepoSlug,
    pub failed_criteria: Vec<FailedCriterion>,
}

impl EligibilityDecision {
    pub fn eligible(&self) -> bool {
        self.failed_criteria.is_empty()
    }

    pub fn failed_ids(&self) -> Vec<Criterion> {
        self.failed_criteria.iter().map(|f| f.criterion).collect()
    }
}

/// Evaluates every criterion; the failure list is complete, not the first hit.
pub fn apply_inclusion_criteria(summary: &RepoSummary, cfg: &CriteriaConfig) -> EligibilityDecision {
    let mut failed = Vec::new();
    let mut fail = |criterion, reason: String| failed.push(FailedCriterion { criterion, reason });

    if cfg.require_public && summary.visibility != Visibility::Public {
        let v = match summary.visibility {
            Visibility::Private => "private",
            Visibility::Missing => "missing",
            Visibility::Public => unreachable!(),
        };
        fail(Criterion::Public, format!("repository is {v}"));
    }
    if summary.unique_committers < cfg.min_committers {
        fail(
            Criterion::MinCommitters,
            format!("{} unique committers, at least {} required", summary.unique_committers, cfg.min_committers),
        );
    }
    if summary.unique_committers >= cfg.max_committers {
        fail(
            Criterion::MaxCommitters,
            format!("{} unique committers, fewer than {} required", summary.unique_committers, cfg.max_committers),
        );
    }
    match &summary.license_id {
        None => fail(Criterion::License, "no license visible".into()),
        Some(id) if !cfg.allowed_licenses.iter().any(|l| l.eq_ignore_ascii_case(id)) => {
            fail(Criterion::License, format!("unrecognized license {id:?}"))
        }
        Some(_) => {}
    }
    if summary.languages.is_empty() {
        fail(Criterion::Language, "no languages reported".into());
    } else if !summary
        .languages
        .iter()
        .any(|lang| cfg.allowed_languages.iter().any(|a| a.eq_ignore_ascii_case(lang)))
    {
        fail(Criterion::Language, format!("unrecognized languages {:?}", summary.languages));
    }
    if cfg.exclude_forks && summary.is_fork {
        fail(Criterion::Fork, "repository is a fork".into());
    }
    if summary.age_days <= cfg.min_age_days {
        fail(Criterion::Age, format!("{} days old, more than {} required", summary.age_days, cfg.min_age_days));
    }

    EligibilityDecision { slug: summary.slug.clone(), failed_criteria: failed }
}

/// Number of items a sample of `fraction` keeps out of `n`.
///
/// A product within rounding error of an integer counts as that integer, so
/// a decimal fraction such as 0.018 of 1500 gives 27 rather than 26.
pub fn sample_size(n: usize, fraction: f64) -> usize {
    let p = fraction * n as f64;
    let r = p.round();
    if (p - r).abs() <= 1e-9 * p.max(1.0) {
        r as usize
    } else {
        p.floor() as usize
    }
}

/// Uniform integer in `0..bound` by rejection on the raw ChaCha8 stream, so
/// results depend only on the generator and not on a library's sampling code.
fn uniform_below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % bound;
        }
    }
}

/// Seeded sample without replacement of `floor(fraction × n)` slugs.
///
/// The generator is ChaCha8 seeded through `seed_from_u64`, followed by a
/// partial Fisher–Yates shuffle over input positions. Duplicate input slugs
/// are collapsed first. The result is sorted.
pub fn subsample(eligible: &[RepoSlug], fraction: f64, seed: u64) -> Result<Vec<RepoSlug>, SamplingError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SamplingError::Fraction(fraction));
    }
    let mut seen = BTreeSet::new();
    let mut pool: Vec<&RepoSlug> = eligible.iter().filter(|s| seen.insert(*s)).collect();
    let take = sample_size(pool.len(), fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..take {
        let j = i + uniform_below(&mut rng, (pool.len() - i) as u64) as usize;
        pool.swap(i, j);
    }
    let mut out: Vec<RepoSlug> = pool[..take].iter().map(|s| (*s).clone()).collect();
    out.sort();
    Ok(out)
}

/// `repo,eligible,failed_criteria` with failures rendered `id: reason; ...`.
pub fn write_eligibility_csv<W: Write>(decisions: &[EligibilityDecision], out: W) -> Result<(), SamplingError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["repo", "eligible", "failed_criteria"])?;
    for d in decisions {
        let failed = d
            .failed_criteria
            .iter()
            .map(|f| format!("{}: {}", f.criterion, f.reason))
            .collect::<Vec<_>>()
            .join("; ");
        w.write_record([d.slug.to_string(), d.eligible().to_string(), failed])?;
    }
    w.flush()?;
    Ok(())
}
