//! Repo-individuals and their contribution metrics.
//!
//! Every clustering feature is a percentage of the individual's repository,
//! which is what makes contributors from repositories of very different
//! size comparable.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::ops::{Index, IndexMut};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::{is_bot_login, InteractionKind, InteractionSet, RepoSlug};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("individual count {count} exceeds repository total {total}")]
    CountExceedsTotal { count: u64, total: u64 },
    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("individual {login} belongs to {found}, totals are for {expected}")]
    RepoMismatch { login: String, expected: RepoSlug, found: RepoSlug },
    #[error("invalid metric vector for {repo}/{login}: {message}")]
    Invalid { repo: String, login: String, message: String },
    #[error("metrics table: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Per-kind tallies, always all six kinds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts(pub [u64; 6]);

impl Index<InteractionKind> for KindCounts {
    type Output = u64;
    fn index(&self, kind: InteractionKind) -> &u64 {
        &self.0[kind.index()]
    }
}

impl IndexMut<InteractionKind> for KindCounts {
    fn index_mut(&mut self, kind: InteractionKind) -> &mut u64 {
        &mut self.0[kind.index()]
    }
}

impl KindCounts {
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn as_map(&self) -> BTreeMap<InteractionKind, u64> {
        InteractionKind::ALL.iter().map(|&k| (k, self[k])).collect()
    }

    pub fn present_kinds(&self) -> Vec<InteractionKind> {
        InteractionKind::ALL.iter().copied().filter(|&k| self[k] > 0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoIndividual {
    pub repo: RepoSlug,
    pub login: String,
    pub counts: KindCounts,
    pub active_dates: BTreeSet<NaiveDate>,
    pub is_bot_flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoTotals {
    pub repo: RepoSlug,
    pub totals: KindCounts,
    pub sum_interactions: u64,
    pub sum_individual_interaction_days: u64,
}

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    pub bot_deny_list: Vec<String>,
    pub exclude_bots: bool,
}

/// One individual per distinct actor (sorted by login) plus repository totals.
pub fn build_repo_individuals(set: &InteractionSet, opts: &BuildOptions) -> (Vec<RepoIndividual>, RepoTotals) {
    let mut by_actor: BTreeMap<&str, (KindCounts, BTreeSet<NaiveDate>)> = BTreeMap::new();
    for ev in &set.events {
        let bot = is_bot_login(&ev.actor, &opts.bot_deny_list);
        if bot && opts.exclude_bots {
            continue;
        }
        let entry = by_actor.entry(ev.actor.as_str()).or_default();
        entry.0[ev.kind] += 1;
        entry.1.insert(ev.timestamp.date_naive());
    }
    let mut totals = KindCounts::default();
    let mut days = 0u64;
    let individuals: Vec<RepoIndividual> = by_actor
        .into_iter()
        .map(|(login, (counts, dates))| {
            for k in InteractionKind::ALL {
                totals[k] += counts[k];
            }
            days += dates.len() as u64;
            RepoIndividual {
                repo: set.repo.clone(),
                login: login.to_string(),
                counts,
                active_dates: dates,
                is_bot_flagged: is_bot_login(login, &opts.bot_deny_list),
            }
        })
        .collect();
    let totals = RepoTotals {
        repo: set.repo.clone(),
        totals,
        sum_interactions: totals.total(),
        sum_individual_interaction_days: days,
    };
    (individuals, totals)
}

/// Share of a repository total, as a percentage; an empty total gives 0.
pub fn compute_rc(individual_count: u64, repo_total: u64) -> Result<f64, MetricsError> {
    if individual_count > repo_total {
        return Err(MetricsError::CountExceedsTotal { count: individual_count, total: repo_total });
    }
    if repo_total == 0 {
        return Ok(0.0);
    }
    Ok(100.0 * individual_count as f64 / repo_total as f64)
}

/// Mean of the six RC values; absent types count as zero so the divisor is always 6.
pub fn compute_mrc(rcs: &[f64]) -> Result<f64, MetricsError> {
    if rcs.len() != 6 {
        return Err(MetricsError::Arity { expected: 6, got: rcs.len() });
    }
    Ok(rc_sum(rcs) / 6.0)
}

/// Left-to-right sum; the one summation order used for MRC everywhere.
pub fn rc_sum(rcs: &[f64]) -> f64 {
    rcs.iter().fold(0.0, |acc, x| acc + x)
}

pub fn compute_uit(counts: &KindCounts) -> u8 {
    counts.0.iter().filter(|&&c| c > 0).count() as u8
}

pub fn compute_pct_interaction_days(individual_days: u64, sum_all_days: u64) -> f64 {
    if sum_all_days == 0 {
        0.0
    } else {
        100.0 * individual_days as f64 / sum_all_days as f64
    }
}

/// Negative values mark a net closer.
pub fn compute_net_created_closed(rc_created: f64, rc_closed: f64) -> f64 {
    rc_created - rc_closed
}

pub const FEATURE_NAMES: [&str; 10] = [
    "rc_commits_created",
    "rc_issues_created",
    "rc_issues_closed",
    "rc_issues_assigned",
    "rc_prs_created",
    "rc_prs_closed",
    "mrc",
    "pct_created_minus_closed_issues",
    "pct_sum_n_interactions",
    "pct_interaction_days",
];

/// The ten clustering features of one repo-individual, plus metadata that
/// never enters the distance computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub rc_commits_created: f64,
    pub rc_issues_created: f64,
    pub rc_issues_closed: f64,
    pub rc_issues_assigned: f64,
    pub rc_prs_created: f64,
    pub rc_prs_closed: f64,
    pub mrc: f64,
    pub pct_created_minus_closed_issues: f64,
    pub pct_sum_n_interactions: f64,
    pub pct_interaction_days: f64,
    pub uit: u8,
    pub repo: RepoSlug,
    pub login: String,
    pub is_bot_flagged: bool,
}

impl MetricVector {
    /// Builds a vector from six RC values and the two non-RC shares, deriving
    /// MRC and the issue balance.
    pub fn from_rcs(
        repo: RepoSlug,
        login: String,
        rcs: [f64; 6],
        pct_sum_n_interactions: f64,
        pct_interaction_days: f64,
        uit: u8,
    ) -> Self {
        let mrc = rc_sum(&rcs) / 6.0;
        MetricVector {
            rc_commits_created: rcs[0],
            rc_issues_created: rcs[1],
            rc_issues_closed: rcs[2],
            rc_issues_assigned: rcs[3],
            rc_prs_created: rcs[4],
            rc_prs_closed: rcs[5],
            mrc,
            pct_created_minus_closed_issues: compute_net_created_closed(rcs[1], rcs[2]),
            pct_sum_n_interactions,
            pct_interaction_days,
            uit,
            repo,
            login,
            is_bot_flagged: false,
        }
    }

    pub fn rcs(&self) -> [f64; 6] {
        [
            self.rc_commits_created,
            self.rc_issues_created,
            self.rc_issues_closed,
            self.rc_issues_assigned,
            self.rc_prs_created,
            self.rc_prs_closed,
        ]
    }

    pub fn features(&self) -> [f64; 10] {
        let r = self.rcs();
        [
            r[0],
            r[1],
            r[2],
            r[3],
            r[4],
            r[5],
            self.mrc,
            self.pct_created_minus_closed_issues,
            self.pct_sum_n_interactions,
            self.pct_interaction_days,
        ]
    }

    pub fn net_pr_balance(&self) -> f64 {
        compute_net_created_closed(self.rc_prs_created, self.rc_prs_closed)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let invalid = |message: String| MetricsError::Invalid {
            repo: self.repo.to_string(),
            login: self.login.clone(),
            message,
        };
        for (name, v) in FEATURE_NAMES.iter().zip(self.features()) {
            let (lo, hi) = if *name == "pct_created_minus_closed_issues" { (-100.0, 100.0) } else { (0.0, 100.0) };
            if !v.is_finite() || v < lo || v > hi {
                return Err(invalid(format!("{name} = {v} outside [{lo}, {hi}]")));
            }
        }
        let rcs = self.rcs();
        if self.mrc != rc_sum(&rcs) / 6.0 {
            return Err(invalid(format!("mrc {} is not the mean of its RCs", self.mrc)));
        }
        if self.pct_created_minus_closed_issues != self.rc_issues_created - self.rc_issues_closed {
            return Err(invalid("issue balance inconsistent with RCs".into()));
        }
        let nonzero = rcs.iter().filter(|&&r| r > 0.0).count() as u8;
        if self.uit != nonzero || !(1..=6).contains(&self.uit) {
            return Err(invalid(format!("uit {} but {} interaction types present", self.uit, nonzero)));
        }
        Ok(())
    }
}

pub fn assemble_metric_vectors(
    individuals: &[RepoIndividual],
    totals: &RepoTotals,
) -> Result<Vec<MetricVector>, MetricsError> {
    individuals
        .iter()
        .map(|ind| {
            if ind.repo != totals.repo {
                return Err(MetricsError::RepoMismatch {
                    login: ind.login.clone(),
                    expected: totals.repo.clone(),
                    found: ind.repo.clone(),
                });
            }
            let mut rcs = [0.0; 6];
            for k in InteractionKind::ALL {
                rcs[k.index()] = compute_rc(ind.counts[k], totals.totals[k])?;
            }
            let pct_sum = compute_rc(ind.counts.total(), totals.sum_interactions)?;
            let pct_days =
                compute_pct_interaction_days(ind.active_dates.len() as u64, totals.sum_individual_interaction_days);
            let mut v = MetricVector::from_rcs(
                ind.repo.clone(),
                ind.login.clone(),
                rcs,
                pct_sum,
                pct_days,
                compute_uit(&ind.counts),
            );
            v.is_bot_flagged = ind.is_bot_flagged;
            Ok(v)
        })
        .collect()
}

/// Individuals and vectors for many interaction sets, in input order.
pub fn vectors_for_sets(
    sets: &[InteractionSet],
    opts: &BuildOptions,
) -> Result<(Vec<RepoIndividual>, Vec<MetricVector>), MetricsError> {
    let mut all_individuals = Vec::new();
    let mut vectors = Vec::new();
    for set in sets {
        let (individuals, totals) = build_repo_individuals(set, opts);
        vectors.extend(assemble_metric_vectors(&individuals, &totals)?);
        all_individuals.extend(individuals);
    }
    Ok((all_individuals, vectors))
}

const CSV_HEADER: [&str; 14] = [
    "rc_commits_created",
    "rc_issues_created",
    "rc_issues_closed",
    "rc_issues_assigned",
    "rc_prs_created",
    "rc_prs_closed",
    "mrc",
    "pct_created_minus_closed_issues",
    "pct_sum_n_interactions",
    "pct_interaction_days",
    "repo",
    "login",
    "uit",
    "bot_flagged",
];

pub fn write_metrics_csv<W: Write>(vectors: &[MetricVector], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for v in vectors {
        let mut row: Vec<String> = v.features().iter().map(|x| x.to_string()).collect();
        row.push(v.repo.to_string());
        row.push(v.login.clone());
        row.push(v.uit.to_string());
        row.push(v.is_bot_flagged.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a table written by [`write_metrics_csv`], rejecting any other
/// header and re-validating every row.
pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricVector>, MetricsError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(MetricsError::Format(format!(
            "unexpected header {:?}; expected {:?}",
            header.iter().collect::<Vec<_>>(),
            CSV_HEADER
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let num = |j: usize| -> Result<f64, MetricsError> {
            rec[j].parse::<f64>().map_err(|e| MetricsError::Format(format!("row {row}, {}: {e}", CSV_HEADER[j])))
        };
        let repo: RepoSlug =
            rec[10].parse().map_err(|e| MetricsError::Format(format!("row {row}: {e}")))?;
        let v = MetricVector {
            rc_commits_created: num(0)?,
            rc_issues_created: num(1)?,
            rc_issues_closed: num(2)?,
            rc_issues_assigned: num(3)?,
            rc_prs_created: num(4)?,
            rc_prs_closed: num(5)?,
            mrc: num(6)?,
            pct_created_minus_closed_issues: num(7)?,
            pct_sum_n_interactions: num(8)?,
            pct_interaction_days: num(9)?,
            repo,
            login: rec[11].to_string(),
            uit: rec[12].parse().map_err(|e| MetricsError::Format(format!("row {row}, uit: {e}")))?,
            is_bot_flagged: rec[13].parse().map_err(|e| MetricsError::Format(format!("row {row}, bot_flagged: {e}")))?,
        };
        v.validate()?;
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::InteractionEvent;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn slug(n: &str) -> RepoSlug {
        RepoSlug::new("org", n).unwrap()
    }

    fn ev(repo: &RepoSlug, actor: &str, kind: InteractionKind, day: u32, hour: u32) -> InteractionEvent {
        InteractionEvent {
            repo: repo.clone(),
            actor: actor.into(),
            kind,
            timestamp: Utc.with_ymd_and_hms(2022, 1, day, hour, 0, 0).unwrap(),
            subject_id: format!("{actor}-{day}-{hour}-{kind}"),
            payload: None,
        }
    }

    fn set(repo: &RepoSlug, events: Vec<InteractionEvent>) -> InteractionSet {
        InteractionSet::new(repo.clone(), events, Utc::now()).unwrap()
    }

    #[test]
    fn empty_set() {
        let (ind, totals) = build_repo_individuals(&set(&slug("a"), vec![]), &BuildOptions::default());
        assert!(ind.is_empty());
        assert_eq!(totals.sum_interactions, 0);
        assert_eq!(totals.totals, KindCounts::default());
    }

    #[test]
    fn single_commit() {
        let r = slug("a");
        let (ind, _) = build_repo_individuals(&set(&r, vec![ev(&r, "ada", InteractionKind::CommitCreated, 1, 1)]), &BuildOptions::default());
        assert_eq!(ind.len(), 1);
        assert_eq!(ind[0].counts.0, [1, 0, 0, 0, 0, 0]);
        assert_eq!(ind[0].active_dates.len(), 1);
    }

    #[test]
    fn same_login_in_two_repos_is_two_individuals() {
        let (r1, r2) = (slug("one"), slug("two"));
        let sets = [
            set(&r1, vec![ev(&r1, "ada", InteractionKind::CommitCreated, 1, 1)]),
            set(&r2, vec![ev(&r2, "ada", InteractionKind::CommitCreated, 1, 1)]),
        ];
        let (ind, vecs) = vectors_for_sets(&sets, &BuildOptions::default()).unwrap();
        assert_eq!(ind.len(), 2);
        assert_ne!(ind[0].repo, ind[1].repo);
        assert!(vecs.iter().all(|v| v.rc_commits_created == 100.0));
    }

    #[test]
    fn rc_arithmetic() {
        assert_eq!(compute_rc(5, 20).unwrap(), 25.0);
        assert_eq!(compute_rc(0, 0).unwrap(), 0.0);
        assert_eq!(compute_rc(7, 7).unwrap(), 100.0);
        assert!(matches!(compute_rc(8, 7), Err(MetricsError::CountExceedsTotal { .. })));
    }

    #[test]
    fn mrc_arithmetic() {
        assert_eq!(compute_mrc(&[0.0; 6]).unwrap(), 0.0);
        assert_eq!(compute_mrc(&[10.0, 20.0, 30.0, 0.0, 0.0, 0.0]).unwrap(), 10.0);
        assert_eq!(compute_mrc(&[100.0; 6]).unwrap(), 100.0);
        assert!(compute_mrc(&[1.0; 5]).is_err());
    }

    #[test]
    fn uit_counts_kinds() {
        assert_eq!(compute_uit(&KindCounts([1; 6])), 6);
        assert_eq!(compute_uit(&KindCounts([4, 0, 0, 0, 0, 0])), 1);
        assert_eq!(compute_uit(&KindCounts([4, 1, 0, 0, 2, 0])), 3);
    }

    #[test]
    fn interaction_days() {
        assert_eq!(compute_pct_interaction_days(2, 8), 25.0);
        assert_eq!(compute_pct_interaction_days(0, 0), 0.0);
        let r = slug("a");
        let s = set(&r, vec![ev(&r, "ada", InteractionKind::CommitCreated, 3, 5), ev(&r, "ada", InteractionKind::IssueCreated, 3, 23)]);
        let (ind, totals) = build_repo_individuals(&s, &BuildOptions::default());
        assert_eq!(ind[0].active_dates.len(), 1);
        assert_eq!(totals.sum_individual_interaction_days, 1);
    }

    #[test]
    fn net_balance() {
        assert_eq!(compute_net_created_closed(10.0, 30.0), -20.0);
        assert_eq!(compute_net_created_closed(42.5, 42.5), 0.0);
        assert_eq!(compute_net_created_closed(100.0, 0.0), 100.0);
    }

    #[test]
    fn sole_contributor_owns_everything() {
        let r = slug("a");
        let events = InteractionKind::ALL.iter().enumerate().map(|(i, &k)| ev(&r, "ada", k, 1 + i as u32, 0)).collect();
        let (ind, totals) = build_repo_individuals(&set(&r, events), &BuildOptions::default());
        let v = &assemble_metric_vectors(&ind, &totals).unwrap()[0];
        assert_eq!(v.rcs(), [100.0; 6]);
        assert_eq!(v.mrc, 100.0);
        assert_eq!(v.uit, 6);
        assert_eq!(v.pct_sum_n_interactions, 100.0);
    }

    #[test]
    fn three_contributor_columns_sum_to_100() {
        let r = slug("a");
        use InteractionKind::*;
        let events = vec![
            ev(&r, "ada", CommitCreated, 1, 0),
            ev(&r, "ada", CommitCreated, 2, 0),
            ev(&r, "bob", CommitCreated, 2, 0),
            ev(&r, "bob", IssueCreated, 3, 0),
            ev(&r, "cy", IssueCreated, 3, 0),
            ev(&r, "cy", IssueClosed, 4, 0),
            ev(&r, "ada", PRCreated, 5, 0),
            ev(&r, "cy", PRClosed, 5, 0),
            ev(&r, "bob", IssueAssigned, 6, 0),
        ];
        let (ind, totals) = build_repo_individuals(&set(&r, events), &BuildOptions::default());
        let vs = assemble_metric_vectors(&ind, &totals).unwrap();
        for k in 0..6 {
            let s: f64 = vs.iter().map(|v| v.rcs()[k]).sum();
            assert!((s - 100.0).abs() < 1e-9, "kind {k}: {s}");
        }
        let ada = vs.iter().find(|v| v.login == "ada").unwrap();
        assert!((ada.rc_commits_created - 200.0 / 3.0).abs() < 1e-12);
        assert!((ada.pct_sum_n_interactions - 100.0 * 3.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn tenth_of_interactions() {
        let r = slug("a");
        let mut events: Vec<_> = (0..90).map(|i| ev(&r, "bob", InteractionKind::CommitCreated, 1 + i % 28, 0)).collect();
        events.extend((0..10).map(|i| ev(&r, "ada", InteractionKind::IssueCreated, 1 + i, 0)));
        let (ind, totals) = build_repo_individuals(&set(&r, events), &BuildOptions::default());
        let vs = assemble_metric_vectors(&ind, &totals).unwrap();
        assert_eq!(vs[0].login, "ada");
        assert_eq!(vs[0].pct_sum_n_interactions, 10.0);
    }

    #[test]
    fn mismatched_repo_is_rejected() {
        let (r1, r2) = (slug("one"), slug("two"));
        let (ind, _) = build_repo_individuals(&set(&r1, vec![ev(&r1, "ada", InteractionKind::CommitCreated, 1, 1)]), &BuildOptions::default());
        let (_, totals) = build_repo_individuals(&set(&r2, vec![]), &BuildOptions::default());
        assert!(matches!(assemble_metric_vectors(&ind, &totals), Err(MetricsError::RepoMismatch { .. })));
    }

    #[test]
    fn bots_flagged_or_excluded() {
        let r = slug("a");
        let s = set(&r, vec![ev(&r, "ada", InteractionKind::CommitCreated, 1, 1), ev(&r, "dependabot[bot]", InteractionKind::PRCreated, 1, 1)]);
        let (ind, _) = build_repo_individuals(&s, &BuildOptions::default());
        assert_eq!(ind.len(), 2);
        assert!(ind.iter().find(|i| i.login.ends_with("[bot]")).unwrap().is_bot_flagged);
        let (ind, totals) = build_repo_individuals(&s, &BuildOptions { exclude_bots: true, ..Default::default() });
        assert_eq!(ind.len(), 1);
        assert_eq!(totals.totals[InteractionKind::PRCreated], 0);
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let r = slug("a");
        use InteractionKind::*;
        let events = vec![ev(&r, "ada", CommitCreated, 1, 0), ev(&r, "bob", CommitCreated, 2, 0), ev(&r, "cy", CommitCreated, 3, 0), ev(&r, "cy", IssueClosed, 3, 0)];
        let (ind, totals) = build_repo_individuals(&set(&r, events), &BuildOptions::default());
        let vs = assemble_metric_vectors(&ind, &totals).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv(&vs, &mut buf).unwrap();
        assert_eq!(read_metrics_csv(&buf[..]).unwrap(), vs);
        let bad = String::from_utf8(buf).unwrap().replacen("rc_commits_created", "commits", 1);
        assert!(matches!(read_metrics_csv(bad.as_bytes()), Err(MetricsError::Format(_))));
    }

    fn arb_repo() -> impl Strategy<Value = InteractionSet> {
        proptest::collection::vec((0usize..8, 0usize..6, 1u32..28, 0u32..24), 0..80).prop_map(|raw| {
            let r = slug("p");
            let events = raw
                .into_iter()
                .map(|(a, k, d, h)| ev(&r, &format!("u{a}"), InteractionKind::ALL[k], d, h))
                .collect();
            set(&r, events)
        })
    }

    proptest! {
        #[test]
        fn repo_invariants(s in arb_repo()) {
            let (ind, totals) = build_repo_individuals(&s, &BuildOptions::default());
            let vs = assemble_metric_vectors(&ind, &totals).unwrap();
            for k in InteractionKind::ALL {
                if totals.totals[k] > 0 {
                    let sum: f64 = vs.iter().map(|v| v.rcs()[k.index()]).sum();
                    prop_assert!((sum - 100.0).abs() <= 1e-9);
                }
            }
            if !vs.is_empty() {
                let days: f64 = vs.iter().map(|v| v.pct_interaction_days).sum();
                prop_assert!((days - 100.0).abs() <= 1e-9);
            }
            for (v, i) in vs.iter().zip(&ind) {
                prop_assert!(v.validate().is_ok());
                prop_assert_eq!(v.mrc, rc_sum(&v.rcs()) / 6.0);
                prop_assert_eq!(v.uit as usize, i.counts.present_kinds().len());
                prop_assert_eq!(v.pct_created_minus_closed_issues, v.rc_issues_created - v.rc_issues_closed);
            }
        }
    }
}
