//! Pipeline stages. Each reads the files its predecessor wrote into the
//! output directory, so any stage can be rerun on its own.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::Utc;
use persona_miner::classify::{self, ActivityRules, ClassificationTables, CommitClassification, KeywordTable};
use persona_miner::cluster::{self, ClusterLabels, Dendrogram, KSelection, LabelRow, Subclustering};
use persona_miner::ingest::http::Fetcher;
use persona_miner::ingest::{self, Archive, GithubClient, InteractionSet, RateBudget, RepoSlug, RepoSummary, UreqTransport};
use persona_miner::metrics::{self, BuildOptions, MetricVector, RepoIndividual, FEATURE_NAMES};
use persona_miner::personas::{self, ClusterMrc, PersonaAssignment, PersonaTable, SubclusterPersona};
use persona_miner::report;
use persona_miner::sampling::{self, EligibilityDecision};
use persona_miner::stats::{self, StatsReport};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, ErrorKind, StageContext};

pub const ARCHIVE_FILE: &str = "archive.jsonl";
pub const ELIGIBILITY_FILE: &str = "eligibility.csv";
pub const SAMPLE_FILE: &str = "sample.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CLASSIFICATION_FILE: &str = "classification.csv";
pub const DENDROGRAM_FILE: &str = "dendrogram.json";
pub const LABELS_FILE: &str = "labels.csv";
pub const SELECTION_FILE: &str = "selection.json";
pub const STATS_FILE: &str = "stats.json";
pub const PERSONAS_FILE: &str = "personas.csv";
pub const TOTALS_FILE: &str = "totals.csv";
pub const UPSET_FILE: &str = "upset.json";
pub const COMPOSITION_FILE: &str = "composition.csv";
pub const SUMMARY_FILE: &str = "summary.json";

const SELECTION_FORMAT: &str = "persona-miner-selection";
const FORMAT_VERSION: u32 = 1;

fn data_err(stage: &str, msg: impl Into<String>) -> CliError {
    CliError::new(stage, ErrorKind::Data, msg)
}

pub fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn create(cfg: &RunConfig, name: &str, stage: &str) -> Result<BufWriter<File>, CliError> {
    std::fs::create_dir_all(&cfg.output_dir).stage(stage)?;
    File::create(out_path(cfg, name)).map(BufWriter::new).stage(stage)
}

fn open(cfg: &RunConfig, name: &str, stage: &str) -> Result<BufReader<File>, CliError> {
    let p = out_path(cfg, name);
    File::open(&p).map(BufReader::new).map_err(|e| {
        data_err(stage, format!("{}: {e} (run the stage that writes it first)", p.display()))
    })
}

fn write_json<T: Serialize>(cfg: &RunConfig, name: &str, stage: &str, value: &T) -> Result<(), CliError> {
    let mut w = create(cfg, name, stage)?;
    serde_json::to_writer_pretty(&mut w, value).stage(stage)?;
    w.write_all(b"\n").stage(stage)?;
    w.flush().stage(stage)
}

/// The archive the pipeline reads: the configured file, or the one `fetch`
/// wrote for a live source.
pub fn archive_path(cfg: &RunConfig) -> PathBuf {
    match &cfg.source.archive {
        Some(p) => p.clone(),
        None => out_path(cfg, ARCHIVE_FILE),
    }
}

pub fn load_archive(cfg: &RunConfig, stage: &str) -> Result<Archive, CliError> {
    let p = archive_path(cfg);
    if !p.is_file() {
        return Err(CliError::new(stage, ErrorKind::Config, format!("archive {} does not exist", p.display())));
    }
    let mut archive = Archive::load(&p).stage(stage)?;
    if let Some(reference) = cfg.reference_instant() {
        for s in &mut archive.summaries {
            s.age_days = ingest::age_in_days(s.created_at, reference);
        }
    }
    Ok(archive)
}

fn fetcher_for(cfg: &RunConfig) -> Fetcher {
    let gh = &cfg.source.live.as_ref().expect("live source").github;
    let token = std::env::var(&gh.token_env).ok().filter(|t| !t.is_empty());
    let budget = if token.is_some() { RateBudget::github_authenticated() } else { RateBudget::github_anonymous() };
    let mut f = Fetcher::new(Arc::new(UreqTransport::default()), Arc::new(budget), Default::default())
        .with_header("User-Agent", concat!("persona-miner/", env!("CARGO_PKG_VERSION")))
        .with_header("Accept", "application/vnd.github+json");
    if let Some(t) = token {
        f = f.with_header("Authorization", format!("Bearer {t}"));
    }
    f
}

/// Live mining: candidate summaries, then interaction sets for the sample only.
pub fn fetch(cfg: &RunConfig) -> Result<(), CliError> {
    const STAGE: &str = "fetch";
    let Some(live) = &cfg.source.live else {
        let a = load_archive(cfg, STAGE)?;
        log::info!("archive source: {} summaries, {} interaction sets", a.summaries.len(), a.sets.len());
        return Ok(());
    };
    let fetcher = fetcher_for(cfg);
    let mut candidates: BTreeSet<RepoSlug> = live.repos.iter().map(|r| r.parse().expect("validated")).collect();
    if live.zenodo_pages > 0 {
        let records = ingest::query_zenodo_software_records(&fetcher, &live.zenodo, live.zenodo_pages).stage(STAGE)?;
        candidates.extend(records.iter().filter_map(ingest::extract_github_slug));
    }
    let candidates: Vec<RepoSlug> = candidates.into_iter().collect();
    let reference = cfg.reference_instant().unwrap_or_else(Utc::now);
    let client = GithubClient::new(fetcher, live.github.clone());
    log::info!("fetching {} repository summaries", candidates.len());
    let summaries: Vec<RepoSummary> =
        ingest::github::fetch_concurrently(&candidates, live.github.concurrency, |s| client.fetch_repo_summary(s, reference))
            .into_iter()
            .collect::<Result<_, _>>()
            .stage(STAGE)?;
    let (_, sample) = select_sample(cfg, &summaries)?;
    log::info!("mining {} sampled repositories", sample.len());
    let branches: BTreeMap<&RepoSlug, &str> = summaries.iter().map(|s| (&s.slug, s.default_branch.as_str())).collect();
    let sets = ingest::github::fetch_concurrently(&sample, live.github.concurrency, |s| {
        client.fetch_interactions(s, branches.get(s).copied().filter(|b| !b.is_empty()))
    });
    for s in sets.iter().filter(|s| s.is_incomplete()) {
        log::warn!("{} is incomplete: {}", s.repo, s.incomplete.as_deref().unwrap_or(""));
    }
    std::fs::create_dir_all(&cfg.output_dir).stage(STAGE)?;
    Archive { summaries, sets }.save(out_path(cfg, ARCHIVE_FILE)).stage(STAGE)
}

fn select_sample(cfg: &RunConfig, summaries: &[RepoSummary]) -> Result<(Vec<EligibilityDecision>, Vec<RepoSlug>), CliError> {
    let mut decisions: Vec<EligibilityDecision> =
        summaries.iter().map(|s| sampling::apply_inclusion_criteria(s, &cfg.criteria)).collect();
    decisions.sort_by(|a, b| a.slug.cmp(&b.slug));
    let eligible: Vec<RepoSlug> = decisions.iter().filter(|d| d.eligible()).map(|d| d.slug.clone()).collect();
    let sample = sampling::subsample(&eligible, cfg.sampling.fraction, cfg.seed).stage("filter")?;
    Ok((decisions, sample))
}

pub fn filter(cfg: &RunConfig) -> Result<(), CliError> {
    const STAGE: &str = "filter";
    let archive = load_archive(cfg, STAGE)?;
    let (decisions, sample) = select_sample(cfg, &archive.summaries)?;
    let sets: BTreeSet<&RepoSlug> = archive.sets.iter().map(|s| &s.repo).collect();
    for s in archive.sets.iter().filter(|s| archive.summary_for(&s.repo).is_none()) {
        log::warn!("{} has interactions but no summary; it cannot be screened and is left out", s.repo);
    }
    let missing: Vec<String> = sample.iter().filter(|s| !sets.contains(s)).map(|s| s.to_string()).collect();
    if !missing.is_empty() {
        return Err(data_err(STAGE, format!("sampled repositories have no interaction set: {}", missing.join(", "))));
    }
    sampling::write_eligibility_csv(&decisions, create(cfg, ELIGIBILITY_FILE, STAGE)?).stage(STAGE)?;
    let mut w = csv::Writer::from_writer(create(cfg, SAMPLE_FILE, STAGE)?);
    w.write_record(["repo"]).stage(STAGE)?;
    for s in &sample {
        w.write_record([s.to_string()]).stage(STAGE)?;
    }
    w.flush().stage(STAGE)?;
    log::info!("{} of {} candidates eligible, {} sampled", decisions.iter().filter(|d| d.eligible()).count(), decisions.len(), sample.len());
    Ok(())
}

pub fn read_sample(cfg: &RunConfig, stage: &str) -> Result<Vec<RepoSlug>, CliError> {
    let mut r = csv::Reader::from_reader(open(cfg, SAMPLE_FILE, stage)?);
    if r.headers().stage(stage)?.iter().ne(["repo"]) {
        return Err(data_err(stage, format!("{SAMPLE_FILE}: expected a single repo column")));
    }
    r.records()
        .map(|rec| {
            let rec = rec.stage(stage)?;
            rec[0].parse::<RepoSlug>().stage(stage)
        })
        .collect()
}

fn sampled_sets(cfg: &RunConfig, archive: &Archive, stage: &str) -> Result<Vec<InteractionSet>, CliError> {
    let sample: BTreeSet<RepoSlug> = read_sample(cfg, stage)?.into_iter().collect();
    let mut sets: Vec<InteractionSet> = archive.sets.iter().filter(|s| sample.contains(&s.repo)).cloned().collect();
    sets.sort_by(|a, b| a.repo.cmp(&b.repo));
    if sets.len() != sample.len() {
        return Err(data_err(stage, format!("{} sampled repositories but {} interaction sets", sample.len(), sets.len())));
    }
    Ok(sets)
}

fn build_options(cfg: &RunConfig) -> BuildOptions {
    BuildOptions { bot_deny_list: cfg.bot_deny_list.clone(), exclude_bots: cfg.exclude_bots }
}

fn individuals(cfg: &RunConfig, stage: &str) -> Result<Option<(Vec<RepoIndividual>, Vec<MetricVector>)>, CliError> {
    if cfg.source.archive.is_none() && cfg.source.live.is_none() {
        return Ok(None);
    }
    let archive = load_archive(cfg, stage)?;
    let sets = sampled_sets(cfg, &archive, stage)?;
    metrics::vectors_for_sets(&sets, &build_options(cfg)).stage(stage).map(Some)
}

pub fn metrics(cfg: &RunConfig) -> Result<(), CliError> {
    const STAGE: &str = "metrics";
    let (_, vectors) = individuals(cfg, STAGE)?.ok_or_else(|| data_err(STAGE, "no data source"))?;
    metrics::write_metrics_csv(&vectors, create(cfg, METRICS_FILE, STAGE)?).stage(STAGE)?;
    log::info!("{} repo-individuals", vectors.len());
    Ok(())
}

pub fn classification_tables(cfg: &RunConfig, stage: &str) -> Result<ClassificationTables, CliError> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| CliError::new(stage, ErrorKind::Config, format!("{}: {e}", p.display())));
    let cfg_err = |e: classify::ClassifyError| CliError::new(stage, ErrorKind::Config, e.to_string());
    let mut t = ClassificationTables::default();
    if let Some(p) = &cfg.classify.keywords {
        t.keywords = KeywordTable::from_toml(&read(p)?).map_err(cfg_err)?;
    }
    if let Some(p) = &cfg.classify.activity_rules {
        t.activity = ActivityRules::from_toml(&read(p)?).map_err(cfg_err)?;
    }
    Ok(t)
}

fn classified(cfg: &RunConfig, stage: &str) -> Result<Vec<CommitClassification>, CliError> {
    if cfg.source.archive.is_none() && cfg.source.live.is_none() {
        return Ok(Vec::new());
    }
    let tables = classification_tables(cfg, stage)?;
    let archive = load_archive(cfg, stage)?;
    let sets = sampled_sets(cfg, &archive, stage)?;
    Ok(sets.iter().flat_map(|s| classify::classify_set(s, &tables)).collect())
}

pub fn classify(cfg: &RunConfig) -> Result<(), CliError> {
    const STAGE: &str = "classify";
    let rows = classified(cfg, STAGE)?;
    classify::write_classification_csv(&rows, create(cfg, CLASSIFICATION_FILE, STAGE)?).stage(STAGE)?;
    log::info!("{} commits classified", rows.len());
    Ok(())
}

pub fn read_metrics(cfg: &RunConfig, stage: &str) -> Result<Vec<MetricVector>, CliError> {
    metrics::read_metrics_csv(open(cfg, METRICS_FILE, stage)?).stage(stage)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubSelection {
    pub cluster: usize,
    pub members: usize,
    pub k: usize,
    pub selection: Option<KSelection>,
    pub unsplittable: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionFile {
    pub format: String,
    pub version: u32,
    pub individuals: usize,
    pub initial_k: usize,
    /// CH scan over the configured range; absent when the k was fixed.
    pub initial: Option<KSelection>,
    pub subclusters: Vec<SubSelection>,
}

pub fn cluster(cfg: &RunConfig) -> Result<(), CliError> {
    const STAGE: &str = "cluster";
    let vectors = read_metrics(cfg, STAGE)?;
    let rows: Vec<[f64; 10]> = vectors.iter().map(|v| v.features()).collect();
    let n = rows.len();
    cluster::check_memory_budget(n, cfg.cluster.memory_budget_mb.saturating_mul(1 << 20)).stage(STAGE)?;
    let mut selection = SelectionFile {
        format: SELECTION_FORMAT.into(),
        version: FORMAT_VERSION,
        individuals: n,
        initial_k: 0,
        initial: None,
        subclusters: Vec::new(),
    };
    let mut label_rows = Vec::with_capacity(n);
    let dendrogram = if n == 0 {
        Dendrogram { n_leaves: 0, merges: Vec::new() }
    } else {
        let d = cluster::agglomerate(&rows).stage(STAGE)?;
        let k = match cfg.cluster.initial_k {
            Some(k) => k,
            None => {
                let sel = cluster::select_k_on(&rows, &d, cfg.cluster.k_min, cfg.cluster.k_max).stage(STAGE)?;
                let k = sel.k_best;
                selection.initial = Some(sel);
                k
            }
        };
        let initial = d.cut(k).stage(STAGE)?;
        selection.initial_k = k;
        let mut sub_of = vec![0usize; n];
        for c in 0..k {
            let sub = cluster::subcluster(&rows, &initial, c, cfg.cluster.sub_k_min, cfg.cluster.sub_k_max).stage(STAGE)?;
            for (&m, l) in sub.members().iter().zip(sub.local_labels()) {
                sub_of[m] = l;
            }
            selection.subclusters.push(match sub {
                Subclustering::Split { members, labels, selection } => {
                    SubSelection { cluster: c, members: members.len(), k: labels.k, selection: Some(selection), unsplittable: None }
                }
                Subclustering::Unsplittable { members, reason } => {
                    SubSelection { cluster: c, members: members.len(), k: 1, selection: None, unsplittable: Some(reason) }
                }
            });
        }
        for (i, v) in vectors.iter().enumerate() {
            label_rows.push(LabelRow {
                repo: v.repo.to_string(),
                login: v.login.clone(),
                cluster: initial.labels[i],
                subcluster: Some(sub_of[i]),
            });
        }
        d
    };
    let mut w = create(cfg, DENDROGRAM_FILE, STAGE)?;
    dendrogram.write_json(&mut w).stage(STAGE)?;
    w.write_all(b"\n").stage(STAGE)?;
    w.flush().stage(STAGE)?;
    cluster::write_labels_csv(&label_rows, create(cfg, LABELS_FILE, STAGE)?).stage(STAGE)?;
    write_json(cfg, SELECTION_FILE, STAGE, &selection)?;
    log::info!("{n} individuals in {} initial clusters", selection.initial_k);
    Ok(())
}

/// Labels file checked against the metrics table it was computed from.
pub fn read_labels(cfg: &RunConfig, vectors: &[MetricVector], stage: &str) -> Result<Vec<LabelRow>, CliError> {
    let rows = cluster::read_labels_csv(open(cfg, LABELS_FILE, stage)?).stage(stage)?;
    if rows.len() != vectors.len() {
        return Err(data_err(stage, format!("{LABELS_FILE} has {} rows but {METRICS_FILE} has {}", rows.len(), vectors.len())));
    }
    for (i, (r, v)) in rows.iter().zip(vectors).enumerate() {
        if r.repo != v.repo.to_string() || r.login != v.login {
            return Err(data_err(stage, format!("{LABELS_FILE} row {} is {}/{}, expected {}/{}", i + 2, r.repo, r.login, v.repo, v.login)));
        }
    }
    ClusterLabels::new(rows.iter().map(|r| r.cluster).collect()).stage(stage)?;
    Ok(rows)
}

fn cluster_names(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("cluster {c}")).collect()
}

pub fn analyze(cfg: &RunConfig) -> Result<(), CliError> {
    const STAGE: &str = "analyze";
    let vectors = read_metrics(cfg, STAGE)?;
    let labels = read_labels(cfg, &vectors, STAGE)?;
    let mut report = StatsReport::default();
    if !labels.is_empty() {
        let rows: Vec<Vec<f64>> = vectors.iter().map(|v| v.features().to_vec()).collect();
        let initial: Vec<usize> = labels.iter().map(|l| l.cluster).collect();
        let k = initial.iter().max().map_or(0, |m| m + 1);
        let a = &cfg.analysis;
        let run = |rows: &[Vec<f64>], lab: &[usize], names: &[String]| {
            stats::analyze(rows, lab, names, &FEATURE_NAMES, a.components, a.ranking, a.alpha).stage(STAGE)
        };
        report.analyses.insert("initial".into(), run(&rows, &initial, &cluster_names(k))?);
        for c in 0..k {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| initial[i] == c).collect();
            let sub: Vec<usize> = idx.iter().map(|&i| labels[i].subcluster.unwrap_or(0)).collect();
            let ks = sub.iter().max().map_or(0, |m| m + 1);
            if ks < 2 {
                continue;
            }
            let sub_rows: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
            let names: Vec<String> = (0..ks).map(|s| format!("sub-cluster {c}:{s}")).collect();
            report.analyses.insert(format!("cluster {c}"), run(&sub_rows, &sub, &names)?);
        }
    }
    let mut w = create(cfg, STATS_FILE, STAGE)?;
    report.write_json(&mut w).stage(STAGE)?;
    w.write_all(b"\n").stage(STAGE)?;
    w.flush().stage(STAGE)
}

pub fn persona_table(cfg: &RunConfig, stage: &str) -> Result<PersonaTable, CliError> {
    match &cfg.personas.profiles {
        None => Ok(PersonaTable::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::new(stage, ErrorKind::Config, format!("{}: {e}", p.display())))?;
            PersonaTable::from_toml(&text).map_err(|e| CliError::new(stage, ErrorKind::Config, format!("{}: {e}", p.display())))
        }
    }
}

fn labelled_personas(
    cfg: &RunConfig,
    vectors: &[MetricVector],
    labels: &[LabelRow],
    table: &PersonaTable,
    stage: &str,
) -> Result<(Vec<SubclusterPersona>, Vec<PersonaAssignment>), CliError> {
    let cluster_of: Vec<usize> = labels.iter().map(|l| l.cluster).collect();
    let sub_of: Vec<usize> = labels.iter().map(|l| l.subcluster.unwrap_or(0)).collect();
    personas::label_nested(vectors, &cluster_of, &sub_of, table, cfg.personas.match_threshold).stage(stage)
}

/// Pipeline labelling when a labels file exists, direct otherwise.
pub fn assign(cfg: &RunConfig) -> Result<(), CliError> {
    const STAGE: &str = "assign";
    let vectors = read_metrics(cfg, STAGE)?;
    let table = persona_table(cfg, STAGE)?;
    let assignments = if out_path(cfg, LABELS_FILE).is_file() {
        let labels = read_labels(cfg, &vectors, STAGE)?;
        labelled_personas(cfg, &vectors, &labels, &table, STAGE)?.1
    } else {
        log::info!("no {LABELS_FILE}; labelling each individual directly");
        vectors.iter().map(|v| personas::assign_persona(v, &table)).collect()
    };
    personas::write_personas_csv(&assignments, create(cfg, PERSONAS_FILE, STAGE)?).stage(STAGE)
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSummary {
    pub candidates: usize,
    pub eligible: usize,
    pub sampled: usize,
    pub fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub size: usize,
    pub interactivity: Option<String>,
    pub mrc: Option<report::Distribution>,
    pub uit: BTreeMap<u8, usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub format: &'static str,
    pub version: u32,
    pub sample: Option<SampleSummary>,
    pub individuals: usize,
    pub bot_flagged: usize,
    pub clusters: Vec<ClusterSummary>,
    pub subclusters: Vec<SubclusterPersona>,
    pub persona_counts: BTreeMap<String, usize>,
    pub composition: report::CompositionSummary,
    pub mrc: Option<report::Distribution>,
    pub uit: BTreeMap<u8, usize>,
    pub classification: Vec<classify::ClassificationSummary>,
    pub sanity_check: Option<personas::SanityCheck>,
}

pub fn report(cfg: &RunConfig) -> Result<(), CliError> {
    const STAGE: &str = "report";
    let vectors = read_metrics(cfg, STAGE)?;
    let labels = read_labels(cfg, &vectors, STAGE)?;
    let table = persona_table(cfg, STAGE)?;

    let inds = individuals(cfg, STAGE)?.map(|(i, _)| i).unwrap_or_default();
    report::write_totals_csv(&report::interaction_totals(&inds), create(cfg, TOTALS_FILE, STAGE)?).stage(STAGE)?;
    let upset = report::upset_counts(&inds, 0.0);
    let mut w = create(cfg, UPSET_FILE, STAGE)?;
    upset.write_json(&mut w).stage(STAGE)?;
    w.write_all(b"\n").stage(STAGE)?;
    w.flush().stage(STAGE)?;

    let pairs: Vec<(String, usize)> = labels.iter().map(|l| (l.repo.clone(), l.cluster)).collect();
    let (rows, composition) = report::composition(&pairs);
    report::write_composition_csv(&rows, create(cfg, COMPOSITION_FILE, STAGE)?).stage(STAGE)?;

    let sample = if cfg.source.archive.is_some() || cfg.source.live.is_some() {
        let archive = load_archive(cfg, STAGE)?;
        let (decisions, sampled) = select_sample(cfg, &archive.summaries)?;
        Some(SampleSummary {
            candidates: decisions.len(),
            eligible: decisions.iter().filter(|d| d.eligible()).count(),
            sampled: sampled.len(),
            fraction: cfg.sampling.fraction,
            seed: cfg.seed,
        })
    } else {
        None
    };

    let k = labels.iter().map(|l| l.cluster + 1).max().unwrap_or(0);
    let mrc_of = |c: usize| -> Vec<f64> {
        vectors.iter().zip(&labels).filter(|(_, l)| l.cluster == c).map(|(v, _)| v.mrc).collect()
    };
    let order = personas::order_clusters_by_interactivity(
        &(0..k)
            .map(|c| {
                let m = mrc_of(c);
                ClusterMrc { cluster: c, mean_mrc: m.iter().sum::<f64>() / m.len().max(1) as f64, size: m.len() }
            })
            .collect::<Vec<_>>(),
    );
    let clusters = (0..k)
        .map(|c| {
            let uits: Vec<u8> = vectors.iter().zip(&labels).filter(|(_, l)| l.cluster == c).map(|(v, _)| v.uit).collect();
            ClusterSummary {
                cluster: c,
                size: uits.len(),
                interactivity: match &order {
                    personas::InteractivityOrder::Standard(m) => m.get(&c).map(|l| format!("{l:?}")),
                    personas::InteractivityOrder::NonstandardK(m) => m.get(&c).map(|r| format!("rank {r}")),
                },
                mrc: report::describe(&mrc_of(c)),
                uit: report::uit_distribution(&uits),
            }
        })
        .collect();

    let (subclusters, assignments) = if labels.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        labelled_personas(cfg, &vectors, &labels, &table, STAGE)?
    };
    let mut persona_counts = BTreeMap::new();
    for a in &assignments {
        *persona_counts.entry(a.persona.clone()).or_insert(0) += 1;
    }
    let all_mrc: Vec<f64> = vectors.iter().map(|v| v.mrc).collect();
    let all_uit: Vec<u8> = vectors.iter().map(|v| v.uit).collect();
    let summary = Summary {
        format: report::SUMMARY_FORMAT,
        version: report::REPORT_VERSION,
        sample,
        individuals: vectors.len(),
        bot_flagged: vectors.iter().filter(|v| v.is_bot_flagged).count(),
        clusters,
        subclusters,
        persona_counts,
        composition,
        mrc: report::describe(&all_mrc),
        uit: report::uit_distribution(&all_uit),
        classification: classify::summarize(&classified(cfg, STAGE)?),
        sanity_check: (!assignments.is_empty()).then(|| personas::dominant_holder_check(&vectors, &assignments, &table)),
    };
    write_json(cfg, SUMMARY_FILE, STAGE, &summary)
}

/// Column names accepted by `--replicate`, first name canonical.
const REPLICATE_COLUMNS: [&[&str]; 12] = [
    &["rc_commits_created", "pc_commits_created", "pc_commit_created", "rc_commit_created"],
    &["rc_issues_created", "pc_issues_created", "pc_issue_created", "rc_issue_created"],
    &["rc_issues_closed", "pc_issues_closed", "pc_issue_closed", "rc_issue_closed"],
    &["rc_issues_assigned", "pc_issues_assigned", "pc_assigned_issues", "rc_assigned_issues"],
    &["rc_prs_created", "pc_pr_created", "pc_prs_created", "rc_pr_created"],
    &["rc_prs_closed", "pc_pr_closed", "pc_prs_closed", "rc_pr_closed"],
    &["mrc", "mean_pc", "mean_rc"],
    &["pct_created_minus_closed_issues", "pc_created_minus_closed_issues", "net_issue_closure"],
    &["pct_sum_n_interactions", "pc_sum_n_interactions", "pc_interactions"],
    &["pct_interaction_days", "pc_interaction_days", "pc_days"],
    &["repo", "repo_name", "repository"],
    &["login", "username", "user", "author"],
];

/// Reads a published per-individual table into metric vectors. Column
/// names are matched case-insensitively against known aliases;
/// derived columns are recomputed from the six RCs.
pub fn read_replication_csv(path: &Path) -> Result<Vec<MetricVector>, CliError> {
    const STAGE: &str = "replicate";
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::new(STAGE, ErrorKind::Config, format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r.headers().stage(STAGE)?.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let col = |aliases: &[&str]| header.iter().position(|h| aliases.contains(&h.as_str()));
    let mut idx = [0usize; 12];
    for (slot, aliases) in idx.iter_mut().zip(REPLICATE_COLUMNS) {
        match col(aliases) {
            Some(i) => *slot = i,
            None if aliases[0] == "mrc" || aliases[0].starts_with("pct_created") => *slot = usize::MAX,
            None => return Err(data_err(STAGE, format!("{}: no column for {}", path.display(), aliases[0]))),
        }
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.stage(STAGE)?;
        let num = |j: usize| -> Result<f64, CliError> {
            rec[idx[j]].trim().parse::<f64>().map_err(|e| data_err(STAGE, format!("row {}, {}: {e}", row + 2, REPLICATE_COLUMNS[j][0])))
        };
        let mut rcs = [0.0; 6];
        for (j, rc) in rcs.iter_mut().enumerate() {
            *rc = num(j)?;
        }
        let repo = rec[idx[10]].trim().parse::<RepoSlug>().stage(STAGE)?;
        let uit = rcs.iter().filter(|&&x| x > 0.0).count() as u8;
        let v = MetricVector::from_rcs(repo, rec[idx[11]].trim().to_string(), rcs, num(8)?, num(9)?, uit);
        v.validate().map_err(|e| data_err(STAGE, format!("row {}: {e}", row + 2)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn replicate(cfg: &RunConfig, path: &Path) -> Result<(), CliError> {
    let vectors = read_replication_csv(path)?;
    metrics::write_metrics_csv(&vectors, create(cfg, METRICS_FILE, "replicate")?).stage("replicate")
}
