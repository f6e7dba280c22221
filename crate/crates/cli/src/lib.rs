//! Stage-by-stage pipeline behind the `persona-miner` command.

pub mod config;
pub mod error;
pub mod stages;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::Utc;
use persona_miner::personas::{self, PersonaTable};
use persona_miner::simgen::{self, ArchetypeSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{Overrides, RunConfig};
pub use error::{CliError, ErrorKind};

use error::StageContext;

pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const MANIFEST_FORMAT: &str = "persona-miner-manifest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub created_at: String,
    pub status: Status,
    pub config_hash: String,
    pub seed: u64,
    pub stages_completed: Vec<String>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    /// SHA-256 of every file in the output directory besides this one.
    pub outputs: BTreeMap<String, String>,
}

type Stage = (&'static str, fn(&RunConfig) -> Result<(), CliError>);

pub const STAGES: [Stage; 8] = [
    ("fetch", stages::fetch),
    ("filter", stages::filter),
    ("metrics", stages::metrics),
    ("classify", stages::classify),
    ("cluster", stages::cluster),
    ("analyze", stages::analyze),
    ("assign", stages::assign),
    ("report", stages::report),
];

fn hash_outputs(dir: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(dir).stage("manifest")? {
        let entry = entry.stage("manifest")?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == MANIFEST_FILE || !entry.file_type().stage("manifest")?.is_file() {
            continue;
        }
        let bytes = std::fs::read(entry.path()).stage("manifest")?;
        out.insert(name, hex::encode(Sha256::digest(&bytes)));
    }
    Ok(out)
}

fn write_manifest(cfg: &RunConfig, done: Vec<String>, failure: Option<&CliError>) -> Result<RunManifest, CliError> {
    std::fs::create_dir_all(&cfg.output_dir).stage("manifest")?;
    let m = RunManifest {
        format: MANIFEST_FORMAT.into(),
        version: 1,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        created_at: Utc::now().to_rfc3339(),
        status: if failure.is_some() { Status::Partial } else { Status::Complete },
        config_hash: cfg.hash(),
        seed: cfg.seed,
        stages_completed: done,
        failed_stage: failure.map(|e| e.stage.clone()),
        error: failure.map(|e| e.message.clone()),
        outputs: hash_outputs(&cfg.output_dir)?,
    };
    let path = cfg.output_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&m).stage("manifest")? + "\n";
    std::fs::write(path, text).stage("manifest")?;
    Ok(m)
}

fn run_stages(cfg: &RunConfig, stages: &[Stage]) -> Result<RunManifest, CliError> {
    let mut done = Vec::new();
    for (name, f) in stages {
        log::info!("stage {name}");
        if let Err(e) = f(cfg) {
            // record what exists so far, then report the stage failure itself
            let _ = write_manifest(cfg, done, Some(&e));
            return Err(e);
        }
        done.push(name.to_string());
    }
    write_manifest(cfg, done, None)
}

/// Every stage in order, then the manifest.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    run_stages(cfg, &STAGES)
}

/// Clustering onwards from a published per-individual table.
pub fn run_replication(cfg: &RunConfig, table: &Path) -> Result<RunManifest, CliError> {
    cfg.validate_settings()?;
    let mut cfg = cfg.clone();
    cfg.source = Default::default();
    let load: Stage = ("replicate", |_| Ok(()));
    stages::replicate(&cfg, table)?;
    run_stages(&cfg, &[load, STAGES[4], STAGES[5], STAGES[6], STAGES[7]])
}

pub fn run_stage(cfg: &RunConfig, name: &str) -> Result<(), CliError> {
    let (_, f) = STAGES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::new("cli", ErrorKind::Config, format!("unknown stage {name}")))?;
    f(cfg)
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    /// `[[archetype]]` file; the reference profiles when unset.
    pub specs: Option<PathBuf>,
    pub count: usize,
    pub noise_sd: f64,
    pub initial_k: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions { specs: None, count: 200, noise_sd: 2.0, initial_k: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub specs: Vec<ArchetypeSpec>,
    pub individuals: usize,
    pub direct_recovery: f64,
    pub pipeline_recovery: f64,
}

pub const TRUTH_FILE: &str = "truth.csv";
pub const SIMULATION_FILE: &str = "simulation.json";

/// Generates known personas, runs cluster and assign on them, and scores
/// both labelling modes against the generating persona.
pub fn simulate(cfg: &RunConfig, opts: &SimulateOptions) -> Result<SimulationReport, CliError> {
    const STAGE: &str = "simulate";
    cfg.validate_settings()?;
    let table: PersonaTable = stages::persona_table(cfg, STAGE)?;
    let specs = match &opts.specs {
        None => simgen::specs_from_table(&table, opts.count, opts.noise_sd),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::new(STAGE, ErrorKind::Config, format!("{}: {e}", p.display())))?;
            simgen::load_specs(&text, &table).map_err(|e| CliError::new(STAGE, ErrorKind::Config, e.to_string()))?
        }
    };
    let sim = simgen::generate(&specs, cfg.seed).stage(STAGE)?;
    let mut cfg = cfg.clone();
    cfg.source = Default::default();
    cfg.cluster.initial_k = Some(opts.initial_k);
    std::fs::create_dir_all(&cfg.output_dir).stage(STAGE)?;
    let metrics_file = std::fs::File::create(stages::out_path(&cfg, stages::METRICS_FILE)).stage(STAGE)?;
    persona_miner::metrics::write_metrics_csv(&sim.vectors, std::io::BufWriter::new(metrics_file)).stage(STAGE)?;
    let mut w = csv::Writer::from_path(stages::out_path(&cfg, TRUTH_FILE)).stage(STAGE)?;
    w.write_record(["repo", "login", "persona"]).stage(STAGE)?;
    for (v, l) in sim.vectors.iter().zip(&sim.labels) {
        w.write_record([v.repo.to_string(), v.login.clone(), l.clone()]).stage(STAGE)?;
    }
    w.flush().stage(STAGE)?;

    stages::cluster(&cfg)?;
    stages::assign(&cfg)?;

    let assigned = personas::read_personas_csv(std::io::BufReader::new(
        std::fs::File::open(stages::out_path(&cfg, stages::PERSONAS_FILE)).stage(STAGE)?,
    ))
    .stage(STAGE)?;
    let n = sim.vectors.len();
    let rate = |hits: usize| if n == 0 { 0.0 } else { hits as f64 / n as f64 };
    let pipeline_hits = assigned.iter().zip(&sim.labels).filter(|(a, l)| &a.persona == *l).count();
    let direct_hits =
        sim.vectors.iter().zip(&sim.labels).filter(|(v, l)| &personas::assign_persona(v, &table).persona == *l).count();
    let report = SimulationReport {
        seed: cfg.seed,
        specs,
        individuals: n,
        direct_recovery: rate(direct_hits),
        pipeline_recovery: rate(pipeline_hits),
    };
    let text = serde_json::to_string_pretty(&report).stage(STAGE)? + "\n";
    std::fs::write(stages::out_path(&cfg, SIMULATION_FILE), text).stage(STAGE)?;
    Ok(report)
}
