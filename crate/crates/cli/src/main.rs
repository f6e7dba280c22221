use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use persona_miner_cli::{run_pipeline, run_replication, run_stage, simulate, CliError, ErrorKind, Overrides, RunConfig, SimulateOptions};

#[derive(Parser)]
#[command(name = "persona-miner", version, about = "Mine, cluster and label contributor behaviour in research-software repositories")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Share of eligible repositories to mine
    #[arg(long, global = true)]
    fraction: Option<f64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Drop bot accounts before computing metrics
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    exclude_bots: Option<bool>,
    /// Day repository ages are measured at (YYYY-MM-DD)
    #[arg(long, global = true)]
    reference_date: Option<NaiveDate>,
    /// Upper end of the CH scan, for clusters and sub-clusters
    #[arg(long, global = true)]
    k_max: Option<usize>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Mine repositories (live source) or check the archive
    Fetch,
    /// Apply the inclusion criteria and draw the sample
    Filter,
    /// Per-individual metrics for the sampled repositories
    Metrics,
    /// Commit development, size and activity types
    Classify,
    /// Ward clustering and CH-selected sub-clusters
    Cluster,
    /// PCA, ANOVA and Tukey comparisons between clusters
    Analyze,
    /// Persona labels from the profile table
    Assign,
    /// Totals, combinations, composition and the run summary
    Report,
    /// Generate personas with known labels and run clustering on them
    Simulate {
        /// Archetype file with [[archetype]] entries
        #[arg(long)]
        specs: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 2.0)]
        noise_sd: f64,
        #[arg(long, default_value_t = 3)]
        initial_k: usize,
    },
    /// Every stage in order
    Run {
        /// Start from a published per-individual table instead of an archive
        #[arg(long)]
        replicate: Option<PathBuf>,
    },
}

fn load_config(g: &Global) -> Result<RunConfig, CliError> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: g.seed,
        fraction: g.fraction,
        output_dir: g.output_dir.clone(),
        exclude_bots: g.exclude_bots,
        reference_date: g.reference_date,
        k_max: g.k_max,
    });
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Run { replicate: Some(table) } => {
            run_replication(&cfg, &table)?;
        }
        Command::Run { replicate: None } => {
            let m = run_pipeline(&cfg)?;
            println!("wrote {} files to {} (config {})", m.outputs.len() + 1, cfg.output_dir.display(), &m.config_hash[..12]);
        }
        Command::Simulate { specs, count, noise_sd, initial_k } => {
            let r = simulate(&cfg, &SimulateOptions { specs, count, noise_sd, initial_k })?;
            println!(
                "{} individuals: direct labelling {:.2}%, pipeline labelling {:.2}%",
                r.individuals,
                r.direct_recovery * 100.0,
                r.pipeline_recovery * 100.0
            );
        }
        stage => {
            let name = match stage {
                Command::Fetch => "fetch",
                Command::Filter => "filter",
                Command::Metrics => "metrics",
                Command::Classify => "classify",
                Command::Cluster => "cluster",
                Command::Analyze => "analyze",
                Command::Assign => "assign",
                Command::Report => "report",
                Command::Simulate { .. } | Command::Run { .. } => unreachable!(),
            };
            if matches!(name, "fetch" | "filter" | "metrics" | "classify") {
                cfg.validate()?;
            } else {
                cfg.validate_settings()?;
            }
            run_stage(&cfg, name)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ErrorKind::Config.exit_code() as u8 } else { 0 });
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
