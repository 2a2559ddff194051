//! The `gamenet` command-line driver.
//!
//! Every subcommand reads the files its config names, writes its outputs
//! and a run manifest, and maps failures to a distinct exit code.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

pub use commands::{read_predictions, PredictionRow};
pub use config::{CtdParams, Paths, RunConfig, ScalerKinds, SplitParams, Workspace};
pub use manifest::{hash_paths, sha256_file, FileHash, RunManifest, Timing};

use crate::error::{Error, Result};

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING_INPUT: i32 = 3;
pub const EXIT_DIMENSION: i32 = 4;
pub const EXIT_INVALID_DATA: i32 = 5;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::MissingInput { .. } => EXIT_MISSING_INPUT,
        Error::Dimension { .. } => EXIT_DIMENSION,
        Error::InvalidInput(_) | Error::State(_) | Error::NonFinite(_) | Error::Csv(_) | Error::Json(_) => EXIT_INVALID_DATA,
        Error::Io { .. } => EXIT_OTHER,
    }
}

#[derive(Debug, Parser)]
#[command(name = "gamenet", version, about = "Multimodal popularity prediction pipeline")]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, env = "GAMENET_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the experiment seed.
    #[arg(long, env = "GAMENET_SEED", global = true)]
    pub seed: Option<u64>,
    /// Root that config paths are resolved against.
    #[arg(long, env = "GAMENET_WORKSPACE", global = true)]
    pub workspace: Option<PathBuf>,
    /// Worker threads for parallel training.
    #[arg(long, env = "GAMENET_THREADS", global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset.
    Synth,
    /// Filter metadata and normalize lyrics.
    Clean,
    /// Stratified train/test assignment.
    Split,
    /// Trajectory features from the listening log.
    CtdExtract,
    /// Train the per-group audio autoencoders.
    AeTrain,
    /// Encode raw audio descriptors into the compressed embedding.
    Compress,
    /// Train the three modality experts.
    TrainPhase1,
    /// Train the gate and fine-tune the experts.
    TrainPhase2,
    /// Predict the evaluation split.
    Predict,
    /// Metrics and residual analysis.
    Evaluate {
        /// Score this predictions file instead of running the model.
        #[arg(long)]
        predictions: Option<String>,
    },
    /// Mean fusion weights, overall and per decade.
    GateReport,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Clean => "clean",
            Command::Split => "split",
            Command::CtdExtract => "ctd-extract",
            Command::AeTrain => "ae-train",
            Command::Compress => "compress",
            Command::TrainPhase1 => "train-phase1",
            Command::TrainPhase2 => "train-phase2",
            Command::Predict => "predict",
            Command::Evaluate { .. } => "evaluate",
            Command::GateReport => "gate-report",
        }
    }
}

/// Runs one parsed invocation and returns the manifest it wrote.
pub fn execute(cli: &Cli) -> Result<RunManifest> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(config_path).map_err(|e| match e {
        Error::MissingInput { .. } | Error::Io { .. } => Error::Config(e.to_string()),
        other => other,
    })?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let ws = Workspace {
        root: cli.workspace.clone().unwrap_or_else(|| PathBuf::from(".")),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let start = Instant::now();
    let outcome = pool.install(|| match &cli.command {
        Command::Synth => commands::synth(&cfg, &ws),
        Command::Clean => commands::clean_cmd(&cfg, &ws),
        Command::Split => commands::split_cmd(&cfg, &ws),
        Command::CtdExtract => commands::ctd_extract(&cfg, &ws),
        Command::AeTrain => commands::ae_train(&cfg, &ws),
        Command::Compress => commands::compress(&cfg, &ws),
        Command::TrainPhase1 => commands::train_phase1(&cfg, &ws),
        Command::TrainPhase2 => commands::train_phase2(&cfg, &ws),
        Command::Predict => commands::predict(&cfg, &ws),
        Command::Evaluate { predictions } => commands::evaluate(&cfg, &ws, predictions.as_deref()),
        Command::GateReport => commands::gate_report_cmd(&cfg, &ws),
    })?;
    let wall_seconds = start.elapsed().as_secs_f64();

    let name = cli.command.name();
    let manifest = RunManifest {
        subcommand: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: cfg.sha256()?,
        seed: cfg.seed,
        inputs: hash_paths(&ws, &outcome.inputs)?,
        outputs: hash_paths(&ws, &outcome.outputs)?,
        summary: outcome.summary,
    };
    let dir = ws.path(&cfg.paths.manifests);
    manifest::write_json(&dir.join(format!("{name}.json")), &manifest)?;
    manifest::write_json(
        &dir.join(format!("{name}.timing.json")),
        &Timing {
            subcommand: name.to_string(),
            wall_seconds,
        },
    )?;
    Ok(manifest)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Failures print one diagnostic line to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(m) => {
            println!("{}: ok ({} outputs)", m.subcommand, m.outputs.len());
            0
        }
        Err(e) => {
            eprintln!("gamenet {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}
