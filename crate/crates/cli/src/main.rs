//! `coupled`: experiment runner for coupled training.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coupled_core::Error as CoreError;
use serde_json::json;

use config::{Overrides, RunConfig, Which};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(_) | CoreError::OverlappingColumns { .. } | CoreError::NotPositiveDefinite => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "coupled", version, about = "Coupled training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run config, or a manifest.json from an earlier run.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Log-spaced grid: exponents START,END and point COUNT.
    #[arg(long, value_name = "START,END,COUNT", allow_hyphen_values = true)]
    lambda_grid: Option<String>,
    #[arg(long, value_name = "NAME[,NAME…]")]
    method: Option<String>,
    #[arg(long, value_name = "NAME[,NAME…]")]
    metric: Option<String>,
    #[arg(long, value_name = "INT")]
    folds: Option<usize>,
    /// Grouping column of the CSV; folds never split a group.
    #[arg(long, value_name = "COLUMN")]
    groups: Option<String>,
    /// Generator preset: linear_gaussian, controlled or logit_diag.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Training CSV; rows with an empty label cell are unlabeled.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Fully labeled held-out CSV with the same columns.
    #[arg(long, value_name = "PATH")]
    test: Option<PathBuf>,
    #[arg(long, value_name = "COLUMN")]
    label: Option<String>,
    /// Deployment feature columns.
    #[arg(long, value_name = "COL[,COL…]")]
    deploy: Option<String>,
    /// Privileged feature columns.
    #[arg(long, value_name = "COL[,COL…]")]
    privileged: Option<String>,
    /// Labels are binary.
    #[arg(long)]
    binary: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset, its held-out rows and its truth.
    GenData(Common),
    /// Error against a synthetic knob at the cross-validated λ.
    SynthSweep {
        #[arg(long, value_enum)]
        which: Option<Which>,
        #[command(flatten)]
        common: Common,
    },
    /// Held-out metrics along the λ grid.
    LambdaCurve(Common),
    /// Alternating forward selection with its per-iteration trace.
    AfsDemo {
        /// Number of iterations.
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Cross-validated choice of λ on the labeled rows.
    CvSelect(Common),
    /// Cross-validate, fit and evaluate on CSV data.
    RunCsv(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::SynthSweep { .. } => "synth-sweep",
            Command::LambdaCurve(_) => "lambda-curve",
            Command::AfsDemo { .. } => "afs-demo",
            Command::CvSelect(_) => "cv-select",
            Command::RunCsv(_) => "run-csv",
        }
    }

    fn overrides(&self) -> (Option<PathBuf>, Overrides) {
        let (c, which, k) = match self {
            Command::GenData(c) | Command::LambdaCurve(c) | Command::CvSelect(c) | Command::RunCsv(c) => (c, None, None),
            Command::SynthSweep { which, common } => (common, *which, None),
            Command::AfsDemo { k, common } => (common, None, *k),
        };
        let o = Overrides {
            seed: c.seed,
            out: c.out.clone(),
            lambda_grid: c.lambda_grid.clone(),
            methods: c.method.clone(),
            metrics: c.metric.clone(),
            folds: c.folds,
            groups: c.groups.clone(),
            preset: c.preset.clone(),
            which,
            k_max: k,
            sizes: [c.n, c.m, c.n_test],
            data: c.data.clone(),
            test: c.test.clone(),
            label: c.label.clone(),
            deploy: c.deploy.clone(),
            privileged: c.privileged.clone(),
            binary: c.binary,
        };
        (c.config.clone(), o)
    }
}

fn defaults_in_effect(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "standard_deviation": "population (divide by count); constant columns pass through",
        "standardization_fit_rows": "training file only",
        "linear_solver": "Cholesky of the joint normal equations, eigen pseudo-inverse when singular",
        "ridge": cfg.ridge,
        "intercepts_penalized": false,
        "two_stage_pseudo_label_weight": 1.0,
        "logistic": cfg.logistic,
        "cv_tie_rule": "smallest λ among fold-means within 1e-12 relative (1e-20 absolute) of the best",
        "cv_folds_keep_all_unlabeled_rows": true,
        "fold_scheme": "grouped when groups are given, stratified for binary labels, plain otherwise",
        "brier_clip": [1e-6, 1.0 - 1e-6],
        "zero_one_threshold": 0.5,
        "afs": cfg.afs,
        "afs_initial_g": "zero",
        "median_heuristic": "gamma = 1 / median pairwise squared distance on a capped subsample",
        "unlabeled_rows_missing_w": "rejected",
        "logit_diag_unlabeled_mean": "shift of the unlabeled pool's latent factor",
    })
}

fn run(cmd: &Command, stdout: &mut impl Write) -> Result<(), CliError> {
    let (config_path, overrides) = cmd.overrides();
    let mut cfg = match &config_path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&overrides)?;
    let dir = cfg.out.clone();
    std::fs::create_dir_all(&dir)?;
    let (summary, files) = match cmd {
        Command::GenData(_) => commands::gen_data(&cfg, &dir)?,
        Command::SynthSweep { .. } => commands::synth_sweep(&cfg, &dir)?,
        Command::LambdaCurve(_) => commands::lambda_curve(&cfg, &dir)?,
        Command::AfsDemo { .. } => commands::afs_demo(&cfg, &dir)?,
        Command::CvSelect(_) => commands::cv_select(&cfg, &dir, stdout)?,
        Command::RunCsv(_) => commands::run_csv(&cfg, &dir)?,
    };
    let manifest = json!({
        "manifest_version": 1,
        "subcommand": cmd.name(),
        "versions": {
            "coupled-cli": env!("CARGO_PKG_VERSION"),
        },
        "config": cfg,
        "seeds": cfg.seeds,
        "defaults": defaults_in_effect(&cfg),
        "outputs": files,
        "summary": summary,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command, &mut std::io::stdout()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("coupled {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
