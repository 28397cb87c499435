use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use memlab_core::embeddings::EmbeddingKind;
use memlab_core::harness::{execute, Experiment, ExperimentConfig, RunError, PRESETS};
use memlab_core::optim::OptimizerKind;

#[derive(Parser)]
#[command(name = "memlab", version, about = "GD, sign descent and Muon on a one-layer associative memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One update from zero: η* search, ρ and optional η sweep.
    Onestep(Flags),
    /// Trajectories under a step-size schedule.
    Multistep(Flags),
    /// Closed-form cross-checks; writes a JSON report.
    Oracle(Flags),
    /// Spectral metrics of a matrix dump.
    Spectra(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON config; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a named preset instead of the defaults.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Comma-separated optimizer names.
    #[arg(long, value_delimiter = ',')]
    optimizer: Option<Vec<OptimizerKind>>,
    /// Comma-separated embedding kinds.
    #[arg(long, value_delimiter = ',')]
    embeddings: Option<Vec<EmbeddingKind>>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    steps: Option<usize>,
    /// Step size for every optimizer, replacing the per-optimizer defaults.
    #[arg(long)]
    eta: Option<f64>,
    /// Comma-separated explicit step sizes.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<f64>>,
    #[arg(long)]
    decades: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Skip per-update spectral metrics.
    #[arg(long)]
    no_metrics: bool,
    /// Matrix dump for `spectra`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file; `.json` selects JSON. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(experiment: Experiment, f: Flags) -> Result<ExperimentConfig, RunError> {
    let config_err = |e: memlab_core::Error| RunError::Config(e.to_string());
    let mut cfg = match &f.preset {
        Some(name) => ExperimentConfig::preset(name).map_err(config_err)?,
        None if experiment == Experiment::Oracle => ExperimentConfig::preset("oracle").map_err(config_err)?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &f.config {
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        cfg = cfg.overlay_json(&text).map_err(config_err)?;
    }
    cfg.experiment = experiment;
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = f.$field {
                cfg.$field = v;
            }
        )*};
    }
    set!(k, l, alpha, eps, embeddings, seeds, steps, decades);
    if let Some(v) = f.optimizer {
        cfg.optimizers = v;
    }
    if let Some(eta) = f.eta {
        cfg.eta = Some(eta);
        cfg.eta_by_optimizer.clear();
    }
    if f.schedule.is_some() {
        cfg.schedule = f.schedule;
    }
    if f.workers.is_some() {
        cfg.workers = f.workers;
    }
    if f.no_metrics {
        cfg.metrics = false;
    }
    if f.input.is_some() {
        cfg.input = f.input;
    }
    if f.out.is_some() {
        cfg.out = f.out;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are config errors; help and version are not errors.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (experiment, flags) = match cli.command {
        Command::Onestep(f) => (Experiment::Onestep, f),
        Command::Multistep(f) => (Experiment::Multistep, f),
        Command::Oracle(f) => (Experiment::Oracle, f),
        Command::Spectra(f) => (Experiment::Spectra, f),
    };
    let result = build_config(experiment, flags).and_then(|cfg| execute(&cfg));
    match result {
        Ok(out) => {
            eprintln!("memlab {experiment}: {}", out.summary());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("memlab {experiment}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
