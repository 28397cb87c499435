use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::distributions::two_class_distribution;
use crate::embeddings::{EmbeddingKind, EmbeddingPair};
use crate::error::Error;
use crate::linalg::Matrix;
use crate::model::{Evaluation, MemoryProblem};
use crate::optim::{first_reaching, multi_step, rho_on_ray, rho_trajectory, MultiStepOptions, OptimizerKind, Ray};
use crate::oracle::{run_suite, SuiteConfig, SuiteReport};
use crate::spectra::{matrix_metrics, spectrum_metrics, SpectrumMetrics, DEFAULT_TOP_K};

use super::config::{Experiment, ExperimentConfig};
use super::rows::{sort_rows, write_csv, write_json, ResultRow};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Compute(Error),
    #[error("failed checks: {}", .0.join(", "))]
    Check(Vec<String>),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    /// 1 for config errors, 2 for failed checks or computations, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Compute(_) | RunError::Check(_) => 2,
            RunError::Io { .. } => 3,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Compute(e)
    }
}

fn io_error(path: &Path, source: io::Error) -> RunError {
    RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    /// Present for the oracle experiment.
    pub report: Option<SuiteReport>,
}

impl RunOutput {
    /// Failed oracle checks, if any.
    pub fn check(&self) -> Result<(), RunError> {
        match &self.report {
            Some(r) if !r.passed => Err(RunError::Check(r.failed().map(|c| c.name.clone()).collect())),
            _ => Ok(()),
        }
    }

    pub fn summary(&self) -> String {
        match &self.report {
            Some(r) => {
                let ok = r.checks.iter().filter(|c| c.passed).count();
                format!("{ok}/{} checks passed", r.checks.len())
            }
            None => format!("{} rows", self.rows.len()),
        }
    }

    /// CSV, JSON rows or the oracle report as JSON.
    pub fn render(&self, json: bool) -> Vec<u8> {
        let mut buf = Vec::new();
        match &self.report {
            Some(r) => {
                serde_json::to_writer_pretty(&mut buf, r).expect("report serializes");
                buf.push(b'\n');
            }
            None if json => {
                write_json(&self.rows, &mut buf).expect("rows serialize");
                buf.push(b'\n');
            }
            None => write_csv(&self.rows, &mut buf).expect("in-memory write"),
        }
        buf
    }
}

/// Validates `cfg` and runs it. Rows come back sorted.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    cfg.validate().map_err(|e| RunError::Config(e.to_string()))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| RunError::Config(format!("workers: {e}")))?;
    pool.install(|| match cfg.experiment {
        Experiment::Oracle => run_oracle(cfg),
        Experiment::Spectra => run_spectra(cfg),
        Experiment::Onestep | Experiment::Multistep => run_cells(cfg),
    })
}

/// [`run`], then writes the output to `cfg.out` (stdout when absent).
/// A failed oracle report is written before its error is returned.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let output = run(cfg)?;
    match &cfg.out {
        Some(path) => {
            let json = path.extension().is_some_and(|e| e == "json");
            fs::write(path, output.render(json)).map_err(|e| io_error(path, e))?;
        }
        None => io::stdout()
            .lock()
            .write_all(&output.render(false))
            .map_err(|e| io_error(Path::new("<stdout>"), e))?,
    }
    output.check()?;
    Ok(output)
}

fn run_oracle(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let suite = SuiteConfig {
        k: cfg.k,
        l: cfg.l,
        alpha: cfg.alpha,
        eps: cfg.eps,
        structure_steps: cfg.steps,
        structure_eta: cfg.eta.unwrap_or(SuiteConfig::default().structure_eta),
        seed: cfg.seeds[0],
    };
    Ok(RunOutput {
        rows: Vec::new(),
        report: Some(run_suite(&suite)?),
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixDump {
    One(Matrix),
    Many(Vec<Matrix>),
}

/// Reads a matrix dump: one `{rows, cols, values}` object or an array of them.
pub fn read_matrices(path: &Path) -> Result<Vec<Matrix>, RunError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    match serde_json::from_str(&text) {
        Ok(MatrixDump::One(m)) => Ok(vec![m]),
        Ok(MatrixDump::Many(ms)) => Ok(ms),
        Err(e) => Err(RunError::Config(format!("input: {}: {e}", path.display()))),
    }
}

fn run_spectra(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let path = cfg.input.as_deref().expect("validated");
    let matrices = read_matrices(path)?;
    let rows = matrices
        .par_iter()
        .enumerate()
        .map(|(step, m)| {
            let mut row = ResultRow {
                experiment: "spectra".into(),
                step,
                ..Default::default()
            };
            if let Some(metrics) = optional_metrics(matrix_metrics(m))? {
                row.set_metrics(&metrics);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    Ok(RunOutput { rows, report: None })
}

/// Zero matrices and updates have no spectrum; their metric cells stay empty.
fn optional_metrics(m: crate::Result<SpectrumMetrics>) -> crate::Result<Option<SpectrumMetrics>> {
    match m {
        Ok(m) => Ok(Some(m)),
        Err(Error::EmptySpectrum) => Ok(None),
        Err(e) => Err(e),
    }
}

fn run_cells(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let mut cells = Vec::new();
    for &seed in &cfg.seeds {
        for &emb in &cfg.embeddings {
            for opt in &cfg.optimizers {
                cells.push((seed, emb, *opt));
            }
        }
    }
    let nested = cells
        .par_iter()
        .map(|&(seed, emb, opt)| match cfg.experiment {
            Experiment::Onestep => onestep_cell(cfg, seed, emb, &opt),
            _ => multistep_cell(cfg, seed, emb, &opt),
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let mut rows: Vec<ResultRow> = nested.into_iter().flatten().collect();
    sort_rows(&mut rows);
    Ok(RunOutput { rows, report: None })
}

fn problem(cfg: &ExperimentConfig, emb: EmbeddingKind, seed: u64) -> crate::Result<MemoryProblem> {
    MemoryProblem::new(
        EmbeddingPair::build(emb, cfg.k, seed)?,
        two_class_distribution(cfg.k, cfg.l, cfg.alpha)?,
    )
}

fn measured(experiment: String, seed: u64, step: usize, eta: Option<f64>, e: &Evaluation) -> ResultRow {
    ResultRow {
        experiment,
        seed,
        step,
        eta,
        loss: Some(e.loss),
        delta: Some(e.delta()),
        min_prob: Some(e.min_prob),
        max_prob: Some(e.max_prob),
        ..Default::default()
    }
}

/// Rows: step 0 at `W₀`; step 1 at η* (carrying ρ) and at each swept η.
fn onestep_cell(
    cfg: &ExperimentConfig,
    seed: u64,
    emb: EmbeddingKind,
    opt: &OptimizerKind,
) -> crate::Result<Vec<ResultRow>> {
    let p = problem(cfg, emb, seed)?;
    let (rows, cols) = p.weight_shape();
    let ray = Ray::new(&p, &Matrix::zeros(rows, cols), opt)?;
    let id = format!("onestep/{}/{}", opt.name(), emb.name());
    let metrics = if cfg.metrics {
        optional_metrics(ray.direction().spectrum().and_then(|s| spectrum_metrics(&s, &DEFAULT_TOP_K)))?
    } else {
        None
    };

    let mut out = vec![measured(id.clone(), seed, 0, None, &ray.evaluate(0.0))];
    match rho_on_ray(&ray, cfg.eps, cfg.decades) {
        Ok(report) => {
            let mut row = measured(id.clone(), seed, 1, Some(report.eta_star), &ray.evaluate(report.eta_star));
            row.rho = Some(report.rho_at_eta_star.min(report.rho_grid));
            out.push(row);
        }
        Err(Error::TargetUnreachable { .. } | Error::ConditionNeverMet { .. }) => {}
        Err(e) => return Err(e),
    }
    for &eta in cfg.schedule.iter().flatten() {
        out.push(measured(id.clone(), seed, 1, Some(eta), &ray.evaluate(eta)));
    }
    if let Some(m) = &metrics {
        for row in out.iter_mut().filter(|r| r.step == 1) {
            row.set_metrics(m);
        }
    }
    Ok(out)
}

/// One row per iterate; ρ of the trajectory sits on the first row reaching `1 − ε`.
fn multistep_cell(
    cfg: &ExperimentConfig,
    seed: u64,
    emb: EmbeddingKind,
    opt: &OptimizerKind,
) -> crate::Result<Vec<ResultRow>> {
    let p = problem(cfg, emb, seed)?;
    let (rows, cols) = p.weight_shape();
    let schedule = cfg.schedule_for(opt)?;
    let options = MultiStepOptions {
        record_update_spectrum: cfg.metrics,
        keep_weights: false,
    };
    let traj = multi_step(&p, &Matrix::zeros(rows, cols), opt, &schedule, options)?;
    let id = format!("multistep/{}/{}", opt.name(), emb.name());
    let rho = rho_trajectory(&traj.records, cfg.eps).ok();
    let first = first_reaching(&traj.records, cfg.eps).map(|r| r.step);
    traj.records
        .iter()
        .map(|r| {
            let mut row = ResultRow {
                experiment: id.clone(),
                seed,
                step: r.step,
                eta: r.eta,
                loss: Some(r.loss),
                delta: Some(r.delta),
                min_prob: Some(r.min_prob),
                max_prob: Some(r.max_prob),
                ..Default::default()
            };
            if Some(r.step) == first {
                row.rho = rho;
            }
            if let Some(s) = &r.update_spectrum {
                if let Some(m) = optional_metrics(spectrum_metrics(s, &DEFAULT_TOP_K))? {
                    row.set_metrics(&m);
                }
            }
            Ok(row)
        })
        .collect()
}
