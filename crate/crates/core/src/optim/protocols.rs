use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::model::{Evaluation, MemoryProblem};

use super::direction::{update_direction, Direction, OptimizerState};
use super::kind::OptimizerKind;

/// Largest step size tried before a target is declared unreachable.
pub const ETA_LIMIT: f64 = 1e9;
/// Relative bracket width at which bisection stops.
pub const BISECTION_TOLERANCE: f64 = 1e-10;
/// Points per decade of the log-spaced η grids.
pub const GRID_POINTS_PER_DECADE: usize = 64;

/// `w0 − eta · update_direction(kind, ∇L(w0))`.
pub fn one_step(problem: &MemoryProblem, w0: &Matrix, kind: &OptimizerKind, eta: f64) -> Result<Matrix> {
    check_eta(eta)?;
    let g = problem.gradient(w0)?;
    let d = update_direction(kind, &g)?;
    w0.add_scaled(-eta, &d.matrix)
}

fn check_eta(eta: f64) -> Result<()> {
    if eta >= 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("step size {eta} must be finite and nonnegative")))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("eps = {eps} must lie in (0, 1)")))
    }
}

/// The one-step ray `η ↦ W₀ − η·D`, evaluated through its logits
/// `Z(η) = Z(W₀) − η·Z(D)` at `O(K²)` per point.
pub struct Ray<'a> {
    problem: &'a MemoryProblem,
    base: Matrix,
    slope: Matrix,
    direction: Direction,
}

impl<'a> Ray<'a> {
    pub fn new(problem: &'a MemoryProblem, w0: &Matrix, kind: &OptimizerKind) -> Result<Self> {
        let g = problem.gradient(w0)?;
        let direction = update_direction(kind, &g)?;
        Self::from_direction(problem, w0, direction)
    }

    pub fn from_direction(problem: &'a MemoryProblem, w0: &Matrix, direction: Direction) -> Result<Self> {
        Ok(Self {
            problem,
            base: problem.logits(w0)?,
            slope: problem.logits(&direction.matrix)?,
            direction,
        })
    }

    pub fn direction(&self) -> &Direction {
        &self.direction
    }

    pub fn evaluate(&self, eta: f64) -> Evaluation {
        let z = self
            .base
            .add_scaled(-eta, &self.slope)
            .expect("logit shapes agree");
        self.problem.evaluate_logits(&z)
    }

    fn feasible(&self, eta: f64, target: f64) -> bool {
        self.evaluate(eta).max_prob >= target
    }
}

/// Outcome of the minimal step-size search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaSearch {
    /// Smallest η found with `max_k` correct prob `≥ 1 − eps`.
    pub eta: f64,
    /// False when the guard grid found feasible points below, or infeasible
    /// points above, the bisection result.
    pub feasible_set_is_interval: bool,
}

/// Smallest η for which one step brings some fact to correct probability `1 − eps`.
pub fn min_eta_for_target(problem: &MemoryProblem, w0: &Matrix, kind: &OptimizerKind, eps: f64) -> Result<f64> {
    Ok(search_min_eta(&Ray::new(problem, w0, kind)?, eps)?.eta)
}

/// Exponential bracketing from η = 1, bisection to [`BISECTION_TOLERANCE`],
/// then a guard scan two decades below and one above the result.
pub fn search_min_eta(ray: &Ray<'_>, eps: f64) -> Result<EtaSearch> {
    check_eps(eps)?;
    let target = 1.0 - eps;
    if ray.feasible(0.0, target) {
        return Ok(EtaSearch {
            eta: 0.0,
            feasible_set_is_interval: true,
        });
    }
    let (mut lo, mut hi);
    if ray.feasible(1.0, target) {
        hi = 1.0;
        lo = 0.5;
        while ray.feasible(lo, target) {
            hi = lo;
            lo *= 0.5;
            if lo < f64::MIN_POSITIVE {
                lo = 0.0;
                break;
            }
        }
    } else {
        lo = 1.0;
        hi = 2.0;
        while !ray.feasible(hi, target) {
            lo = hi;
            hi *= 2.0;
            if hi > ETA_LIMIT {
                return Err(Error::TargetUnreachable {
                    target,
                    limit: ETA_LIMIT,
                });
            }
        }
    }
    let mut eta = bisect(ray, target, lo, hi);

    let step = 10f64.powf(1.0 / GRID_POINTS_PER_DECADE as f64);
    let mut interval = true;
    let below = 2 * GRID_POINTS_PER_DECADE;
    let mut earliest: Option<(f64, f64)> = None;
    let mut prev = 0.0;
    for i in 0..below {
        let g = eta * step.powi(i as i32 - below as i32);
        if ray.feasible(g, target) {
            earliest = Some((prev, g));
            break;
        }
        prev = g;
    }
    if let Some((a, b)) = earliest {
        interval = false;
        eta = bisect(ray, target, a, b);
    }
    for i in 1..=GRID_POINTS_PER_DECADE {
        if !ray.feasible(eta * step.powi(i as i32), target) {
            interval = false;
            break;
        }
    }
    Ok(EtaSearch {
        eta,
        feasible_set_is_interval: interval,
    })
}

/// Invariant: `lo` infeasible, `hi` feasible.
fn bisect(ray: &Ray<'_>, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > BISECTION_TOLERANCE * hi {
        let mid = 0.5 * (lo + hi);
        if ray.feasible(mid, target) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// One-step ρ estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    pub eta_star: f64,
    /// Smallest correct probability at `eta_star`.
    pub rho_at_eta_star: f64,
    /// Infimum of the smallest correct probability over the feasible grid
    /// points in `[η*, 10^decades·η*]`.
    pub rho_grid: f64,
    pub feasible_set_is_interval: bool,
}

/// Worst-fact probability subject to the best fact reaching `1 − eps`.
pub fn rho_one_step(
    problem: &MemoryProblem,
    w0: &Matrix,
    kind: &OptimizerKind,
    eps: f64,
    eta_grid_decades: usize,
) -> Result<RhoReport> {
    rho_on_ray(&Ray::new(problem, w0, kind)?, eps, eta_grid_decades)
}

pub fn rho_on_ray(ray: &Ray<'_>, eps: f64, eta_grid_decades: usize) -> Result<RhoReport> {
    if eta_grid_decades == 0 {
        return Err(invalid("eta_grid_decades must be positive"));
    }
    let search = search_min_eta(ray, eps)?;
    let target = 1.0 - eps;
    let at_star = ray.evaluate(search.eta);
    let mut rho = at_star.min_prob;
    if search.eta > 0.0 {
        let step = 10f64.powf(1.0 / GRID_POINTS_PER_DECADE as f64);
        for i in 1..=GRID_POINTS_PER_DECADE * eta_grid_decades {
            let e = ray.evaluate(search.eta * step.powi(i as i32));
            if e.max_prob >= target {
                rho = rho.min(e.min_prob);
            }
        }
    }
    Ok(RhoReport {
        eta_star: search.eta,
        rho_at_eta_star: at_star.min_prob,
        rho_grid: rho,
        feasible_set_is_interval: search.feasible_set_is_interval,
    })
}

/// Step sizes `η_1, η_2, …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub etas: Vec<f64>,
}

impl Schedule {
    /// Nonempty, finite and nonnegative (zero steps leave the state unchanged).
    pub fn new(etas: Vec<f64>) -> Result<Self> {
        if etas.is_empty() {
            return Err(invalid("schedule is empty"));
        }
        for (i, &eta) in etas.iter().enumerate() {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(invalid(format!("schedule entry {i} = {eta} must be finite and nonnegative")));
            }
        }
        Ok(Self { etas })
    }

    pub fn constant(eta: f64, steps: usize) -> Result<Self> {
        Self::new(vec![eta; steps])
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }
}

/// Measurements after `step` updates; step 0 is the initial point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    /// Step size of the update that produced this point.
    pub eta: Option<f64>,
    pub loss: f64,
    pub delta: f64,
    pub min_prob: f64,
    pub max_prob: f64,
    /// Singular values of the update direction applied at this step.
    pub update_spectrum: Option<Vec<f64>>,
    /// Muon saw a zero matrix at this step.
    pub degenerate: bool,
}

impl TrajectoryRecord {
    fn new(step: usize, eta: Option<f64>, eval: &Evaluation) -> Self {
        Self {
            step,
            eta,
            loss: eval.loss,
            delta: eval.delta(),
            min_prob: eval.min_prob,
            max_prob: eval.max_prob,
            update_spectrum: None,
            degenerate: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MultiStepOptions {
    pub record_update_spectrum: bool,
    /// Keep every iterate `W_0 … W_T`.
    pub keep_weights: bool,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    /// Iterates, when requested.
    pub weights: Vec<Matrix>,
}

/// Iterates `W_t = W_{t−1} − η_t·D_t` and records every point including `W_0`.
pub fn multi_step(
    problem: &MemoryProblem,
    w0: &Matrix,
    kind: &OptimizerKind,
    schedule: &Schedule,
    options: MultiStepOptions,
) -> Result<Trajectory> {
    let mut state = OptimizerState::new(*kind)?;
    let mut w = w0.clone();
    let mut records = Vec::with_capacity(schedule.len() + 1);
    let mut weights = Vec::new();
    let (mut grad, eval) = problem.gradient_and_evaluation(&w)?;
    check_state(&eval, 0)?;
    records.push(TrajectoryRecord::new(0, None, &eval));
    if options.keep_weights {
        weights.push(w.clone());
    }
    for (i, &eta) in schedule.etas.iter().enumerate() {
        let step = i + 1;
        let dir = state
            .next_direction(&grad)
            .map_err(|_| Error::NonFiniteState { step })?;
        w = w.add_scaled(-eta, &dir.matrix)?;
        if !w.is_finite() {
            return Err(Error::NonFiniteState { step });
        }
        let (g, eval) = problem.gradient_and_evaluation(&w)?;
        check_state(&eval, step)?;
        let mut rec = TrajectoryRecord::new(step, Some(eta), &eval);
        rec.degenerate = dir.degenerate;
        if options.record_update_spectrum {
            rec.update_spectrum = Some(dir.spectrum()?);
        }
        records.push(rec);
        if options.keep_weights {
            weights.push(w.clone());
        }
        grad = g;
    }
    Ok(Trajectory { records, weights })
}

fn check_state(eval: &Evaluation, step: usize) -> Result<()> {
    if eval.loss.is_finite() && eval.correct.iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { step })
    }
}

/// Infimum of `min_prob` over records whose `max_prob ≥ 1 − eps`.
pub fn rho_trajectory(records: &[TrajectoryRecord], eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let target = 1.0 - eps;
    records
        .iter()
        .filter(|r| r.max_prob >= target)
        .map(|r| r.min_prob)
        .reduce(f64::min)
        .ok_or(Error::ConditionNeverMet { target })
}

/// First record whose `max_prob` reaches `1 − eps`.
pub fn first_reaching(records: &[TrajectoryRecord], eps: f64) -> Option<&TrajectoryRecord> {
    records.iter().find(|r| r.max_prob >= 1.0 - eps)
}
