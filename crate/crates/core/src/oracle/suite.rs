//! Cross-checks of the closed forms against the numerical paths.

use serde::{Deserialize, Serialize};

use crate::embeddings::{EmbeddingKind, EmbeddingPair};
use crate::error::Result;
use crate::linalg::{
    newton_schulz, orthogonal_factor_exact, singular_spectrum, svd, Matrix, DEFAULT_NS_ITERATIONS,
    DEFAULT_RANK_TOLERANCE,
};
use crate::model::MemoryProblem;
use crate::optim::{
    min_eta_for_target, multi_step, one_step, sign, update_direction, MultiStepOptions, OptimizerKind,
    Schedule,
};
use crate::rng::SeededRng;

use super::adam::{
    adam_adversarial, adam_singular_ratio, coupled_sign_pattern, identity_sign_pattern, singular_values_3x3,
    PRINTED_ROTATED_B, PRINTED_ROTATED_SUM,
};
use super::block_svd::{block_constant_matrix, svd_block_constant, svd_simp, svd_simp_matrix};
use super::closed_form::{gd_eta, gd_min_prob, gradient_at_zero, muon_min_eta, muon_update_closed_form};
use super::params::TwoClassParams;
use super::structure::multi_step_structure_check;

/// One named comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
            detail: String::new(),
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: ok,
            value: if ok { 0.0 } else { 1.0 },
            threshold: 0.0,
            detail: detail.into(),
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub k: usize,
    pub l: usize,
    pub alpha: f64,
    pub eps: f64,
    pub structure_steps: usize,
    pub structure_eta: f64,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            k: 99,
            l: 21,
            alpha: 0.8,
            eps: 0.1,
            structure_steps: 20,
            structure_eta: 0.5,
            seed: 0,
        }
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn problem(params: &TwoClassParams, emb: EmbeddingPair) -> Result<MemoryProblem> {
    MemoryProblem::new(emb, params.distribution())
}

/// Embedding kinds usable at `k` (the coupled construction needs `k mod 3 = 0`).
fn kinds_for(k: usize) -> Vec<EmbeddingKind> {
    EmbeddingKind::ALL
        .into_iter()
        .filter(|&kind| kind != EmbeddingKind::CoupledRotation || k.is_multiple_of(3))
        .collect()
}

/// `−sign(∇L(W₀))` on the given embeddings.
pub fn sign_direction_at_zero(kind: EmbeddingKind, k: usize, l: usize, alpha: f64) -> Result<Matrix> {
    let params = TwoClassParams::new(k, l, alpha)?;
    let prob = problem(&params, EmbeddingPair::build(kind, k, 0)?)?;
    Ok(sign(&prob.gradient(&Matrix::zeros(k, k))?).scale(-1.0))
}

/// Whether `−sign(∇L(W₀))` equals the predicted pattern exactly.
pub fn sign_pattern_holds(kind: EmbeddingKind, k: usize, l: usize, alpha: f64) -> Result<bool> {
    let expected = match kind {
        EmbeddingKind::Identity => identity_sign_pattern(k),
        EmbeddingKind::CoupledRotation => coupled_sign_pattern(k)?,
        EmbeddingKind::RandomOrthonormal => return Ok(false),
    };
    Ok(sign_direction_at_zero(kind, k, l, alpha)? == expected)
}

/// Head size used by the threshold scan: `round(βK)`, rounded to a multiple
/// of three for the coupled construction.
pub fn scan_head_size(kind: EmbeddingKind, k: usize, beta: f64) -> usize {
    let step = if kind == EmbeddingKind::CoupledRotation { 3 } else { 1 };
    let l = ((beta * k as f64 / step as f64).round() as usize).max(1) * step;
    l.min(k - step)
}

/// Smallest `K ≤ k_max` from which the sign pattern holds for every scanned
/// size up to `k_max`.
pub fn sign_pattern_threshold(kind: EmbeddingKind, alpha: f64, beta: f64, k_max: usize) -> Result<Option<usize>> {
    let (start, step) = match kind {
        EmbeddingKind::Identity => (2, 1),
        EmbeddingKind::CoupledRotation => (6, 3),
        EmbeddingKind::RandomOrthonormal => return Ok(None),
    };
    let mut threshold = None;
    let mut k = start;
    while k <= k_max {
        let l = scan_head_size(kind, k, beta);
        if sign_pattern_holds(kind, k, l, alpha)? {
            threshold.get_or_insert(k);
        } else {
            threshold = None;
        }
        k += step;
    }
    Ok(threshold)
}

/// Runs every closed-form cross-check.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let params = TwoClassParams::new(cfg.k, cfg.l, cfg.alpha)?;
    let k = cfg.k;
    let w0 = Matrix::zeros(k, k);
    let mut checks = Vec::new();

    for kind in kinds_for(k) {
        let emb = EmbeddingPair::build(kind, k, cfg.seed)?;
        let prob = problem(&params, emb.clone())?;
        let numeric = prob.gradient(&w0)?;
        let closed = gradient_at_zero(&params, &emb)?;
        checks.push(Check::at_most(format!("gradient_at_zero/{kind}"), numeric.max_abs_diff(&closed), 1e-12));

        let dir = update_direction(&OptimizerKind::muon_exact(), &numeric)?;
        let closed = muon_update_closed_form(&params, &emb)?;
        let rel = dir.matrix.frobenius_distance(&closed) / closed.frobenius_norm();
        checks.push(Check::at_most(format!("muon_update_closed_form/{kind}"), rel, 1e-8));
    }

    let ident = problem(&params, EmbeddingPair::build(EmbeddingKind::Identity, k, 0)?)?;
    let eta_num = min_eta_for_target(&ident, &w0, &OptimizerKind::Gd, cfg.eps)?;
    let eta_closed = gd_eta(&params, cfg.eps)?;
    checks.push(
        Check::at_most("gd_eta", relative(eta_num, eta_closed), 1e-6)
            .with_detail(format!("bisection {eta_num:.10}, closed form {eta_closed:.10}")),
    );
    let w = one_step(&ident, &w0, &OptimizerKind::Gd, eta_closed)?;
    let measured = ident.evaluate(&w)?.min_prob;
    checks.push(Check::at_most(
        "gd_min_prob",
        relative(measured, gd_min_prob(&params, cfg.eps)?),
        1e-6,
    ));
    let eta_num = min_eta_for_target(&ident, &w0, &OptimizerKind::muon_exact(), cfg.eps)?;
    checks.push(Check::at_most(
        "muon_min_eta",
        relative(eta_num, muon_min_eta(&params, cfg.eps)?),
        1e-6,
    ));

    let simp = svd_simp(2.0, 1.0, 2, 4)?;
    let numeric = svd(&svd_simp_matrix(2.0, 1.0, 2, 4), DEFAULT_RANK_TOLERANCE)?;
    let mut err = (numeric.rank() as f64 - 3.0).abs();
    for (x, y) in numeric.s.iter().zip(simp.sorted_values()) {
        err = err.max((x - y).abs());
    }
    checks.push(Check::at_most("svd_simp/a2_b1_k4_l2", err, 1e-9));

    let mut rng = SeededRng::new(cfg.seed);
    let (mut simp_err, mut block_err) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let kk = 3 + (rng.uniform(0.0, 58.0) as usize);
        let ll = 1 + (rng.uniform(0.0, (kk - 1) as f64) as usize);
        let a = rng.uniform(0.1, 3.0);
        let b = rng.uniform(0.1, 3.0);
        let c: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let s = singular_spectrum(&svd_simp_matrix(a, b, ll, kk))?;
        for (x, y) in s.iter().zip(svd_simp(a, b, ll, kk)?.sorted_values()) {
            simp_err = simp_err.max((x - y).abs());
        }
        let s = singular_spectrum(&block_constant_matrix(a, b, c[0], c[1], c[2], c[3], ll, kk))?;
        let closed = svd_block_constant(a, b, c[0], c[1], c[2], c[3], ll, kk)?;
        for (x, y) in s.iter().zip(closed.sorted_values()) {
            block_err = block_err.max((x - y).abs());
        }
    }
    checks.push(Check::at_most("svd_simp/random", simp_err, 1e-9));
    checks.push(Check::at_most("svd_block_constant/random", block_err, 1e-9));

    let adv = adam_adversarial();
    let mut printed_err = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            printed_err = printed_err
                .max((adv.rotated_sum[(i, j)] - PRINTED_ROTATED_SUM[i][j]).abs())
                .max((adv.rotated_b[(i, j)] - PRINTED_ROTATED_B[i][j]).abs());
        }
    }
    checks.push(Check::at_most("adam_rotated_products", printed_err, 1e-6));
    checks.push(Check::at_most("adam_singular_ratio", adam_singular_ratio(), 0.25));
    let numeric = svd(&adv.a_mat, DEFAULT_RANK_TOLERANCE)?.s;
    let closed = singular_values_3x3(&adv.a_mat);
    let err = numeric.iter().zip(closed).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    checks.push(Check::at_most("adam_singular_values_3x3", err, 1e-10));

    checks.push(Check::holds(
        "sign_pattern/identity",
        sign_pattern_holds(EmbeddingKind::Identity, k, cfg.l, cfg.alpha)?,
        "-sign(grad) = 2I - J",
    ));
    if k.is_multiple_of(3) && cfg.l.is_multiple_of(3) && k >= 21 {
        checks.push(Check::holds(
            "sign_pattern/coupled_rotation",
            sign_pattern_holds(EmbeddingKind::CoupledRotation, k, cfg.l, cfg.alpha)?,
            "-sign(grad) = I (x) A + J (x) B",
        ));
    }

    if k.is_multiple_of(3) && cfg.l >= 2 && k - cfg.l >= 2 {
        let emb = EmbeddingPair::build(EmbeddingKind::CoupledRotation, k, 0)?;
        let prob = problem(&params, emb.clone())?;
        let schedule = Schedule::constant(cfg.structure_eta, cfg.structure_steps)?;
        let traj = multi_step(
            &prob,
            &w0,
            &OptimizerKind::muon_exact(),
            &schedule,
            MultiStepOptions { record_update_spectrum: false, keep_weights: true },
        )?;
        let report = multi_step_structure_check(&traj.weights, &emb, &params)?;
        checks.push(Check::at_most("structure/residual", report.max_residual, 1e-8));
        checks.push(Check::at_most("structure/a_equals_b", report.max_a_minus_b, 1e-8));
        checks.push(
            Check::at_most("structure/coefficient_ratio", report.max_coefficient_ratio, 5.0)
                .with_detail("max_ij |c_ij| K / a over the trajectory"),
        );
    }

    let u = rng.orthonormal_matrix(8);
    let v = rng.orthonormal_matrix(8);
    let s: Vec<f64> = (0..8).map(|_| rng.uniform(0.1, 1.0)).collect();
    let a = u.matmul(&Matrix::diag(&s))?.matmul_transpose(&v)?;
    let err = newton_schulz(&a, DEFAULT_NS_ITERATIONS)?.frobenius_distance(&orthogonal_factor_exact(&a, DEFAULT_RANK_TOLERANCE)?);
    checks.push(Check::at_most("newton_schulz/conditioned_8x8", err, 1e-2));

    Ok(SuiteReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
