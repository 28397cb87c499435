//! Isotropy metrics of a singular spectrum.
//!
//! With the `n` nonzero singular values `σ` and energies `q_i = σ_i² / Σσ_j²`:
//!
//! - normalized entropy `H = −Σ q_i ln q_i / ln n` (1 when `n = 1`)
//! - effective rank `exp(−Σ q_i ln q_i)`
//! - top-k energy `Σ_{i≤k} q_i`
//! - quantile ratio `Q₇₅ / Q₂₅` of the eigenvalues `σ²`, type-7 interpolation

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{singular_spectrum, Matrix};

/// Values at or below this fraction of the largest are treated as zero.
pub const ZERO_THRESHOLD: f64 = 1e-12;

/// Top-k energies reported by [`matrix_metrics`].
pub const DEFAULT_TOP_K: [usize; 2] = [1, 10];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMetrics {
    pub h_norm: f64,
    pub erank: f64,
    pub top_e: BTreeMap<usize, f64>,
    /// Absent when fewer than two values survive or the lower quartile is zero.
    pub q_ratio: Option<f64>,
    pub n_nonzero: usize,
}

/// Strictly positive values above [`ZERO_THRESHOLD`] of the maximum.
pub fn nonzero(sigma: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = sigma.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(invalid(format!("singular values must be finite and nonnegative, got {bad}")));
    }
    let max = sigma.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::EmptySpectrum);
    }
    Ok(sigma.iter().cloned().filter(|&s| s > ZERO_THRESHOLD * max).collect())
}

pub fn energy_distribution(sigma: &[f64]) -> Result<Vec<f64>> {
    let s = nonzero(sigma)?;
    // Scale first so squares neither overflow nor underflow.
    let max = s.iter().cloned().fold(0.0, f64::max);
    let sq: Vec<f64> = s.iter().map(|x| (x / max).powi(2)).collect();
    let total: f64 = sq.iter().sum();
    Ok(sq.into_iter().map(|x| x / total).collect())
}

fn entropy(q: &[f64]) -> f64 {
    -q.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

pub fn normalized_entropy(sigma: &[f64]) -> Result<f64> {
    let q = energy_distribution(sigma)?;
    if q.len() == 1 {
        return Ok(1.0);
    }
    Ok(entropy(&q) / (q.len() as f64).ln())
}

pub fn effective_rank(sigma: &[f64]) -> Result<f64> {
    Ok(entropy(&energy_distribution(sigma)?).exp())
}

/// Energy in the `k` largest values; `k` is clamped to `n`.
pub fn top_k_energy(sigma: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid("top-k energy needs k >= 1"));
    }
    let mut q = energy_distribution(sigma)?;
    q.sort_by(|a, b| b.total_cmp(a));
    if k >= q.len() {
        return Ok(1.0);
    }
    Ok(q[..k].iter().sum())
}

/// Type-7 quantile of ascending data at probability `p`.
fn quantile_sorted(xs: &[f64], p: f64) -> f64 {
    let h = p * (xs.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(xs.len() - 1);
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

/// `Q₇₅ / Q₂₅` of the eigenvalues `σ_i²`.
pub fn quantile_ratio(sigma: &[f64]) -> Result<f64> {
    let s = nonzero(sigma)?;
    if s.len() < 2 {
        return Err(invalid("quantile ratio needs at least two nonzero singular values"));
    }
    let max = s.iter().cloned().fold(0.0, f64::max);
    let mut eig: Vec<f64> = s.iter().map(|x| (x / max).powi(2)).collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    let q1 = quantile_sorted(&eig, 0.25);
    if q1 <= 0.0 {
        return Err(Error::LowerQuartileVanishes);
    }
    Ok(quantile_sorted(&eig, 0.75) / q1)
}

/// All four metrics of a descending spectrum.
pub fn spectrum_metrics(sigma: &[f64], top_k: &[usize]) -> Result<SpectrumMetrics> {
    let n_nonzero = nonzero(sigma)?.len();
    let top_e = top_k
        .iter()
        .map(|&k| Ok((k, top_k_energy(sigma, k)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let q_ratio = match quantile_ratio(sigma) {
        Ok(r) => Some(r),
        Err(Error::LowerQuartileVanishes | Error::InvalidArgument(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SpectrumMetrics {
        h_norm: normalized_entropy(sigma)?,
        erank: effective_rank(sigma)?,
        top_e,
        q_ratio,
        n_nonzero,
    })
}

pub fn matrix_metrics(a: &Matrix) -> Result<SpectrumMetrics> {
    spectrum_metrics(&singular_spectrum(a)?, &DEFAULT_TOP_K)
}
