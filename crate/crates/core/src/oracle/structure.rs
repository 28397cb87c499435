//! Block structure of Muon iterates under the two-class law.
//!
//! Each iterate is expected to take the form `W_t = Ẽ·X_t·Eᵀ` with
//! `X_t = diag(a_t·1_L, b_t·1_{K−L}) + [c_t^{ij}·J]` and `c_t^{ij} = O(a_t/K)`.

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingPair;
use crate::error::{invalid, Result};
use crate::linalg::Matrix;

use super::params::TwoClassParams;

/// Residual above which a step is reported as a structural violation.
pub const STRUCTURE_VIOLATION: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockCoefficients {
    pub step: usize,
    pub a: f64,
    pub b: f64,
    pub c11: f64,
    pub c12: f64,
    pub c21: f64,
    pub c22: f64,
    /// `‖X_t − fit‖_F / max(1, ‖X_t‖_F)`.
    pub residual: f64,
    /// `max_ij |c_ij|·K / a`, absent while `a = 0`.
    pub coefficient_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub steps: Vec<BlockCoefficients>,
    pub max_residual: f64,
    pub max_a_minus_b: f64,
    pub max_coefficient_ratio: f64,
    /// Steps whose residual exceeds [`STRUCTURE_VIOLATION`].
    pub violations: Vec<usize>,
}

/// Least-squares projection of `X = Ẽᵀ·W·E` onto the block basis.
pub fn project_onto_blocks(w: &Matrix, emb: &EmbeddingPair, params: &TwoClassParams) -> Result<BlockCoefficients> {
    let (k, l) = (params.k, params.l);
    if l < 2 || k - l < 2 {
        return Err(invalid("block projection needs at least two facts in each group"));
    }
    let x = emb.e_til.transpose().matmul(w)?.matmul(&emb.e)?;
    if x.shape() != (k, k) {
        return Err(invalid("weight does not match the parameters"));
    }
    let ranges = [(0, l), (l, k)];
    let mut c = [[0.0; 2]; 2];
    let mut diag_mean = [0.0; 2];
    for (bi, &(r0, r1)) in ranges.iter().enumerate() {
        for (bj, &(c0, c1)) in ranges.iter().enumerate() {
            let (mut sum, mut count, mut dsum) = (0.0, 0usize, 0.0);
            for i in r0..r1 {
                for j in c0..c1 {
                    if i == j {
                        dsum += x[(i, j)];
                    } else {
                        sum += x[(i, j)];
                        count += 1;
                    }
                }
            }
            c[bi][bj] = sum / count as f64;
            if bi == bj {
                diag_mean[bi] = dsum / (r1 - r0) as f64;
            }
        }
    }
    let a = diag_mean[0] - c[0][0];
    let b = diag_mean[1] - c[1][1];
    let mut dev = 0.0;
    for i in 0..k {
        for j in 0..k {
            let (bi, bj) = ((i >= l) as usize, (j >= l) as usize);
            let d = if i == j { [a, b][bi] } else { 0.0 };
            dev += (x[(i, j)] - d - c[bi][bj]).powi(2);
        }
    }
    let residual = dev.sqrt() / x.frobenius_norm().max(1.0);
    let max_c = c.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let coefficient_ratio = (a > 0.0).then(|| max_c * k as f64 / a);
    Ok(BlockCoefficients {
        step: 0,
        a,
        b,
        c11: c[0][0],
        c12: c[0][1],
        c21: c[1][0],
        c22: c[1][1],
        residual,
        coefficient_ratio,
    })
}

/// Projects every iterate of a Muon trajectory and summarizes the structure.
pub fn multi_step_structure_check(
    weights: &[Matrix],
    emb: &EmbeddingPair,
    params: &TwoClassParams,
) -> Result<StructureReport> {
    let mut steps = Vec::with_capacity(weights.len());
    for (t, w) in weights.iter().enumerate() {
        let mut coef = project_onto_blocks(w, emb, params)?;
        coef.step = t;
        steps.push(coef);
    }
    let max_residual = steps.iter().fold(0.0f64, |m, c| m.max(c.residual));
    let max_a_minus_b = steps.iter().fold(0.0f64, |m, c| m.max((c.a - c.b).abs()));
    let max_coefficient_ratio = steps
        .iter()
        .filter_map(|c| c.coefficient_ratio)
        .fold(0.0f64, f64::max);
    let violations = steps
        .iter()
        .filter(|c| c.residual > STRUCTURE_VIOLATION)
        .map(|c| c.step)
        .collect();
    Ok(StructureReport {
        steps,
        max_residual,
        max_a_minus_b,
        max_coefficient_ratio,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{coupled_embeddings, random_orthonormal};
    use crate::oracle::block_svd::block_constant_matrix;

    #[test]
    fn zero_iterate_has_zero_coefficients() {
        let p = TwoClassParams::new(12, 3, 0.8).unwrap();
        let emb = coupled_embeddings(12).unwrap();
        let c = project_onto_blocks(&Matrix::zeros(12, 12), &emb, &p).unwrap();
        assert_eq!((c.a, c.b, c.c11, c.c12, c.c21, c.c22, c.residual), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(c.coefficient_ratio, None);
    }

    #[test]
    fn recovers_planted_coefficients() {
        let p = TwoClassParams::new(10, 4, 0.8).unwrap();
        let emb = random_orthonormal(10, 2).unwrap();
        let x = block_constant_matrix(2.0, 2.0, 0.1, -0.2, 0.05, -0.3, 4, 10);
        let w = emb.e_til.matmul(&x).unwrap().matmul_transpose(&emb.e).unwrap();
        let c = project_onto_blocks(&w, &emb, &p).unwrap();
        assert!((c.a - 2.0).abs() < 1e-12 && (c.b - 2.0).abs() < 1e-12);
        assert!((c.c12 + 0.2).abs() < 1e-12 && (c.c22 + 0.3).abs() < 1e-12);
        assert!(c.residual < 1e-12);
        assert!((c.coefficient_ratio.unwrap() - 1.5).abs() < 1e-10);
    }

    #[test]
    fn detects_unstructured_iterates() {
        let p = TwoClassParams::new(9, 3, 0.8).unwrap();
        let emb = coupled_embeddings(9).unwrap();
        let mut w = Matrix::identity(9);
        w[(0, 4)] = 0.5;
        let r = multi_step_structure_check(&[w], &emb, &p).unwrap();
        assert_eq!(r.violations, vec![0]);
    }
}
