//! Orthogonal factor `U·Vᵀ`, exactly via SVD or approximately via Newton–Schulz.

use crate::error::{Error, Result};

use super::matrix::Matrix;
use super::svd::{svd_with_basis, RightBasis};

/// Newton–Schulz iterations used when the caller does not choose.
///
/// Ten cubic steps are not enough for a Frobenius-scaled 64×64 input whose
/// smallest singular value is a tenth of the largest; sixteen are.
pub const DEFAULT_NS_ITERATIONS: usize = 16;

/// Orthogonal factor together with the data needed to continue a sequence.
#[derive(Clone, Debug)]
pub struct OrthogonalFactor {
    pub factor: Matrix,
    /// Number of retained singular directions.
    pub rank: usize,
    pub basis: RightBasis,
}

/// `U·Vᵀ` over the singular directions above `rank_tolerance · σ_max`.
///
/// The zero matrix maps to the zero matrix.
pub fn orthogonal_factor_exact(a: &Matrix, rank_tolerance: f64) -> Result<Matrix> {
    orthogonal_factor_with_basis(a, rank_tolerance, None).map(|f| f.factor)
}

/// As [`orthogonal_factor_exact`], warm-started from a previous right basis.
pub fn orthogonal_factor_with_basis(
    a: &Matrix,
    rank_tolerance: f64,
    basis: Option<&RightBasis>,
) -> Result<OrthogonalFactor> {
    let (f, basis) = svd_with_basis(a, rank_tolerance, basis)?;
    let factor = f.u.matmul_transpose(&f.v)?;
    Ok(OrthogonalFactor {
        factor,
        rank: f.rank(),
        basis,
    })
}

/// Cubic Newton–Schulz iteration `X ← 1.5·X − 0.5·X·Xᵀ·X` after scaling by the
/// Frobenius norm.
pub fn newton_schulz(a: &Matrix, iterations: usize) -> Result<Matrix> {
    a.check_finite()?;
    if iterations == 0 {
        return Err(Error::InvalidArgument(
            "newton_schulz needs at least one iteration".into(),
        ));
    }
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::DegenerateInput(
            "newton_schulz of the zero matrix: Frobenius pre-scaling undefined",
        ));
    }
    let mut x = a.scale(1.0 / norm);
    for _ in 0..iterations {
        x = newton_schulz_step(&x)?;
    }
    Ok(x)
}

/// One cubic step, contracting along the shorter side.
pub(crate) fn newton_schulz_step(x: &Matrix) -> Result<Matrix> {
    let cubic = if x.rows() <= x.cols() {
        x.matmul_transpose(x)?.matmul(x)?
    } else {
        let xtx = x.transpose().matmul(x)?;
        x.matmul(&xtx)?
    };
    x.scale(1.5).add_scaled(-0.5, &cubic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{svd, DEFAULT_RANK_TOLERANCE};
    use crate::rng::SeededRng;

    fn nuclear_norm(a: &Matrix) -> f64 {
        svd(a, DEFAULT_RANK_TOLERANCE).unwrap().s.iter().sum()
    }

    #[test]
    fn positive_diagonal_maps_to_identity() {
        let f = orthogonal_factor_exact(&Matrix::diag(&[5.0, 0.1]), DEFAULT_RANK_TOLERANCE).unwrap();
        assert!(f.frobenius_distance(&Matrix::identity(2)) < 1e-14);
    }

    #[test]
    fn zero_maps_to_zero() {
        let f = orthogonal_factor_exact(&Matrix::zeros(3, 5), DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(f, Matrix::zeros(3, 5));
    }

    #[test]
    fn attains_nuclear_norm() {
        let mut rng = SeededRng::new(21);
        for _ in 0..5 {
            let g = rng.gaussian_matrix(6, 6);
            let f = orthogonal_factor_exact(&g, DEFAULT_RANK_TOLERANCE).unwrap();
            let inner = g.frobenius_inner(&f).unwrap();
            let nuc = nuclear_norm(&g);
            assert!((inner - nuc).abs() <= 1e-8 * nuc);
        }
    }

    #[test]
    fn beats_random_spectral_norm_one_candidates() {
        let mut rng = SeededRng::new(4);
        let a = rng.gaussian_matrix(5, 7);
        let best = a
            .frobenius_inner(&orthogonal_factor_exact(&a, DEFAULT_RANK_TOLERANCE).unwrap())
            .unwrap();
        for _ in 0..100 {
            let t = rng.gaussian_matrix(5, 7);
            let smax = svd(&t, DEFAULT_RANK_TOLERANCE).unwrap().s[0];
            let t = t.scale(1.0 / smax);
            assert!(a.frobenius_inner(&t).unwrap() <= best + 1e-9);
        }
    }

    #[test]
    fn scale_invariant() {
        let mut rng = SeededRng::new(9);
        let a = rng.gaussian_matrix(6, 4);
        let f1 = orthogonal_factor_exact(&a, DEFAULT_RANK_TOLERANCE).unwrap();
        let f2 = orthogonal_factor_exact(&a.scale(37.5), DEFAULT_RANK_TOLERANCE).unwrap();
        assert!(f1.frobenius_distance(&f2) < 1e-10);
    }

    #[test]
    fn factor_singular_values_are_one() {
        let mut rng = SeededRng::new(2);
        let a = rng.gaussian_matrix(8, 3).matmul(&rng.gaussian_matrix(3, 8)).unwrap();
        let f = orthogonal_factor_exact(&a, DEFAULT_RANK_TOLERANCE).unwrap();
        let s = svd(&f, DEFAULT_RANK_TOLERANCE).unwrap().s;
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|x| (x - 1.0).abs() < 1e-9));
    }

    #[test]
    fn newton_schulz_rejects_zero() {
        assert!(matches!(
            newton_schulz(&Matrix::zeros(2, 2), 5),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn newton_schulz_small_diagonal() {
        let x = newton_schulz(&Matrix::diag(&[1.0, 0.5]), 10).unwrap();
        assert!(x.frobenius_distance(&Matrix::identity(2)) < 1e-2);
    }

    #[test]
    fn orthogonal_input_is_recovered() {
        let mut rng = SeededRng::new(17);
        let q = rng.orthonormal_matrix(12);
        let x = newton_schulz(&q, DEFAULT_NS_ITERATIONS).unwrap();
        assert!(x.frobenius_distance(&q) < 1e-10);
        // An orthogonal matrix is a fixed point of the unscaled step.
        assert!(newton_schulz_step(&q).unwrap().frobenius_distance(&q) < 1e-12);
    }

    #[test]
    fn conditioned_random_inputs() {
        let mut rng = SeededRng::new(1);
        let u = rng.orthonormal_matrix(8);
        let v = rng.orthonormal_matrix(8);
        let s: Vec<f64> = (0..8).map(|i| 1.0 - 0.9 * i as f64 / 7.0).collect();
        let a = u.matmul(&Matrix::diag(&s)).unwrap().matmul_transpose(&v).unwrap();
        let exact = orthogonal_factor_exact(&a, DEFAULT_RANK_TOLERANCE).unwrap();
        let approx = newton_schulz(&a, DEFAULT_NS_ITERATIONS).unwrap();
        assert!(approx.frobenius_distance(&exact) <= 1e-2);
    }
}
