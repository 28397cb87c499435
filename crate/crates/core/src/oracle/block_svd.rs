//! Closed-form SVDs of two-group block-structured matrices.

use crate::error::{invalid, Result};
use crate::linalg::{Matrix, SvdFactors};

/// Closed-form SVD in the order the formulas produce it:
/// `a` repeated `L−1` times, `b` repeated `K−L−1` times, then the two values
/// of the reduced 2×2 problem. Zero values are kept.
#[derive(Clone, Debug)]
pub struct ClosedFormSvd {
    pub values: Vec<f64>,
    pub u: Matrix,
    pub v: Matrix,
}

impl ClosedFormSvd {
    /// `U·diag(values)·Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let us = Matrix::from_fn(self.u.rows(), self.u.cols(), |i, j| self.u[(i, j)] * self.values[j]);
        us.matmul_transpose(&self.v).expect("square factors")
    }

    /// Values in descending order.
    pub fn sorted_values(&self) -> Vec<f64> {
        let mut s = self.values.clone();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Sorted, truncated at `rank_tolerance · σ_max`.
    pub fn into_factors(self, rank_tolerance: f64) -> SvdFactors {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&x, &y| self.values[y].total_cmp(&self.values[x]));
        let top = order.first().map_or(0.0, |&j| self.values[j]);
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&j| top > 0.0 && self.values[j] > rank_tolerance * top)
            .collect();
        let pick = |m: &Matrix| Matrix::from_fn(m.rows(), kept.len(), |i, c| m[(i, kept[c])]);
        SvdFactors {
            u: pick(&self.u),
            s: kept.iter().map(|&j| self.values[j]).collect(),
            v: pick(&self.v),
            rank_tolerance,
        }
    }
}

/// Helmert basis of the complement of the all-ones vector in `ℝⁿ`:
/// column `j` is `(1, …, 1, −j, 0, …) / sqrt(j(j+1))` with `j` leading ones.
pub fn helmert_basis(n: usize) -> Matrix {
    Matrix::from_fn(n, n.saturating_sub(1), |i, c| {
        let j = c + 1;
        let norm = ((j * (j + 1)) as f64).sqrt();
        if i < j {
            1.0 / norm
        } else if i == j {
            -(j as f64) / norm
        } else {
            0.0
        }
    })
}

fn check_split(l: usize, k: usize) -> Result<()> {
    if l == 0 || l >= k {
        return Err(invalid(format!("block SVD needs 1 <= l < k, got l = {l}, k = {k}")));
    }
    Ok(())
}

/// Writes the Helmert blocks of both groups into columns `0..K−2` of `m`.
fn fill_group_bases(m: &mut Matrix, l: usize, k: usize) {
    let head = helmert_basis(l);
    let tail = helmert_basis(k - l);
    for c in 0..l - 1 {
        for i in 0..l {
            m[(i, c)] = head[(i, c)];
        }
    }
    for c in 0..k - l - 1 {
        for i in 0..k - l {
            m[(l + i, l - 1 + c)] = tail[(i, c)];
        }
    }
}

/// `X = diag(x) − (1/K)·1·xᵀ` with `x = (a·1_L, b·1_{K−L})`.
pub fn svd_simp_matrix(a: f64, b: f64, l: usize, k: usize) -> Matrix {
    let x = |j: usize| if j < l { a } else { b };
    Matrix::from_fn(k, k, |i, j| if i == j { x(j) } else { 0.0 } - x(j) / k as f64)
}

/// Closed-form SVD of [`svd_simp_matrix`].
pub fn svd_simp(a: f64, b: f64, l: usize, k: usize) -> Result<ClosedFormSvd> {
    check_split(l, k)?;
    if !(a > 0.0 && b > 0.0) {
        return Err(invalid("svd_simp needs a, b > 0"));
    }
    let (kf, lf) = (k as f64, l as f64);
    let tf = kf - lf;
    let mut values = vec![a; l - 1];
    values.extend(vec![b; k - l - 1]);
    values.push(((a * a * tf + b * b * lf) / kf).sqrt());
    values.push(0.0);

    let mut u = Matrix::zeros(k, k);
    let mut v = Matrix::zeros(k, k);
    fill_group_bases(&mut u, l, k);
    fill_group_bases(&mut v, l, k);
    let vn = 1.0 / (a * a * tf + b * b * lf).sqrt();
    let un = 1.0 / (kf * lf * tf).sqrt();
    for i in 0..k {
        let head = i < l;
        v[(i, k - 2)] = vn * if head { a * tf.sqrt() / lf.sqrt() } else { -b * lf.sqrt() / tf.sqrt() };
        v[(i, k - 1)] = vn * if head { b } else { a };
        u[(i, k - 2)] = un * if head { tf } else { -lf };
        u[(i, k - 1)] = 1.0 / kf.sqrt();
    }
    Ok(ClosedFormSvd { values, u, v })
}

/// `Λ + C` with `Λ = diag(a·1_L, b·1_{K−L})` and `C` constant on each of the
/// four blocks.
#[allow(clippy::too_many_arguments)]
pub fn block_constant_matrix(a: f64, b: f64, c11: f64, c12: f64, c21: f64, c22: f64, l: usize, k: usize) -> Matrix {
    Matrix::from_fn(k, k, |i, j| {
        let d = if i == j { if i < l { a } else { b } } else { 0.0 };
        d + match (i < l, j < l) {
            (true, true) => c11,
            (true, false) => c12,
            (false, true) => c21,
            (false, false) => c22,
        }
    })
}

/// SVD of a real 2×2 matrix `[[p, q], [r, s]]` as `(s₁, s₂, Ũ, Ṽ)`, `s₁ ≥ s₂ ≥ 0`.
pub(crate) fn svd_2x2(m: [[f64; 2]; 2]) -> (f64, f64, [[f64; 2]; 2], [[f64; 2]; 2]) {
    let [[p, q], [r, s]] = m;
    let t = p * p + q * q + r * r + s * s;
    let det = p * s - q * r;
    let disc = (t * t - 4.0 * det * det).max(0.0).sqrt();
    let s1 = ((t + disc) / 2.0).sqrt();
    let s2 = if s1 > 0.0 { det.abs() / s1 } else { 0.0 };
    // Right vectors: eigenvectors of MᵀM.
    let (g11, g12, g22) = (p * p + r * r, p * q + r * s, q * q + s * s);
    let theta = 0.5 * (2.0 * g12).atan2(g11 - g22);
    let (sn, cs) = theta.sin_cos();
    let v = [[cs, -sn], [sn, cs]];
    let mv = |x: f64, y: f64| (p * x + q * y, r * x + s * y);
    let (a1, b1) = mv(cs, sn);
    let (u1x, u1y) = if s1 > 0.0 { (a1 / s1, b1 / s1) } else { (1.0, 0.0) };
    let (a2, b2) = mv(-sn, cs);
    let (u2x, u2y) = if s2 > 1e-300 * s1.max(1.0) {
        (a2 / s2, b2 / s2)
    } else {
        (-u1y, u1x)
    };
    let u = [[u1x, u2x], [u1y, u2y]];
    (s1, s2, u, v)
}

/// Closed-form SVD of [`block_constant_matrix`] via the reduced 2×2 matrix
/// `M = [[a + L·c11, √(L(K−L))·c12], [√(L(K−L))·c21, b + (K−L)·c22]]`.
#[allow(clippy::too_many_arguments)]
pub fn svd_block_constant(
    a: f64,
    b: f64,
    c11: f64,
    c12: f64,
    c21: f64,
    c22: f64,
    l: usize,
    k: usize,
) -> Result<ClosedFormSvd> {
    check_split(l, k)?;
    if !(a > 0.0 && b > 0.0) {
        return Err(invalid("svd_block_constant needs a, b > 0"));
    }
    let (kf, lf) = (k as f64, l as f64);
    let tf = kf - lf;
    let cross = (lf * tf).sqrt();
    let m = [[a + lf * c11, cross * c12], [cross * c21, b + tf * c22]];
    let (s1, s2, um, vm) = svd_2x2(m);
    let mut values = vec![a; l - 1];
    values.extend(vec![b; k - l - 1]);
    values.push(s1);
    values.push(s2);

    let mut u = Matrix::zeros(k, k);
    let mut v = Matrix::zeros(k, k);
    fill_group_bases(&mut u, l, k);
    fill_group_bases(&mut v, l, k);
    let e1 = 1.0 / lf.sqrt();
    let e2 = 1.0 / tf.sqrt();
    for col in 0..2 {
        for i in 0..k {
            let (w1, w2) = if i < l { (e1, 0.0) } else { (0.0, e2) };
            u[(i, k - 2 + col)] = um[0][col] * w1 + um[1][col] * w2;
            v[(i, k - 2 + col)] = vm[0][col] * w1 + vm[1][col] * w2;
        }
    }
    Ok(ClosedFormSvd { values, u, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{singular_spectrum, svd, DEFAULT_RANK_TOLERANCE};
    use crate::rng::SeededRng;

    fn orthonormal(m: &Matrix) -> f64 {
        m.transpose().matmul(m).unwrap().frobenius_distance(&Matrix::identity(m.cols()))
    }

    #[test]
    fn helmert_is_orthonormal_and_centered() {
        let h = helmert_basis(7);
        assert!(orthonormal(&h) < 1e-14);
        for c in 0..6 {
            assert!(h.column(c).iter().sum::<f64>().abs() < 1e-14);
        }
        assert_eq!(helmert_basis(1).shape(), (1, 0));
    }

    #[test]
    fn simp_small_instance() {
        let f = svd_simp(2.0, 1.0, 2, 4).unwrap();
        assert_eq!(f.values.len(), 4);
        let sorted = f.sorted_values();
        let expected = [2.0, 2.5f64.sqrt(), 1.0, 0.0];
        for (s, e) in sorted.iter().zip(expected) {
            assert!((s - e).abs() < 1e-15);
        }
        let x = svd_simp_matrix(2.0, 1.0, 2, 4);
        assert!(f.reconstruct().max_abs_diff(&x) < 1e-14);
        assert!(orthonormal(&f.u) < 1e-14 && orthonormal(&f.v) < 1e-14);
        let numeric = singular_spectrum(&x).unwrap();
        for (s, e) in numeric.iter().zip(sorted) {
            assert!((s - e).abs() < 1e-9);
        }
    }

    #[test]
    fn simp_null_direction() {
        let x = svd_simp_matrix(3.0, 0.5, 3, 8);
        let f = svd_simp(3.0, 0.5, 3, 8).unwrap();
        let u2 = Matrix::new(8, 1, f.u.column(7)).unwrap();
        assert!(x.transpose().matmul(&u2).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn simp_uniform() {
        let f = svd_simp(1.5, 1.5, 2, 6).unwrap();
        let s = f.sorted_values();
        assert!(s[..5].iter().all(|&x| (x - 1.5).abs() < 1e-14));
        assert_eq!(s[5], 0.0);
    }

    #[test]
    fn block_constant_reduces_to_simp() {
        let (a, b, l, k) = (2.0, 1.0, 3, 7);
        let kf = k as f64;
        let f = svd_block_constant(a, b, -a / kf, -b / kf, -a / kf, -b / kf, l, k).unwrap();
        let g = svd_simp(a, b, l, k).unwrap();
        for (x, y) in f.sorted_values().iter().zip(g.sorted_values()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn block_constant_diagonal() {
        let f = svd_block_constant(3.0, 2.0, 0.0, 0.0, 0.0, 0.0, 2, 5).unwrap();
        assert_eq!(f.sorted_values(), vec![3.0, 3.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn block_constant_random_instances() {
        let mut rng = SeededRng::new(31);
        for _ in 0..50 {
            let k = 3 + (rng.uniform(0.0, 28.0) as usize);
            let l = 1 + (rng.uniform(0.0, (k - 1) as f64) as usize);
            let a = rng.uniform(0.1, 3.0);
            let b = rng.uniform(0.1, 3.0);
            let c: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let x = block_constant_matrix(a, b, c[0], c[1], c[2], c[3], l, k);
            let f = svd_block_constant(a, b, c[0], c[1], c[2], c[3], l, k).unwrap();
            assert!(f.reconstruct().max_abs_diff(&x) < 1e-12);
            let numeric = singular_spectrum(&x).unwrap();
            for (s, e) in numeric.iter().zip(f.sorted_values()) {
                assert!((s - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn factors_truncate_zero() {
        let f = svd_simp(2.0, 1.0, 2, 4).unwrap().into_factors(DEFAULT_RANK_TOLERANCE);
        assert_eq!(f.rank(), 3);
        let n = svd(&svd_simp_matrix(2.0, 1.0, 2, 4), DEFAULT_RANK_TOLERANCE).unwrap();
        for (x, y) in f.s.iter().zip(&n.s) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn two_by_two_cases() {
        for m in [[[3.0, 1.0], [-2.0, 0.5]], [[0.0, 2.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]]] {
            let (s1, s2, u, v) = svd_2x2(m);
            for i in 0..2 {
                for j in 0..2 {
                    let r = u[i][0] * s1 * v[j][0] + u[i][1] * s2 * v[j][1];
                    assert!((r - m[i][j]).abs() < 1e-14, "{m:?}");
                }
            }
        }
    }
}
