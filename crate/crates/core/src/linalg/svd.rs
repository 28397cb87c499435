//! One-sided (Hestenes) Jacobi SVD.
//!
//! The columns of the working matrix are rotated pairwise until every pair is
//! orthogonal to within [`CONVERGENCE_TOLERANCE`] relative to the product of
//! their norms. The accumulated rotations form `V`; the final column norms are
//! the singular values and the normalized columns form `U`.
//!
//! A pair is only re-examined when one of its columns was rotated since its
//! last check, so late sweeps cost far less than a full pass. Callers that
//! decompose a sequence of related matrices can pass the previous right basis
//! back in ([`svd_with_basis`]); the iteration then starts from `A·V₀` and
//! typically needs a single sweep, most of which is settled by one Gram
//! product up front.

use crate::error::{invalid, Result};

use super::matrix::{dot, gemm, Matrix};

/// Default relative cut-off below which singular values are treated as zero.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

/// Relative off-diagonal level at which a column pair counts as orthogonal.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-14;

const MAX_SWEEPS: usize = 100;

/// Truncated SVD `A ≈ U·diag(s)·Vᵀ`.
///
/// `s` is descending and only holds values above `rank_tolerance · s[0]`.
/// Each column of `u` has its largest-magnitude entry nonnegative.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    /// `m × r` left singular vectors.
    pub u: Matrix,
    pub s: Vec<f64>,
    /// `n × r` right singular vectors.
    pub v: Matrix,
    pub rank_tolerance: f64,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U·diag(s)·Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.s) {
                *x *= s;
            }
        }
        us.matmul_transpose(&self.v).expect("factor shapes agree")
    }
}

/// Full right basis from a previous decomposition, used to warm-start the next.
#[derive(Clone, Debug)]
pub struct RightBasis {
    transposed: bool,
    n: usize,
    /// Column-major `n × n`.
    cols: Vec<f64>,
}

/// SVD with the given relative rank tolerance in `(0, 1e-3]`.
pub fn svd(a: &Matrix, rank_tolerance: f64) -> Result<SvdFactors> {
    svd_with_basis(a, rank_tolerance, None).map(|(f, _)| f)
}

/// SVD that optionally starts from a previous right basis and returns the new one.
///
/// A basis of the wrong size is ignored.
pub fn svd_with_basis(
    a: &Matrix,
    rank_tolerance: f64,
    basis: Option<&RightBasis>,
) -> Result<(SvdFactors, RightBasis)> {
    check_rank_tolerance(rank_tolerance)?;
    a.check_finite()?;
    let mut work = Workspace::new(a);
    let start = basis.filter(|b| b.transposed == work.transposed && b.n == work.n);
    work.run(start.map(|b| b.cols.as_slice()), true);
    Ok(work.into_factors(rank_tolerance))
}

/// All singular values, descending, including numerically zero ones.
pub fn singular_spectrum(a: &Matrix) -> Result<Vec<f64>> {
    a.check_finite()?;
    let mut work = Workspace::new(a);
    work.run(None, false);
    let mut s: Vec<f64> = work.column_norms().into_iter().map(|x| x * work.scale).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

pub(crate) fn check_rank_tolerance(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(invalid(format!("rank_tolerance {tol} outside (0, 1e-3]")));
    }
    Ok(())
}

/// Column-major working copy arranged so that `m >= n`.
struct Workspace {
    transposed: bool,
    m: usize,
    n: usize,
    /// The working copy holds `A / scale`.
    scale: f64,
    a: Vec<f64>,
    v: Vec<f64>,
}

impl Workspace {
    fn new(a: &Matrix) -> Self {
        let (rows, cols) = a.shape();
        let (transposed, m, n, mut data) = if rows >= cols {
            // Column j of A, contiguous.
            (false, rows, cols, a.transpose().into_values())
        } else {
            // Rows of A are the columns of Aᵀ.
            (true, cols, rows, a.values().to_vec())
        };
        // Squared column norms overflow or underflow far from unit scale.
        let max = a.max_abs();
        let scale = if max > 1e150 || (max > 0.0 && max < 1e-150) { max } else { 1.0 };
        if scale != 1.0 {
            data.iter_mut().for_each(|x| *x /= scale);
        }
        Self {
            transposed,
            m,
            n,
            scale,
            a: data,
            v: Vec::new(),
        }
    }

    fn run(&mut self, start: Option<&[f64]>, accumulate_v: bool) {
        let (m, n) = (self.m, self.n);
        if accumulate_v {
            match start {
                Some(v0) => {
                    // A ← A·V₀
                    let mut rotated = vec![0.0; m * n];
                    gemm((m, n, n), (&self.a, 1, m), (v0, 1, n), (&mut rotated, 1, m));
                    self.a = rotated;
                    self.v = v0.to_vec();
                }
                None => {
                    self.v = vec![0.0; n * n];
                    for j in 0..n {
                        self.v[j * n + j] = 1.0;
                    }
                }
            }
        }
        if n < 2 {
            return;
        }

        let mut norms: Vec<f64> = (0..n).map(|j| {
            let c = &self.a[j * m..(j + 1) * m];
            dot(c, c)
        }).collect();
        // checked[p*n+q]: clock value when the pair last passed; modified[j]: clock of
        // the last rotation touching column j. Clock starts at 1 so 0 means "never".
        let mut checked = vec![0u32; n * n];
        let mut modified = vec![0u32; n];
        let mut clock: u32 = 1;
        if start.is_some() {
            // A warm start is usually orthogonal already; one Gram product clears
            // those pairs in bulk.
            let mut gram = vec![0.0; n * n];
            gemm((n, m, n), (&self.a, m, 1), (&self.a, 1, m), (&mut gram, n, 1));
            for p in 0..n - 1 {
                for q in p + 1..n {
                    if gram[p * n + q].abs() <= CONVERGENCE_TOLERANCE * (norms[p] * norms[q]).sqrt() {
                        checked[p * n + q] = clock;
                    }
                }
            }
        }

        for _ in 0..MAX_SWEEPS {
            let sweep_start = clock;
            let mut rotations = 0usize;
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let idx = p * n + q;
                    let stamp = checked[idx];
                    if stamp != 0 && stamp >= modified[p] && stamp >= modified[q] {
                        continue;
                    }
                    let (head, tail) = self.a.split_at_mut(q * m);
                    let cp = &mut head[p * m..(p + 1) * m];
                    let cq = &mut tail[..m];
                    let gamma = dot(cp, cq);
                    let (alpha, beta) = (norms[p], norms[q]);
                    if gamma == 0.0 || gamma.abs() <= CONVERGENCE_TOLERANCE * (alpha * beta).sqrt() {
                        checked[idx] = clock;
                        continue;
                    }
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    rotate(cp, cq, c, s);
                    norms[p] = (alpha - t * gamma).max(0.0);
                    norms[q] = (beta + t * gamma).max(0.0);
                    if accumulate_v {
                        let (head, tail) = self.v.split_at_mut(q * n);
                        rotate(&mut head[p * n..(p + 1) * n], &mut tail[..n], c, s);
                    }
                    clock += 1;
                    modified[p] = clock;
                    modified[q] = clock;
                    rotations += 1;
                }
            }
            if rotations == 0 {
                break;
            }
            for j in 0..n {
                if modified[j] > sweep_start {
                    let c = &self.a[j * m..(j + 1) * m];
                    norms[j] = dot(c, c);
                }
            }
        }
    }

    /// Column norms of the scaled working copy.
    fn column_norms(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                let c = &self.a[j * self.m..(j + 1) * self.m];
                dot(c, c).sqrt()
            })
            .collect()
    }

    fn into_factors(self, rank_tolerance: f64) -> (SvdFactors, RightBasis) {
        let (m, n) = (self.m, self.n);
        let sigma = self.column_norms();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]).then(x.cmp(&y)));
        let top = order.first().map_or(0.0, |&j| sigma[j]);
        let kept: Vec<usize> = if top > 0.0 {
            order
                .into_iter()
                .take_while(|&j| sigma[j] > rank_tolerance * top)
                .collect()
        } else {
            Vec::new()
        };
        let r = kept.len();

        // Working-orientation factors: left (m × r) and right (n × r), row-major.
        let mut left = Matrix::zeros(m, r);
        let mut right = Matrix::zeros(n, r);
        for (col, &j) in kept.iter().enumerate() {
            let inv = 1.0 / sigma[j];
            for i in 0..m {
                left[(i, col)] = self.a[j * m + i] * inv;
            }
            for i in 0..n {
                right[(i, col)] = self.v[j * n + i];
            }
        }
        let s: Vec<f64> = kept.iter().map(|&j| sigma[j] * self.scale).collect();
        let (mut u, mut v) = if self.transposed {
            (right, left)
        } else {
            (left, right)
        };
        normalize_signs(&mut u, &mut v);

        let basis = RightBasis {
            transposed: self.transposed,
            n,
            cols: self.v,
        };
        (
            SvdFactors {
                u,
                s,
                v,
                rank_tolerance,
            },
            basis,
        )
    }
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

/// Flips column pairs so each `u` column's largest-magnitude entry is nonnegative.
fn normalize_signs(u: &mut Matrix, v: &mut Matrix) {
    for j in 0..u.cols() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for i in 0..u.rows() {
            let x = u[(i, j)];
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            for i in 0..u.rows() {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..v.rows() {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn orthonormality_error(q: &Matrix) -> f64 {
        let g = q.transpose().matmul(q).unwrap();
        g.frobenius_distance(&Matrix::identity(q.cols()))
    }

    fn assert_contract(a: &Matrix, f: &SvdFactors) {
        assert!(orthonormality_error(&f.u) < 1e-10, "U not orthonormal");
        assert!(orthonormality_error(&f.v) < 1e-10, "V not orthonormal");
        assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        assert!(f.s.iter().all(|&x| x >= 0.0));
        let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
        assert!(f.reconstruct().frobenius_distance(a) / scale < 1e-9);
    }

    #[test]
    fn extreme_magnitudes() {
        let base = Matrix::from_rows(&[[3.0, 1.0], [-1.0, 2.0], [0.5, 0.0]]);
        let s0 = singular_spectrum(&base).unwrap();
        for c in [1e300, 1e-300] {
            let s = singular_spectrum(&base.scale(c)).unwrap();
            for (x, y) in s.iter().zip(&s0) {
                assert!((x / c - y).abs() < 1e-13 * y, "{c}");
            }
            let f = svd(&base.scale(c), DEFAULT_RANK_TOLERANCE).unwrap();
            assert!(f.reconstruct().scale(1.0 / c).frobenius_distance(&base) < 1e-13);
        }
    }

    #[test]
    fn diagonal_case() {
        let f = svd(&Matrix::diag(&[3.0, 2.0]), DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(f.s, vec![3.0, 2.0]);
        assert_eq!(f.u, Matrix::identity(2));
        assert_eq!(f.v, Matrix::identity(2));
    }

    #[test]
    fn zero_matrix_has_empty_factors() {
        let f = svd(&Matrix::zeros(4, 4), DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(f.rank(), 0);
        assert_eq!(f.u.shape(), (4, 0));
        assert_eq!(f.v.shape(), (4, 0));
    }

    #[test]
    fn rejects_bad_tolerance_and_non_finite() {
        assert!(svd(&Matrix::identity(2), 0.0).is_err());
        assert!(svd(&Matrix::identity(2), 1e-2).is_err());
        let mut m = Matrix::identity(3);
        m[(2, 1)] = f64::INFINITY;
        let err = svd(&m, DEFAULT_RANK_TOLERANCE).unwrap_err();
        assert!(err.to_string().contains("(2, 1)"), "{err}");
    }

    #[test]
    fn two_class_centered_matrix_spectrum() {
        // X = diag(x) − 1xᵀ/K with x = (2, 2, 1, 1): σ = (2, √2.5, 1, 0).
        let x = [2.0, 2.0, 1.0, 1.0];
        let a = Matrix::from_fn(4, 4, |i, j| if i == j { x[j] } else { 0.0 } - x[j] / 4.0);
        let f = svd(&a, DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(f.rank(), 3);
        let expected = [2.0, 1.581_138_830_084_19, 1.0];
        for (s, e) in f.s.iter().zip(expected) {
            assert!((s - e).abs() < 1e-12, "{s} vs {e}");
        }
        assert_contract(&a, &f);
        let spectrum = singular_spectrum(&a).unwrap();
        assert_eq!(spectrum.len(), 4);
        assert!(spectrum[3].abs() < 1e-14);
    }

    #[test]
    fn spectrum_of_small_matrices() {
        assert_eq!(singular_spectrum(&Matrix::identity(3)).unwrap(), vec![1.0; 3]);
        assert_eq!(
            singular_spectrum(&Matrix::diag(&[2.0, 1.0, 0.0])).unwrap(),
            vec![2.0, 1.0, 0.0]
        );
    }

    #[test]
    fn random_rectangular_matrices_meet_contract() {
        let mut rng = SeededRng::new(11);
        for &(r, c) in &[(7, 4), (4, 7), (12, 12), (1, 5), (5, 1)] {
            let a = rng.gaussian_matrix(r, c);
            let f = svd(&a, DEFAULT_RANK_TOLERANCE).unwrap();
            assert_eq!(f.rank(), r.min(c));
            assert_contract(&a, &f);
        }
    }

    #[test]
    fn column_signs_are_normalized() {
        let mut rng = SeededRng::new(5);
        let a = rng.gaussian_matrix(6, 6);
        let f = svd(&a, DEFAULT_RANK_TOLERANCE).unwrap();
        for j in 0..f.rank() {
            let col = f.u.column(j);
            let big = col.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn warm_start_reproduces_cold_result() {
        let mut rng = SeededRng::new(3);
        let a = rng.gaussian_matrix(9, 9);
        let b = a.add_scaled(1e-3, &rng.gaussian_matrix(9, 9)).unwrap();
        let (_, basis) = svd_with_basis(&a, DEFAULT_RANK_TOLERANCE, None).unwrap();
        let (warm, _) = svd_with_basis(&b, DEFAULT_RANK_TOLERANCE, Some(&basis)).unwrap();
        let cold = svd(&b, DEFAULT_RANK_TOLERANCE).unwrap();
        for (x, y) in warm.s.iter().zip(&cold.s) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_contract(&b, &warm);
    }

    #[test]
    fn rank_deficient_product() {
        let mut rng = SeededRng::new(8);
        let a = rng.gaussian_matrix(10, 3).matmul(&rng.gaussian_matrix(3, 8)).unwrap();
        let f = svd(&a, DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(f.rank(), 3);
        assert_contract(&a, &f);
    }
}
