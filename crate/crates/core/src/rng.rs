//! Seeded random source.
//!
//! Every random quantity in the crate comes from ChaCha8 seeded with
//! `seed_from_u64`, with normals drawn by `rand_distr::StandardNormal`. The
//! stream is stable across platforms, so a seed names the same matrices
//! everywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{dot, Matrix};

pub struct SeededRng(ChaCha8Rng);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.0.random_range(lo..hi)
    }

    /// Matrix of independent standard normals, filled row by row.
    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        let values = (0..rows * cols).map(|_| self.normal()).collect();
        Matrix::from_raw(rows, cols, values)
    }

    /// Orthonormalizes the columns of an `n × n` Gaussian matrix.
    pub fn orthonormal_matrix(&mut self, n: usize) -> Matrix {
        let g = self.gaussian_matrix(n, n);
        orthonormalize_columns(&g)
    }
}

/// Modified Gram–Schmidt with a second orthogonalization pass.
///
/// Columns are assumed linearly independent, which holds with probability one
/// for Gaussian input.
pub(crate) fn orthonormalize_columns(a: &Matrix) -> Matrix {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    for j in 0..n {
        let (done, rest) = cols.split_at_mut(j);
        let v = &mut rest[0];
        for _pass in 0..2 {
            for q in done.iter() {
                let r = dot(q, v);
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= r * y;
                }
            }
        }
        let norm = dot(v, v).sqrt();
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    Matrix::from_fn(m, n, |i, j| cols[j][i])
}
