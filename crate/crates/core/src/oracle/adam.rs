//! The sign-descent construction on rotation-block embeddings.

use serde::{Deserialize, Serialize};

use crate::embeddings::{rotation_block, KEY_ANGLES, VALUE_ANGLES};
use crate::error::{invalid, Result};
use crate::linalg::Matrix;

/// Rotated products printed for the construction, row-major.
pub const PRINTED_ROTATED_SUM: [[f64; 3]; 3] = [
    [1.46552253, 1.0132908, -0.11179563],
    [-0.0732561, 1.00709257, -1.26935805],
    [0.0544114, 0.89611102, 1.54147329],
];
pub const PRINTED_ROTATED_B: [[f64; 3]; 3] = [
    [-0.19288146, -1.24460331, -1.4058011],
    [-0.20112175, -1.2977753, -1.46585978],
    [-0.12780259, -0.82466989, -0.93147899],
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamAdversarial {
    pub a_mat: Matrix,
    pub b_mat: Matrix,
    pub sum_mat: Matrix,
    /// `R_valᵀ (A + B) R_key`.
    pub rotated_sum: Matrix,
    /// `R_valᵀ B R_key`.
    pub rotated_b: Matrix,
    /// `1.668 / 2.471`.
    pub r_exponent: f64,
    /// `1.541 + 0.930`.
    pub eta_bound_rate: f64,
}

fn a_block() -> Matrix {
    Matrix::from_rows(&[[2.0, 0.0, 0.0], [2.0, 0.0, 2.0], [-2.0, -2.0, -2.0]])
}

fn b_block() -> Matrix {
    Matrix::from_rows(&[[-1.0, -1.0, -1.0], [-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]])
}

pub fn adam_adversarial() -> AdamAdversarial {
    let a = a_block();
    let b = b_block();
    let sum = a.add(&b).expect("3x3");
    let (x, y, z) = VALUE_ANGLES;
    let r_val = rotation_block(x, y, z);
    let (x, y, z) = KEY_ANGLES;
    let r_key = rotation_block(x, y, z);
    let rotate = |m: &Matrix| {
        r_val
            .transpose()
            .matmul(m)
            .and_then(|t| t.matmul(&r_key))
            .expect("3x3")
    };
    AdamAdversarial {
        rotated_sum: rotate(&sum),
        rotated_b: rotate(&b),
        a_mat: a,
        b_mat: b,
        sum_mat: sum,
        r_exponent: 1.668 / 2.471,
        eta_bound_rate: 2.471,
    }
}

/// `I_{K/3} ⊗ A + J_{K/3} ⊗ B`, the negated sign-descent direction at zero on
/// coupled embeddings.
pub fn coupled_sign_pattern(k: usize) -> Result<Matrix> {
    if !k.is_multiple_of(3) || k == 0 {
        return Err(invalid(format!("coupled sign pattern needs k mod 3 = 0, got {k}")));
    }
    let n = k / 3;
    let i = Matrix::identity(n).kron(&a_block());
    let j = Matrix::ones(n, n).kron(&b_block());
    i.add(&j)
}

/// `2I − J`, the negated sign-descent direction at zero on identity embeddings.
pub fn identity_sign_pattern(k: usize) -> Matrix {
    Matrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { -1.0 })
}

/// Singular values of a 3×3 matrix from the trigonometric roots of the
/// characteristic polynomial of `MᵀM`, descending.
pub fn singular_values_3x3(m: &Matrix) -> [f64; 3] {
    let g = m.transpose().matmul(m).expect("3x3");
    let (a11, a22, a33) = (g[(0, 0)], g[(1, 1)], g[(2, 2)]);
    let (a12, a13, a23) = (g[(0, 1)], g[(0, 2)], g[(1, 2)]);
    let p1 = a12 * a12 + a13 * a13 + a23 * a23;
    let q = (a11 + a22 + a33) / 3.0;
    let mut eig = if p1 == 0.0 {
        [a11, a22, a33]
    } else {
        let p2 = (a11 - q).powi(2) + (a22 - q).powi(2) + (a33 - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let b = Matrix::from_fn(3, 3, |i, j| (g[(i, j)] - if i == j { q } else { 0.0 }) / p);
        let det_b = b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
            - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
            + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]);
        let phi = (det_b / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [e1, 3.0 * q - e1 - e3, e3]
    };
    eig.sort_by(|x, y| y.total_cmp(x));
    eig.map(|e| e.max(0.0).sqrt())
}

/// `σ_min(A) / σ_max(A)`.
pub fn adam_singular_ratio() -> f64 {
    let s = singular_values_3x3(&a_block());
    s[2] / s[0]
}
