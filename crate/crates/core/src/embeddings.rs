//! Orthonormal key/value embedding pairs `(E, Ẽ)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::rng::{orthonormalize_columns, SeededRng};

/// Euler angles of the value-side (`Ẽ`) rotation block.
pub const VALUE_ANGLES: (f64, f64, f64) = (3.638, 2.949, 5.218);
/// Euler angles of the key-side (`E`) rotation block.
pub const KEY_ANGLES: (f64, f64, f64) = (1.715, 0.876, 3.098);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    /// `E = Ẽ = I`: supports of different facts do not overlap.
    Identity,
    /// Block-diagonal 3×3 rotations that couple neighbouring facts under sign descent.
    CoupledRotation,
    /// Independent seeded random orthonormal matrices.
    RandomOrthonormal,
}

impl EmbeddingKind {
    pub const ALL: [EmbeddingKind; 3] = [
        EmbeddingKind::Identity,
        EmbeddingKind::CoupledRotation,
        EmbeddingKind::RandomOrthonormal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EmbeddingKind::Identity => "identity",
            EmbeddingKind::CoupledRotation => "coupled_rotation",
            EmbeddingKind::RandomOrthonormal => "random_orthonormal",
        }
    }
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "decoupled" => Ok(EmbeddingKind::Identity),
            "coupled_rotation" | "coupled" => Ok(EmbeddingKind::CoupledRotation),
            "random_orthonormal" | "random" => Ok(EmbeddingKind::RandomOrthonormal),
            other => Err(invalid(format!(
                "unknown embedding kind {other:?} (expected identity, coupled_rotation or random_orthonormal)"
            ))),
        }
    }
}

/// Key embeddings `e` (columns `E_k`) and value embeddings `e_til` (columns `Ẽ_k`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPair {
    pub e: Matrix,
    pub e_til: Matrix,
    pub kind: EmbeddingKind,
    pub seed: Option<u64>,
}

impl EmbeddingPair {
    /// Builds the pair of the given kind; `seed` is only read for random pairs.
    pub fn build(kind: EmbeddingKind, k: usize, seed: u64) -> Result<Self> {
        match kind {
            EmbeddingKind::Identity => identity_embeddings(k),
            EmbeddingKind::CoupledRotation => coupled_embeddings(k),
            EmbeddingKind::RandomOrthonormal => random_orthonormal(k, seed),
        }
    }

    /// Number of facts.
    pub fn k(&self) -> usize {
        self.e.cols()
    }

    /// Largest Frobenius deviation of `EᵀE` and `ẼᵀẼ` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let id = Matrix::identity(self.k());
        let gram = |m: &Matrix| m.transpose().matmul(m).expect("square").frobenius_distance(&id);
        gram(&self.e).max(gram(&self.e_til))
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(invalid(format!("number of facts k = {k} must be at least 2")));
    }
    Ok(())
}

pub fn identity_embeddings(k: usize) -> Result<EmbeddingPair> {
    check_k(k)?;
    Ok(EmbeddingPair {
        e: Matrix::identity(k),
        e_til: Matrix::identity(k),
        kind: EmbeddingKind::Identity,
        seed: None,
    })
}

/// Euler-style rotation `R(a, b, c)`.
pub fn rotation_block(a: f64, b: f64, c: f64) -> Matrix {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (sc, cc) = c.sin_cos();
    Matrix::from_rows(&[
        [ca * cb * cc - sa * sc, -ca * cb * sc - sa * cc, ca * sb],
        [sa * cb * cc + ca * sc, -sa * cb * sc + ca * cc, sa * sb],
        [-sb * cc, sb * sc, cb],
    ])
}

/// `Ẽ = I_{k/3} ⊗ R(VALUE_ANGLES)`, `E = I_{k/3} ⊗ R(KEY_ANGLES)`.
pub fn coupled_embeddings(k: usize) -> Result<EmbeddingPair> {
    check_k(k)?;
    if !k.is_multiple_of(3) {
        return Err(invalid(format!(
            "coupled embeddings use 3x3 rotation blocks and require k mod 3 = 0, got k = {k}"
        )));
    }
    let blocks = Matrix::identity(k / 3);
    let (a, b, c) = VALUE_ANGLES;
    let e_til = blocks.kron(&rotation_block(a, b, c));
    let (a, b, c) = KEY_ANGLES;
    let e = blocks.kron(&rotation_block(a, b, c));
    Ok(EmbeddingPair {
        e,
        e_til,
        kind: EmbeddingKind::CoupledRotation,
        seed: None,
    })
}

/// Independent orthonormalized Gaussian matrices: `E` first, then `Ẽ`, from one stream.
pub fn random_orthonormal(k: usize, seed: u64) -> Result<EmbeddingPair> {
    check_k(k)?;
    let mut rng = SeededRng::new(seed);
    let e = orthonormalize_columns(&rng.gaussian_matrix(k, k));
    let e_til = orthonormalize_columns(&rng.gaussian_matrix(k, k));
    Ok(EmbeddingPair {
        e,
        e_til,
        kind: EmbeddingKind::RandomOrthonormal,
        seed: Some(seed),
    })
}
