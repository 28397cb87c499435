use crate::error::Result;
use crate::linalg::{newton_schulz, orthogonal_factor_with_basis, Matrix, RightBasis};

use super::kind::OptimizerKind;

/// An update direction `D`; the step is `W ← W − η·D`.
#[derive(Clone, Debug)]
pub struct Direction {
    pub matrix: Matrix,
    /// Muon was handed a zero matrix and returned the zero direction.
    pub degenerate: bool,
    /// Retained singular directions, known for the exact Muon variants.
    pub rank: Option<usize>,
}

impl Direction {
    /// Singular spectrum of the direction, exact where the construction fixes it.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let n = self.matrix.rows().min(self.matrix.cols());
        match self.rank {
            Some(r) => {
                let mut s = vec![1.0; r];
                s.resize(n, 0.0);
                Ok(s)
            }
            None => crate::linalg::singular_spectrum(&self.matrix),
        }
    }
}

/// Elementwise sign with `sign(0) = 0`.
pub fn sign(g: &Matrix) -> Matrix {
    g.map(|x| {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    })
}

/// Direction of a single update from fresh state.
///
/// The stateful rules reduce to their first step: Muon with momentum
/// orthogonalizes `G` itself and Adam returns `G / (|G| + ε)`.
pub fn update_direction(kind: &OptimizerKind, grad: &Matrix) -> Result<Direction> {
    OptimizerState::new(*kind)?.next_direction(grad)
}

/// Per-trajectory optimizer state: momentum buffers, Adam moments and the
/// previous right singular basis used to warm-start the next SVD.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    kind: OptimizerKind,
    step: i32,
    buffer: Option<Matrix>,
    second_moment: Option<Matrix>,
    basis: Option<RightBasis>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            kind,
            step: 0,
            buffer: None,
            second_moment: None,
            basis: None,
        })
    }

    pub fn kind(&self) -> &OptimizerKind {
        &self.kind
    }

    /// Advances the state with `grad` and returns the direction to apply.
    pub fn next_direction(&mut self, grad: &Matrix) -> Result<Direction> {
        grad.check_finite()?;
        self.step += 1;
        let plain = |matrix| Direction {
            matrix,
            degenerate: false,
            rank: None,
        };
        match self.kind {
            OptimizerKind::Gd => Ok(plain(grad.clone())),
            OptimizerKind::SignGd => Ok(plain(sign(grad))),
            OptimizerKind::MuonExact { rank_tolerance } => self.muon(grad, rank_tolerance),
            OptimizerKind::MuonNs { iterations } => {
                if grad.is_zero() {
                    return Ok(degenerate(grad));
                }
                Ok(plain(newton_schulz(grad, iterations)?))
            }
            OptimizerKind::MuonMomentum { mu, rank_tolerance } => {
                let b = match self.buffer.take() {
                    Some(prev) => grad.add_scaled(mu, &prev)?,
                    None => grad.clone(),
                };
                let dir = self.muon(&b, rank_tolerance);
                self.buffer = Some(b);
                dir
            }
            OptimizerKind::AdamFull { beta1, beta2, eps } => {
                let m = match self.buffer.take() {
                    Some(prev) => prev.scale(beta1).add_scaled(1.0 - beta1, grad)?,
                    None => grad.scale(1.0 - beta1),
                };
                let g2 = grad.map(|x| x * x);
                let v = match self.second_moment.take() {
                    Some(prev) => prev.scale(beta2).add_scaled(1.0 - beta2, &g2)?,
                    None => g2.scale(1.0 - beta2),
                };
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                let values = m
                    .values()
                    .iter()
                    .zip(v.values())
                    .map(|(&mi, &vi)| {
                        let num = mi / c1;
                        let den = (vi / c2).sqrt() + eps;
                        if num == 0.0 {
                            0.0
                        } else {
                            num / den
                        }
                    })
                    .collect();
                let dir = Matrix::new(grad.rows(), grad.cols(), values)?;
                self.buffer = Some(m);
                self.second_moment = Some(v);
                Ok(plain(dir))
            }
        }
    }

    fn muon(&mut self, b: &Matrix, rank_tolerance: f64) -> Result<Direction> {
        if b.is_zero() {
            return Ok(degenerate(b));
        }
        let f = orthogonal_factor_with_basis(b, rank_tolerance, self.basis.as_ref())?;
        self.basis = Some(f.basis);
        Ok(Direction {
            matrix: f.factor,
            degenerate: false,
            rank: Some(f.rank),
        })
    }
}

fn degenerate(g: &Matrix) -> Direction {
    Direction {
        matrix: Matrix::zeros(g.rows(), g.cols()),
        degenerate: true,
        rank: Some(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthogonal_factor_exact, svd, DEFAULT_RANK_TOLERANCE};
    use crate::rng::SeededRng;

    #[test]
    fn sign_of_small_matrix() {
        let g = Matrix::from_rows(&[[0.3, -2.0], [0.0, 5.0]]);
        let d = update_direction(&OptimizerKind::SignGd, &g).unwrap();
        assert_eq!(d.matrix, Matrix::from_rows(&[[1.0, -1.0], [0.0, 1.0]]));
    }

    #[test]
    fn gd_is_identity_map() {
        let g = Matrix::from_rows(&[[0.3, -2.0], [0.0, 5.0]]);
        assert_eq!(update_direction(&OptimizerKind::Gd, &g).unwrap().matrix, g);
    }

    #[test]
    fn muon_on_zero_is_flagged() {
        for kind in [OptimizerKind::muon_exact(), OptimizerKind::muon_ns()] {
            let d = update_direction(&kind, &Matrix::zeros(3, 3)).unwrap();
            assert!(d.degenerate);
            assert!(d.matrix.is_zero());
        }
    }

    #[test]
    fn dual_norm_identities() {
        let mut rng = SeededRng::new(77);
        for _ in 0..20 {
            let g = rng.gaussian_matrix(8, 8);
            let s = update_direction(&OptimizerKind::SignGd, &g).unwrap().matrix;
            let l1 = g.l1_norm();
            assert!((g.frobenius_inner(&s).unwrap() - l1).abs() <= 1e-9 * l1);
            let m = update_direction(&OptimizerKind::muon_exact(), &g).unwrap().matrix;
            let nuc: f64 = svd(&g, DEFAULT_RANK_TOLERANCE).unwrap().s.iter().sum();
            assert!((g.frobenius_inner(&m).unwrap() - nuc).abs() <= 1e-8 * nuc);
        }
    }

    #[test]
    fn scale_invariance_of_sign_and_muon() {
        let mut rng = SeededRng::new(5);
        let g = rng.gaussian_matrix(6, 6);
        for kind in [OptimizerKind::SignGd, OptimizerKind::muon_exact()] {
            let a = update_direction(&kind, &g).unwrap().matrix;
            let b = update_direction(&kind, &g.scale(3.7)).unwrap().matrix;
            assert!(a.frobenius_distance(&b) < 1e-10);
        }
    }

    #[test]
    fn momentum_zero_matches_muon() {
        let mut rng = SeededRng::new(8);
        let g1 = rng.gaussian_matrix(5, 5);
        let g2 = rng.gaussian_matrix(5, 5);
        let mut st = OptimizerState::new(OptimizerKind::muon_momentum(0.0)).unwrap();
        st.next_direction(&g1).unwrap();
        let d = st.next_direction(&g2).unwrap().matrix;
        let exact = orthogonal_factor_exact(&g2, DEFAULT_RANK_TOLERANCE).unwrap();
        assert!(d.frobenius_distance(&exact) < 1e-10);
    }

    #[test]
    fn momentum_with_repeated_gradient_keeps_direction() {
        let mut rng = SeededRng::new(9);
        let g = rng.gaussian_matrix(5, 5);
        let mut st = OptimizerState::new(OptimizerKind::muon_momentum(0.95)).unwrap();
        let first = st.next_direction(&g).unwrap().matrix;
        let second = st.next_direction(&g).unwrap().matrix;
        assert!(first.frobenius_distance(&second) < 1e-10);
    }

    #[test]
    fn adam_without_averages_is_sign() {
        let g = Matrix::from_rows(&[[0.3, -2.0], [0.0, 5e-4]]);
        let kind = OptimizerKind::AdamFull {
            beta1: 0.0,
            beta2: 0.0,
            eps: 1e-15,
        };
        let d = update_direction(&kind, &g).unwrap().matrix;
        assert!(d.max_abs_diff(&sign(&g)) < 1e-10);
    }

    #[test]
    fn adam_bias_correction_first_step() {
        let g = Matrix::from_rows(&[[0.5, -0.25]]);
        let mut st = OptimizerState::new(OptimizerKind::adam_full()).unwrap();
        let d = st.next_direction(&g).unwrap().matrix;
        // m̂ = g and v̂ = g² after bias correction.
        assert!((d[(0, 0)] - 0.5 / (0.5 + 1e-8)).abs() < 1e-15);
        let d2 = st.next_direction(&g).unwrap().matrix;
        assert!((d2[(0, 1)] + 0.25 / (0.25 + 1e-8)).abs() < 1e-12);
    }

    #[test]
    fn exact_spectrum_is_known() {
        let mut rng = SeededRng::new(3);
        let g = rng.gaussian_matrix(6, 2).matmul(&rng.gaussian_matrix(2, 6)).unwrap();
        let d = update_direction(&OptimizerKind::muon_exact(), &g).unwrap();
        assert_eq!(d.spectrum().unwrap(), vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
