//! Closed forms at the zero initialization under the two-class law.
//!
//! Matrices are assembled in embedding coordinates (`M` with `W = Ẽ·M·Eᵀ`)
//! straight from the formulas and only then mapped back with the embeddings.

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingPair;
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;

use super::params::TwoClassParams;

fn check_embeddings(params: &TwoClassParams, emb: &EmbeddingPair) -> Result<()> {
    if emb.k() != params.k {
        return Err(Error::DimensionMismatch {
            op: "oracle embeddings",
            left: emb.e.shape(),
            right: (params.k, params.k),
        });
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("eps = {eps} must lie in (0, 1)")))
    }
}

fn to_weight_space(m: &Matrix, emb: &EmbeddingPair) -> Result<Matrix> {
    emb.e_til.matmul(m)?.matmul_transpose(&emb.e)
}

/// `∇L(W₀)`, from
/// `−∇L(W₀) = (α/L)Ẽ_HE_Hᵀ + ((1−α)/(K−L))Ẽ_TE_Tᵀ − (α/(LK))ẼJ_{K,L}E_Hᵀ − ((1−α)/((K−L)K))ẼJ_{K,K−L}E_Tᵀ`
/// where `H` and `T` are the head and tail columns.
pub fn gradient_at_zero(params: &TwoClassParams, emb: &EmbeddingPair) -> Result<Matrix> {
    check_embeddings(params, emb)?;
    let (k, l, a) = (params.k, params.l, params.alpha);
    let (kf, lf) = (k as f64, l as f64);
    let head_diag = a / lf;
    let tail_diag = (1.0 - a) / (kf - lf);
    let head_j = a / (lf * kf);
    let tail_j = (1.0 - a) / ((kf - lf) * kf);
    // Column index is the key side; every row of a J-term block is constant.
    let neg = Matrix::from_fn(k, k, |row, col| {
        let (diag, j) = if col < l { (head_diag, head_j) } else { (tail_diag, tail_j) };
        let d = if row == col { diag } else { 0.0 };
        d - j
    });
    Ok(to_weight_space(&neg, emb)?.scale(-1.0))
}

/// Step size at which one GD step from zero brings the head facts to `1 − eps`:
/// `ln((1/ε − 1)(K − 1)) / max{γ₁, γ₂}`.
pub fn gd_eta(params: &TwoClassParams, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let gamma = params.gamma1.max(params.gamma2);
    Ok(((1.0 / eps - 1.0) * (params.k as f64 - 1.0)).ln() / gamma)
}

/// Smallest correct probability after that step:
/// `1 − ε / (ε + (1−ε)^r ε^{1−r} (K−1)^{r−1})` with `r` the imbalance ratio.
pub fn gd_min_prob(params: &TwoClassParams, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let r = params.imbalance_ratio();
    let x = (1.0 - eps).powf(r) * eps.powf(1.0 - r) * (params.k as f64 - 1.0).powf(r - 1.0);
    Ok(1.0 - eps / (eps + x))
}

/// Coefficients of the four `J`-block corrections (each scaled by `1/K`) in
/// the Muon direction at zero, `−G = ẼEᵀ + (1/K)·Σ c·Ẽ_i J E_jᵀ`.
///
/// Rows index the value side, columns the key side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuonCoefficients {
    pub head_head: f64,
    pub head_tail: f64,
    pub tail_head: f64,
    pub tail_tail: f64,
}

impl MuonCoefficients {
    pub fn new(params: &TwoClassParams) -> Self {
        let (a, b, lam) = (params.alpha, params.beta, params.lambda);
        Self {
            head_head: ((1.0 - b).powi(2) * a / lam - 1.0) / b,
            tail_tail: (b * b * (1.0 - a) / lam - 1.0) / (1.0 - b),
            head_tail: -b * (1.0 - a) / lam,
            tail_head: -a * (1.0 - b) / lam,
        }
    }

    pub fn max_abs(&self) -> f64 {
        [self.head_head, self.head_tail, self.tail_head, self.tail_tail]
            .iter()
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Muon direction `G` at `W₀` (the step is `W₀ − η·G`) from the expanded
/// block form.
pub fn muon_update_closed_form(params: &TwoClassParams, emb: &EmbeddingPair) -> Result<Matrix> {
    check_embeddings(params, emb)?;
    let c = MuonCoefficients::new(params);
    let (k, l) = (params.k, params.l);
    let kf = k as f64;
    let neg = Matrix::from_fn(k, k, |row, col| {
        let coef = match (row < l, col < l) {
            (true, true) => c.head_head,
            (true, false) => c.head_tail,
            (false, true) => c.tail_head,
            (false, false) => c.tail_tail,
        };
        let d = if row == col { 1.0 } else { 0.0 };
        d + coef / kf
    });
    Ok(to_weight_space(&neg, emb)?.scale(-1.0))
}

/// The same direction from its projector plus rank-one form:
/// `−G = Ẽ_H(I − J/L)E_Hᵀ + Ẽ_T(I − J/(K−L))E_Tᵀ + u·wᵀ / sqrt(K[α²(K−L)³ + (1−α)²L³])`
/// with `u = (K−L)·1_H − L·1_T` and `w = ((K−L)α/L)·1_H − (L(1−α)/(K−L))·1_T`.
pub fn muon_update_projector_form(params: &TwoClassParams, emb: &EmbeddingPair) -> Result<Matrix> {
    check_embeddings(params, emb)?;
    let (k, l, a) = (params.k, params.l, params.alpha);
    let (kf, lf) = (k as f64, l as f64);
    let tf = kf - lf;
    let scale = 1.0 / (kf * (a * a * tf.powi(3) + (1.0 - a).powi(2) * lf.powi(3))).sqrt();
    let neg = Matrix::from_fn(k, k, |row, col| {
        let same_group = (row < l) == (col < l);
        let projector = if !same_group {
            0.0
        } else {
            let size = if row < l { lf } else { tf };
            (if row == col { 1.0 } else { 0.0 }) - 1.0 / size
        };
        let u = if row < l { tf } else { -lf };
        let w = if col < l { tf * a / lf } else { -lf * (1.0 - a) / tf };
        projector + scale * u * w
    });
    Ok(to_weight_space(&neg, emb)?.scale(-1.0))
}

/// Smallest η at which one Muon step from zero brings some fact to `1 − eps`,
/// solved on the scalar head/tail probabilities implied by the closed form.
pub fn muon_min_eta(params: &TwoClassParams, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let target = 1.0 - eps;
    let c = MuonCoefficients::new(params);
    let (kf, lf) = (params.k as f64, params.l as f64);
    let head_gap = 1.0 + (c.head_head - c.tail_head) / kf;
    let tail_gap = 1.0 + (c.tail_tail - c.head_tail) / kf;
    let best = |eta: f64| {
        let head = 1.0 / (1.0 + (lf - 1.0) * (-eta).exp() + (kf - lf) * (-eta * head_gap).exp());
        let tail = 1.0 / (1.0 + (kf - lf - 1.0) * (-eta).exp() + lf * (-eta * tail_gap).exp());
        head.max(tail)
    };
    if best(0.0) >= target {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while best(hi) < target {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::TargetUnreachable { target, limit: 1e9 });
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if best(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{coupled_embeddings, identity_embeddings};

    #[test]
    fn gradient_entries_identity() {
        let p = TwoClassParams::new(10, 2, 0.8).unwrap();
        let g = gradient_at_zero(&p, &identity_embeddings(10).unwrap()).unwrap();
        assert!((g[(0, 0)] + 0.4 * 0.9).abs() < 1e-15);
        assert!((g[(1, 0)] - 0.04).abs() < 1e-15);
        assert!((g[(5, 5)] + 0.025 * 0.9).abs() < 1e-15);
    }

    #[test]
    fn uniform_gradient() {
        let p = TwoClassParams::new(9, 3, 1.0 / 3.0).unwrap();
        let emb = coupled_embeddings(9).unwrap();
        let g = gradient_at_zero(&p, &emb).unwrap();
        let m = Matrix::identity(9).add_scaled(-1.0 / 9.0, &Matrix::ones(9, 9)).unwrap();
        let expected = emb.e_til.matmul(&m).unwrap().matmul_transpose(&emb.e).unwrap().scale(-1.0 / 9.0);
        assert!(g.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn gd_constants() {
        let p = TwoClassParams::new(1000, 200, 0.8).unwrap();
        let eta = gd_eta(&p, 0.1).unwrap();
        assert!((eta - 250.0 * (9.0f64 * 999.0).ln()).abs() < 1e-9);
        let m = gd_min_prob(&p, 0.1).unwrap();
        assert!((m - 1.765e-3).abs() < 1e-5, "{m}");
        let two = TwoClassParams::new(2, 1, 0.5).unwrap();
        assert_eq!(gd_eta(&two, 0.5).unwrap(), 0.0);
        assert!(gd_eta(&p, 1.0).is_err());
    }

    #[test]
    fn balanced_min_prob_is_target() {
        let p = TwoClassParams::new(50, 10, 0.2).unwrap();
        assert!((gd_min_prob(&p, 0.1).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn gd_min_prob_increases_with_balance() {
        // α = β·ρ/(…) is awkward to invert; scan α towards β instead.
        let mut prev = 0.0;
        for i in 0..20 {
            let alpha = 0.8 - 0.03 * i as f64;
            let p = TwoClassParams::new(100, 20, alpha).unwrap();
            let m = gd_min_prob(&p, 0.1).unwrap();
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn expanded_and_projector_forms_agree() {
        for &(k, l, a) in &[(12, 3, 0.8), (60, 12, 0.8), (30, 21, 0.3)] {
            let p = TwoClassParams::new(k, l, a).unwrap();
            let emb = identity_embeddings(k).unwrap();
            let g1 = muon_update_closed_form(&p, &emb).unwrap();
            let g2 = muon_update_projector_form(&p, &emb).unwrap();
            assert!(g1.max_abs_diff(&g2) < 1e-14, "k={k}");
        }
    }

    #[test]
    fn balanced_coefficients_are_symmetric() {
        let p = TwoClassParams::new(40, 8, 0.2).unwrap();
        let c = MuonCoefficients::new(&p);
        assert!((c.head_head - c.tail_tail).abs() < 1e-12);
        assert!((c.head_tail - c.tail_head).abs() < 1e-12);
    }
}
