use serde::{Deserialize, Serialize};

use crate::distributions::{imbalance_ratio, two_class_distribution, ClassDistribution};
use crate::error::{invalid, Result};

/// Two-class setting with its derived constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoClassParams {
    pub k: usize,
    pub l: usize,
    pub alpha: f64,
    /// `l / k`.
    pub beta: f64,
    /// Per-fact head mass `α/(βK)`.
    pub gamma1: f64,
    /// Per-fact tail mass `(1−α)/((1−β)K)`.
    pub gamma2: f64,
    /// `sqrt(α²(1−β)³ + (1−α)²β³)`.
    pub lambda: f64,
}

impl TwoClassParams {
    pub fn new(k: usize, l: usize, alpha: f64) -> Result<Self> {
        if l == 0 || l >= k {
            return Err(invalid(format!("two-class params need 1 <= l < k, got l = {l}, k = {k}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha = {alpha} must lie in (0, 1)")));
        }
        let kf = k as f64;
        let beta = l as f64 / kf;
        Ok(Self {
            k,
            l,
            alpha,
            beta,
            gamma1: alpha / (beta * kf),
            gamma2: (1.0 - alpha) / ((1.0 - beta) * kf),
            lambda: (alpha.powi(2) * (1.0 - beta).powi(3) + (1.0 - alpha).powi(2) * beta.powi(3)).sqrt(),
        })
    }

    pub fn distribution(&self) -> ClassDistribution {
        two_class_distribution(self.k, self.l, self.alpha).expect("validated parameters")
    }

    pub fn imbalance_ratio(&self) -> f64 {
        imbalance_ratio(self.alpha, self.beta).expect("validated parameters")
    }
}
