use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{check_rank_tolerance, DEFAULT_NS_ITERATIONS, DEFAULT_RANK_TOLERANCE};

/// Update rule together with its hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum OptimizerKind {
    Gd,
    /// Adam with both moving averages disabled.
    SignGd,
    MuonExact {
        rank_tolerance: f64,
    },
    MuonNs {
        iterations: usize,
    },
    /// Muon on the accumulator `B_t = μ·B_{t−1} + G_t`.
    MuonMomentum {
        mu: f64,
        rank_tolerance: f64,
    },
    AdamFull {
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl OptimizerKind {
    pub const NAMES: [&'static str; 6] = [
        "gd",
        "sign_gd",
        "muon_exact",
        "muon_ns",
        "muon_momentum",
        "adam_full",
    ];

    pub fn muon_exact() -> Self {
        OptimizerKind::MuonExact {
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
        }
    }

    pub fn muon_ns() -> Self {
        OptimizerKind::MuonNs {
            iterations: DEFAULT_NS_ITERATIONS,
        }
    }

    pub fn muon_momentum(mu: f64) -> Self {
        OptimizerKind::MuonMomentum {
            mu,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
        }
    }

    pub fn adam_full() -> Self {
        OptimizerKind::AdamFull {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Gd => "gd",
            OptimizerKind::SignGd => "sign_gd",
            OptimizerKind::MuonExact { .. } => "muon_exact",
            OptimizerKind::MuonNs { .. } => "muon_ns",
            OptimizerKind::MuonMomentum { .. } => "muon_momentum",
            OptimizerKind::AdamFull { .. } => "adam_full",
        }
    }

    pub fn is_muon(&self) -> bool {
        matches!(
            self,
            OptimizerKind::MuonExact { .. }
                | OptimizerKind::MuonNs { .. }
                | OptimizerKind::MuonMomentum { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..1.0).contains(&x) {
                Ok(())
            } else {
                Err(invalid(format!("{name} = {x} must lie in [0, 1)")))
            }
        };
        match *self {
            OptimizerKind::Gd | OptimizerKind::SignGd => Ok(()),
            OptimizerKind::MuonExact { rank_tolerance } => check_rank_tolerance(rank_tolerance),
            OptimizerKind::MuonNs { iterations } => {
                if iterations == 0 {
                    Err(invalid("ns_iterations must be positive"))
                } else {
                    Ok(())
                }
            }
            OptimizerKind::MuonMomentum { mu, rank_tolerance } => {
                unit("momentum", mu)?;
                check_rank_tolerance(rank_tolerance)
            }
            OptimizerKind::AdamFull { beta1, beta2, eps } => {
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                if eps >= 0.0 && eps.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!("adam eps = {eps} must be finite and nonnegative")))
                }
            }
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a bare name with default hyperparameters (`muon_momentum` uses μ = 0.95).
impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(OptimizerKind::Gd),
            "sign_gd" | "signgd" | "sign" => Ok(OptimizerKind::SignGd),
            "muon_exact" | "muon" => Ok(OptimizerKind::muon_exact()),
            "muon_ns" => Ok(OptimizerKind::muon_ns()),
            "muon_momentum" => Ok(OptimizerKind::muon_momentum(0.95)),
            "adam_full" | "adam" => Ok(OptimizerKind::adam_full()),
            other => Err(invalid(format!(
                "unknown optimizer {other:?} (expected one of {})",
                OptimizerKind::NAMES.join(", ")
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse_back() {
        for name in OptimizerKind::NAMES {
            assert_eq!(name.parse::<OptimizerKind>().unwrap().name(), name);
        }
        assert!("lion".parse::<OptimizerKind>().is_err());
    }

    #[test]
    fn validation() {
        assert!(OptimizerKind::muon_momentum(1.0).validate().is_err());
        assert!(OptimizerKind::muon_momentum(0.0).validate().is_ok());
        assert!(OptimizerKind::AdamFull { beta1: 0.9, beta2: -0.1, eps: 1e-8 }
            .validate()
            .is_err());
        assert!(OptimizerKind::MuonNs { iterations: 0 }.validate().is_err());
    }

    #[test]
    fn serde_shape() {
        let json = serde_json::to_string(&OptimizerKind::muon_momentum(0.5)).unwrap();
        assert_eq!(json, r#"{"name":"muon_momentum","mu":0.5,"rank_tolerance":1e-10}"#);
        let back: OptimizerKind = serde_json::from_str(&json).unwrap();
        assert_eq!(back, OptimizerKind::muon_momentum(0.5));
    }
}
