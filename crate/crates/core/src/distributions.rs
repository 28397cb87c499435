//! Class-frequency vectors over the K facts.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum DistributionMeta {
    /// `l` head classes sharing mass `alpha`; `beta = l / k`.
    TwoClass { alpha: f64, beta: f64, l: usize },
    /// Power-law groups with per-class sample counts.
    PowerLaw { m: u32, n_qa: u64, counts: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub p: Vec<f64>,
    pub meta: DistributionMeta,
}

impl ClassDistribution {
    pub fn k(&self) -> usize {
        self.p.len()
    }
}

/// `p_i = alpha / l` on the first `l` classes and `(1 − alpha) / (k − l)` on the rest.
pub fn two_class_distribution(k: usize, l: usize, alpha: f64) -> Result<ClassDistribution> {
    if l == 0 || l >= k {
        return Err(invalid(format!("two-class law needs 1 <= l < k, got l = {l}, k = {k}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let head = alpha / l as f64;
    let tail = (1.0 - alpha) / (k - l) as f64;
    let p = (0..k).map(|i| if i < l { head } else { tail }).collect();
    Ok(ClassDistribution {
        p,
        meta: DistributionMeta::TwoClass {
            alpha,
            beta: l as f64 / k as f64,
            l,
        },
    })
}

/// Sample counts of the power-law generator: group `g = 0..=m` holds
/// `N_0 = 1`, `N_g = 2^(g−1)` classes, each with `2^(m−g) · n_qa` samples.
pub fn power_law_counts(m: u32, n_qa: u64) -> Result<Vec<u64>> {
    if m > 40 {
        return Err(invalid(format!("power-law depth m = {m} is too large")));
    }
    if n_qa == 0 {
        return Err(invalid("n_qa must be positive"));
    }
    let mut counts = Vec::with_capacity(1usize << m);
    for g in 0..=m {
        let classes = if g == 0 { 1u64 } else { 1u64 << (g - 1) };
        let samples = (1u64 << (m - g)) * n_qa;
        counts.extend(std::iter::repeat_n(samples, classes as usize));
    }
    Ok(counts)
}

/// Normalized [`power_law_counts`]; head classes come first.
pub fn power_law_distribution(m: u32, n_qa: u64) -> Result<ClassDistribution> {
    let counts = power_law_counts(m, n_qa)?;
    let total: u64 = counts.iter().sum();
    let p = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(ClassDistribution {
        p,
        meta: DistributionMeta::PowerLaw { m, n_qa, counts },
    })
}

/// `min{α(1−β)/(β(1−α)), β(1−α)/(α(1−β))}`, in `(0, 1]`.
pub fn imbalance_ratio(alpha: f64, beta: f64) -> Result<f64> {
    for (name, x) in [("alpha", alpha), ("beta", beta)] {
        if !(x > 0.0 && x < 1.0) {
            return Err(invalid(format!("{name} = {x} must lie strictly inside (0, 1)")));
        }
    }
    let odds = alpha * (1.0 - beta) / (beta * (1.0 - alpha));
    Ok(odds.min(1.0 / odds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_class_values() {
        let d = two_class_distribution(10, 2, 0.8).unwrap();
        let mut expected = vec![0.4, 0.4];
        expected.extend([0.025; 8]);
        for (x, y) in d.p.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-15);
        }
        let u = two_class_distribution(10, 2, 0.2).unwrap();
        assert!(u.p.iter().all(|&x| (x - 0.1).abs() < 1e-15));
    }

    #[test]
    fn two_class_rejects_degenerate_split() {
        assert!(two_class_distribution(10, 0, 0.5).is_err());
        assert!(two_class_distribution(10, 10, 0.5).is_err());
        assert!(two_class_distribution(10, 2, 1.0).is_err());
    }

    #[test]
    fn toy_setting_records_realized_beta() {
        let d = two_class_distribution(999, 200, 0.8).unwrap();
        match d.meta {
            DistributionMeta::TwoClass { beta, .. } => assert!((beta - 200.0 / 999.0).abs() < 1e-15),
            _ => unreachable!(),
        }
        assert!((d.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((d.p[..200].iter().sum::<f64>() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn power_law_small() {
        let d = power_law_distribution(2, 6).unwrap();
        assert_eq!(
            d.meta,
            DistributionMeta::PowerLaw { m: 2, n_qa: 6, counts: vec![24, 12, 6, 6] }
        );
        assert_eq!(d.p, vec![0.5, 0.25, 0.125, 0.125]);
        assert_eq!(power_law_distribution(0, 1).unwrap().p, vec![1.0]);
    }

    #[test]
    fn power_law_large() {
        let counts = power_law_counts(15, 6).unwrap();
        assert_eq!(counts.len(), 32768);
        assert_eq!(counts[0], 196_608);
        assert_eq!(counts[16384..].len(), 16384);
        assert!(counts[16384..].iter().all(|&c| c == 6));
    }

    #[test]
    fn imbalance_ratio_values() {
        assert_eq!(imbalance_ratio(0.5, 0.5).unwrap(), 1.0);
        assert!((imbalance_ratio(0.8, 0.2).unwrap() - 0.0625).abs() < 1e-15);
        assert!(imbalance_ratio(0.0, 0.5).is_err());
        assert!(imbalance_ratio(0.5, 1.0).is_err());
    }
}
