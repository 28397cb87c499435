use memlab_core::embeddings::{EmbeddingKind, EmbeddingPair};
use memlab_core::distributions::two_class_distribution;
use memlab_core::linalg::singular_spectrum;
use memlab_core::model::MemoryProblem;
use memlab_core::optim::{sign, update_direction, OptimizerKind};
use memlab_core::spectra::{effective_rank, normalized_entropy, spectrum_metrics, top_k_energy};
use memlab_core::Matrix;
use proptest::prelude::*;

fn spectrum() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..10.0, 2..40)
}

fn matrix(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3.0f64..3.0, r * c).prop_map(move |v| Matrix::new(r, c, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_ignore_scale(sigma in spectrum(), c in 1e-3f64..1e3) {
        let scaled: Vec<f64> = sigma.iter().map(|s| s * c).collect();
        let (a, b) = (spectrum_metrics(&sigma, &[1, 5]).unwrap(), spectrum_metrics(&scaled, &[1, 5]).unwrap());
        prop_assert!((a.h_norm - b.h_norm).abs() < 1e-10);
        prop_assert!((a.erank - b.erank).abs() < 1e-8);
        prop_assert!((a.top_e[&5] - b.top_e[&5]).abs() < 1e-10);
    }

    #[test]
    fn erank_and_entropy_bounded(sigma in spectrum()) {
        let n = sigma.len() as f64;
        let e = effective_rank(&sigma).unwrap();
        let h = normalized_entropy(&sigma).unwrap();
        prop_assert!((1.0 - 1e-12..=n + 1e-9).contains(&e));
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&h));
    }

    #[test]
    fn top_energy_monotone(sigma in spectrum()) {
        let mut prev = 0.0;
        for k in 1..=sigma.len() {
            let t = top_k_energy(&sigma, k).unwrap();
            prop_assert!(t + 1e-12 >= prev);
            prev = t;
        }
        prop_assert!((prev - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_pairs_to_l1(g in matrix(12)) {
        let inner = g.frobenius_inner(&sign(&g)).unwrap();
        prop_assert!((inner - g.l1_norm()).abs() <= 1e-10 * (1.0 + g.l1_norm()));
    }

    #[test]
    fn muon_pairs_to_nuclear(g in matrix(12)) {
        let nuclear: f64 = singular_spectrum(&g).unwrap().iter().sum();
        let o = update_direction(&OptimizerKind::muon_exact(), &g).unwrap().matrix;
        prop_assert!((g.frobenius_inner(&o).unwrap() - nuclear).abs() <= 1e-8 * (1.0 + nuclear));
        prop_assert!(singular_spectrum(&o).unwrap().iter().all(|&s| s < 1.0 + 1e-9));
    }

    #[test]
    fn singular_values_match_frobenius(a in matrix(16)) {
        let s = singular_spectrum(&a).unwrap();
        let sum_sq: f64 = s.iter().map(|x| x * x).sum();
        prop_assert!((sum_sq.sqrt() - a.frobenius_norm()).abs() <= 1e-10 * (1.0 + a.frobenius_norm()));
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn scores_are_distributions(k in 3usize..25, seed in 0u64..50, scale in 0.0f64..5.0) {
        let k = k - k % 3;
        let l = (k / 3).max(1);
        for kind in EmbeddingKind::ALL {
            let p = MemoryProblem::new(
                EmbeddingPair::build(kind, k, seed).unwrap(),
                two_class_distribution(k, l, 0.8).unwrap(),
            ).unwrap();
            let w = Matrix::from_fn(k, k, |i, j| scale * ((i * 7 + j * 3) % 5) as f64 - scale);
            let probs = p.correct_probabilities(&w).unwrap();
            prop_assert!(probs.iter().all(|&q| q > 0.0 && q <= 1.0));
            prop_assert!(p.loss(&w).unwrap() >= 0.0);
        }
    }
}
