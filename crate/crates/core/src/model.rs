//! The one-layer linear associative memory.
//!
//! For query `k` the model assigns object `k'` the probability
//! `s(k', k, W) = softmax_{k'}(Ẽ_{k'}ᵀ W E_k)`, and is trained on the
//! population cross-entropy `L(W) = −Σ_k p_k log s(k, k, W)`.
//!
//! Internally logits are kept query-major: row `k` of the logit matrix holds
//! the scores of every object for query `k`. All products are arranged so the
//! embedding factor sits on the left, where [`Matrix::matmul`] exploits the
//! sparsity of identity and block-diagonal embeddings.

use crate::distributions::ClassDistribution;
use crate::embeddings::EmbeddingPair;
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;

/// The triple `(E, Ẽ, p)`.
#[derive(Clone, Debug)]
pub struct MemoryProblem {
    embeddings: EmbeddingPair,
    distribution: ClassDistribution,
    e_t: Matrix,
    e_til_t: Matrix,
}

/// Loss and correct-class probabilities at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// `[f_W(E_k)]_k` for every fact.
    pub correct: Vec<f64>,
    pub min_prob: f64,
    pub max_prob: f64,
}

impl Evaluation {
    /// `Δ(W) = max − min` correct-class probability.
    pub fn delta(&self) -> f64 {
        self.max_prob - self.min_prob
    }
}

impl MemoryProblem {
    pub fn new(embeddings: EmbeddingPair, distribution: ClassDistribution) -> Result<Self> {
        let k = distribution.k();
        let (e, e_til) = (&embeddings.e, &embeddings.e_til);
        if e.cols() != k || e_til.cols() != k {
            return Err(invalid(format!(
                "embeddings have {} / {} columns but the distribution has {k} classes",
                e.cols(),
                e_til.cols()
            )));
        }
        if e.rows() != k || e_til.rows() != k {
            return Err(invalid("embeddings must be square (d_s = d_o = k)"));
        }
        let e_t = e.transpose();
        let e_til_t = e_til.transpose();
        Ok(Self {
            embeddings,
            distribution,
            e_t,
            e_til_t,
        })
    }

    pub fn k(&self) -> usize {
        self.distribution.k()
    }

    pub fn embeddings(&self) -> &EmbeddingPair {
        &self.embeddings
    }

    pub fn distribution(&self) -> &ClassDistribution {
        &self.distribution
    }

    /// Shape `(d_o, d_s)` of the weight matrix.
    pub fn weight_shape(&self) -> (usize, usize) {
        (self.embeddings.e_til.rows(), self.embeddings.e.rows())
    }

    fn check_weight(&self, w: &Matrix) -> Result<()> {
        if w.shape() != self.weight_shape() {
            return Err(Error::DimensionMismatch {
                op: "memory weight",
                left: w.shape(),
                right: self.weight_shape(),
            });
        }
        Ok(())
    }

    /// Query-major logits: entry `(k, k')` is `Ẽ_{k'}ᵀ W E_k`.
    ///
    /// Linear in `w`, so logits along a ray `W₀ − ηD` can be formed from two
    /// calls without further matrix products.
    pub fn logits(&self, w: &Matrix) -> Result<Matrix> {
        self.check_weight(w)?;
        let a = self.e_til_t.matmul(w)?;
        self.e_t.matmul(&a.transpose())
    }

    /// `K × K` score matrix whose column `k` is the softmax distribution for query `k`.
    pub fn scores(&self, w: &Matrix) -> Result<Matrix> {
        let mut q = self.logits(w)?;
        for i in 0..q.rows() {
            softmax_in_place(q.row_mut(i));
        }
        Ok(q.transpose())
    }

    pub fn loss(&self, w: &Matrix) -> Result<f64> {
        Ok(self.evaluate(w)?.loss)
    }

    pub fn correct_probabilities(&self, w: &Matrix) -> Result<Vec<f64>> {
        Ok(self.evaluate(w)?.correct)
    }

    pub fn max_prob_gap(&self, w: &Matrix) -> Result<f64> {
        Ok(self.evaluate(w)?.delta())
    }

    pub fn evaluate(&self, w: &Matrix) -> Result<Evaluation> {
        Ok(self.evaluate_logits(&self.logits(w)?))
    }

    /// Loss and correct-class probabilities from query-major logits.
    ///
    /// `log s(k,k)` is formed by log-sum-exp, so the loss stays finite even
    /// when a probability underflows.
    pub fn evaluate_logits(&self, logits: &Matrix) -> Evaluation {
        let k = self.k();
        let mut loss = 0.0;
        let mut correct = Vec::with_capacity(k);
        for (i, &p) in self.distribution.p.iter().enumerate() {
            let row = logits.row(i);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|&x| (x - m).exp()).sum();
            let log_s = row[i] - m - z.ln();
            loss -= p * log_s;
            correct.push(log_s.exp());
        }
        let min_prob = correct.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_prob = correct.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Evaluation {
            loss,
            correct,
            min_prob,
            max_prob,
        }
    }

    /// `∇L(W) = Ẽ R Eᵀ` with `R[k', k] = p_k (s(k', k) − δ_{k'k})`.
    pub fn gradient(&self, w: &Matrix) -> Result<Matrix> {
        Ok(self.gradient_and_evaluation(w)?.0)
    }

    /// Gradient together with the evaluation at the same point.
    pub fn gradient_and_evaluation(&self, w: &Matrix) -> Result<(Matrix, Evaluation)> {
        let logits = self.logits(w)?;
        let eval = self.evaluate_logits(&logits);
        let mut r = logits;
        for (i, &p) in self.distribution.p.iter().enumerate() {
            let row = r.row_mut(i);
            softmax_in_place(row);
            // s_kk − 1 cancels once the fact is learned; the off-diagonal sum does not.
            row[i] = -row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, x)| x)
                .sum::<f64>();
            for x in row.iter_mut() {
                *x *= p;
            }
        }
        // r is query-major (R transposed): Ẽ R Eᵀ = Ẽ (E r)ᵀ.
        let er = self.embeddings.e.matmul(&r)?;
        let grad = self.embeddings.e_til.matmul(&er.transpose())?;
        Ok((grad, eval))
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for x in row.iter_mut() {
        *x = (*x - m).exp();
        z += *x;
    }
    for x in row.iter_mut() {
        *x /= z;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::two_class_distribution;
    use crate::embeddings::{coupled_embeddings, identity_embeddings, random_orthonormal};
    use crate::rng::SeededRng;

    fn uniform(k: usize) -> ClassDistribution {
        two_class_distribution(k, 1, 1.0 / k as f64).unwrap()
    }

    #[test]
    fn zero_weight_is_uniform() {
        let prob = MemoryProblem::new(identity_embeddings(5).unwrap(), uniform(5)).unwrap();
        let s = prob.scores(&Matrix::zeros(5, 5)).unwrap();
        assert!(s.values().iter().all(|&x| (x - 0.2).abs() < 1e-15));
        assert!((prob.loss(&Matrix::zeros(5, 5)).unwrap() - 5f64.ln()).abs() < 1e-14);
        assert_eq!(prob.max_prob_gap(&Matrix::zeros(5, 5)).unwrap(), 0.0);
    }

    #[test]
    fn two_fact_hand_softmax() {
        let prob = MemoryProblem::new(identity_embeddings(2).unwrap(), uniform(2)).unwrap();
        let t = 3f64.ln();
        let s = prob.scores(&Matrix::diag(&[t, 0.0])).unwrap();
        assert!((s[(0, 0)] - 0.75).abs() < 1e-15);
        assert!((s[(1, 0)] - 0.25).abs() < 1e-15);
        let w = Matrix::diag(&[t, t]);
        assert!((prob.loss(&w).unwrap() + 0.75f64.ln()).abs() < 1e-15);
        assert_eq!(prob.max_prob_gap(&w).unwrap(), 0.0);
    }

    #[test]
    fn columns_sum_to_one() {
        let mut rng = SeededRng::new(6);
        let prob = MemoryProblem::new(
            random_orthonormal(7, 3).unwrap(),
            two_class_distribution(7, 2, 0.7).unwrap(),
        )
        .unwrap();
        let s = prob.scores(&rng.gaussian_matrix(7, 7).scale(20.0)).unwrap();
        for j in 0..7 {
            assert!((s.column(j).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn logit_shift_leaves_scores_unchanged() {
        let mut rng = SeededRng::new(12);
        let emb = random_orthonormal(6, 9).unwrap();
        let prob = MemoryProblem::new(emb.clone(), uniform(6)).unwrap();
        let w = rng.gaussian_matrix(6, 6);
        // c·Ẽ·1·E_kᵀ adds c to every logit of query k.
        let ones_til = emb.e_til.matmul(&Matrix::ones(6, 1)).unwrap();
        let ek = emb.e.columns(2, 3);
        let shift = ones_til.matmul_transpose(&ek).unwrap().scale(4.5);
        let s0 = prob.scores(&w).unwrap();
        let s1 = prob.scores(&w.add(&shift).unwrap()).unwrap();
        assert!(s0.max_abs_diff(&s1) < 1e-12);
        let l0 = prob.logits(&w).unwrap();
        let l1 = prob.logits(&w.add(&shift).unwrap()).unwrap();
        assert!((l1[(2, 0)] - l0[(2, 0)] - 4.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let mut rng = SeededRng::new(seed);
            for emb in [
                identity_embeddings(9).unwrap(),
                coupled_embeddings(9).unwrap(),
                random_orthonormal(9, seed).unwrap(),
            ] {
                let prob =
                    MemoryProblem::new(emb, two_class_distribution(9, 3, 0.8).unwrap()).unwrap();
                let w = rng.gaussian_matrix(9, 9);
                let g = prob.gradient(&w).unwrap();
                let h = 1e-5;
                for i in 0..9 {
                    for j in 0..9 {
                        let mut wp = w.clone();
                        wp[(i, j)] += h;
                        let mut wm = w.clone();
                        wm[(i, j)] -= h;
                        let fd = (prob.loss(&wp).unwrap() - prob.loss(&wm).unwrap()) / (2.0 * h);
                        assert!((fd - g[(i, j)]).abs() < 1e-5);
                    }
                }
            }
        }
    }

    #[test]
    fn descent_along_negative_gradient() {
        for seed in 0..10 {
            let mut rng = SeededRng::new(seed);
            let prob = MemoryProblem::new(
                random_orthonormal(9, seed).unwrap(),
                two_class_distribution(9, 2, 0.6).unwrap(),
            )
            .unwrap();
            let w = rng.gaussian_matrix(9, 9);
            let g = prob.gradient(&w).unwrap();
            let step = w.add_scaled(-1e-3, &g).unwrap();
            assert!(prob.loss(&step).unwrap() < prob.loss(&w).unwrap());
        }
    }

    #[test]
    fn uniform_gradient_is_symmetric() {
        let prob = MemoryProblem::new(identity_embeddings(4).unwrap(), uniform(4)).unwrap();
        let g = prob.gradient(&Matrix::zeros(4, 4)).unwrap();
        for i in 0..4 {
            assert!((g[(i, i)] - g[(0, 0)]).abs() < 1e-16);
            for j in 0..4 {
                if i != j {
                    assert!((g[(i, j)] - g[(0, 1)]).abs() < 1e-16);
                }
            }
        }
        // −(1/K)(I − J/K)
        assert!((g[(0, 0)] + 0.25 * 0.75).abs() < 1e-16);
        assert!((g[(0, 1)] - 0.25 * 0.25).abs() < 1e-16);
    }

    #[test]
    fn rejects_wrong_shapes() {
        let prob = MemoryProblem::new(identity_embeddings(3).unwrap(), uniform(3)).unwrap();
        assert!(matches!(
            prob.gradient(&Matrix::zeros(2, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(MemoryProblem::new(identity_embeddings(3).unwrap(), uniform(4)).is_err());
    }

    #[test]
    fn loss_stays_finite_when_probabilities_underflow() {
        let prob = MemoryProblem::new(identity_embeddings(3).unwrap(), uniform(3)).unwrap();
        let w = Matrix::diag(&[-2000.0, 0.0, 0.0]);
        let eval = prob.evaluate(&w).unwrap();
        assert_eq!(eval.correct[0], 0.0);
        assert!(eval.loss.is_finite() && eval.loss > 600.0);
    }
}
