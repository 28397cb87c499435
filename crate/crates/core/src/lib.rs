//! A numerical laboratory for one-layer linear associative memories.
//!
//! The model predicts object `k'` for query `k` with probability
//! `softmax(Ẽᵀ W E_k)[k']` and is trained on the population cross-entropy
//! under a class distribution `p`. Three update rules are compared from the
//! zero initialization: gradient descent, sign descent (Adam with its moving
//! averages switched off) and Muon (the orthogonal factor of the gradient).
//!
//! Module map:
//!
//! - [`linalg`]: dense matrices, one-sided Jacobi SVD, orthogonal factors.
//! - [`embeddings`]: orthonormal key/value embedding pairs.
//! - [`distributions`]: two-class and power-law class frequencies.
//! - [`model`]: scores, loss, gradient and balance diagnostics.
//! - [`optim`]: update rules, one-step and multi-step protocols, ρ estimators.
//! - [`oracle`]: closed-form ground truth used to validate the numerical paths.
//! - [`spectra`]: singular-spectrum isotropy metrics.
//! - [`harness`]: configuration, experiment orchestration and file output.

pub mod distributions;
pub mod embeddings;
mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod rng;
pub mod spectra;

pub use error::{Error, Result};
pub use linalg::Matrix;
