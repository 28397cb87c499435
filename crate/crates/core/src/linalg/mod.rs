//! Dense matrices, SVD and orthogonal factors.

mod matrix;
mod polar;
mod svd;

pub(crate) use matrix::dot;
pub use matrix::Matrix;
pub use polar::{
    newton_schulz, orthogonal_factor_exact, orthogonal_factor_with_basis, OrthogonalFactor,
    DEFAULT_NS_ITERATIONS,
};
pub(crate) use svd::check_rank_tolerance;
pub use svd::{
    singular_spectrum, svd, svd_with_basis, RightBasis, SvdFactors, CONVERGENCE_TOLERANCE,
    DEFAULT_RANK_TOLERANCE,
};
