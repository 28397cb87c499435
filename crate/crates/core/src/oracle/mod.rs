//! Closed-form ground truth for the two-class problem at zero initialization.
//!
//! Nothing here calls the softmax or the SVD of the numerical paths except
//! [`suite`], which exists to compare the two.

mod adam;
mod block_svd;
mod closed_form;
mod params;
mod structure;
mod suite;

pub use adam::{
    adam_adversarial, adam_singular_ratio, coupled_sign_pattern, identity_sign_pattern,
    singular_values_3x3, AdamAdversarial, PRINTED_ROTATED_B, PRINTED_ROTATED_SUM,
};
pub use block_svd::{
    block_constant_matrix, helmert_basis, svd_block_constant, svd_simp, svd_simp_matrix,
    ClosedFormSvd,
};
pub use closed_form::{
    gd_eta, gd_min_prob, gradient_at_zero, muon_min_eta, muon_update_closed_form,
    muon_update_projector_form, MuonCoefficients,
};
pub use params::TwoClassParams;
pub use structure::{
    multi_step_structure_check, project_onto_blocks, BlockCoefficients, StructureReport,
    STRUCTURE_VIOLATION,
};
pub use suite::{
    run_suite, scan_head_size, sign_direction_at_zero, sign_pattern_holds, sign_pattern_threshold,
    Check, SuiteConfig, SuiteReport,
};
