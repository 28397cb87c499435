//! Update rules and the one-step and multi-step protocols.
//!
//! Every rule maps the gradient `G` to a direction `D` and the step is
//! `W ← W − η·D`:
//!
//! - `gd`: `D = G`
//! - `sign_gd`: `D = sign(G)`, Adam with its moving averages off
//! - `muon_exact` / `muon_ns`: the orthogonal factor of `G`, by SVD or Newton–Schulz
//! - `muon_momentum`, `adam_full`: the stateful variants

mod direction;
mod kind;
mod protocols;

pub use direction::{sign, update_direction, Direction, OptimizerState};
pub use kind::OptimizerKind;
pub use protocols::{
    first_reaching, min_eta_for_target, multi_step, one_step, rho_on_ray, rho_one_step,
    rho_trajectory, search_min_eta, EtaSearch, MultiStepOptions, Ray, RhoReport, Schedule,
    Trajectory, TrajectoryRecord, BISECTION_TOLERANCE, ETA_LIMIT, GRID_POINTS_PER_DECADE,
};
