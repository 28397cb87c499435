//! Experiment configuration, orchestration and output.
//!
//! An [`ExperimentConfig`] names one of four experiments. Onestep and
//! multistep runs fan out over seeds × embeddings × optimizers on a rayon pool
//! and return rows sorted by experiment id, seed, step and η, so the output
//! does not depend on scheduling or on which other seeds ran alongside.

mod config;
mod rows;
mod run;

pub use config::{Experiment, ExperimentConfig, PRESETS};
pub use rows::{sort_rows, write_csv, write_json, ResultRow, CSV_HEADER};
pub use run::{execute, read_matrices, run, RunError, RunOutput};
