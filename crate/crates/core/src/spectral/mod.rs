//! Generalized eigenproblems, energy projections and subspace angles.

pub mod eigen;
pub mod projection;

pub use eigen::{eigens, eigens_with, EigenMethod, EigenOptions, EigenResult};
pub use projection::{
    energy_norm, generalized_angle, project_energy, project_onto, subspace_distance, subspace_distance_in,
    SubspaceHandle,
};
