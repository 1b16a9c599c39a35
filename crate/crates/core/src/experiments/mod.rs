//! Perturbation families, stability sweeps and inequality audits.

pub mod audit;
pub mod family;
pub mod fit;
pub mod geometry_audit;
pub mod sweep;

pub use audit::{audit_eigen_lower_bound, audit_solution_gap, audit_solution_gap_suite, AuditCheck, AuditReport};
pub use family::{Perturbation, PerturbationFamily};
pub use fit::{fit_slope, SlopeFit};
pub use geometry_audit::{audit_geometry, GeometryAuditOptions, GeometrySuite, ModulusChoice};
pub use sweep::{
    angle_sweep, eigen_stability_sweep, resolvent_sweep, AngleRecord, EigenRecord, MeasuredDistances, ResolventRecord,
    SweepKind, SweepRecord, SweepReport, SweepSetup,
};
