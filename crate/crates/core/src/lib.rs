//! Numerical laboratory for the stability of Dirichlet eigenvalues and
//! solutions of divergence-form elliptic problems under domain perturbation.
//!
//! Domains are rasterized open subsets of a flat square box. The crate is
//! organised bottom-up:
//!
//! - [`geometry`]: moduli of continuity, raster sets, morphology,
//!   Hausdorff-type distances and the ω-cusp condition.
//! - [`fem`]: Q1 assembly of the bilinear form, Dirichlet restriction,
//!   weak solves, norms and the Friedrichs constant.
//! - [`spectral`]: generalized eigensolver, energy projections and
//!   generalized angles between subspaces.
//! - [`experiments`]: perturbation families, rate sweeps and inequality audits.
//! - [`cli`]: configuration-driven runs producing CSV/JSON artifacts.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod geometry;
pub mod spectral;

pub use error::{Error, Result};

/// Library version string, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default relative tolerance used when comparing lattice distances with a
/// physical radius, so that exact lattice ties are not lost to rounding.
pub(crate) const TIE_RTOL: f64 = 1e-9;
