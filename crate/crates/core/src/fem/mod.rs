//! Q1 finite elements for `−div(A∇u)` on raster domains with homogeneous
//! Dirichlet data.

pub mod coefficient;
pub mod load;
pub mod sparse;
pub mod system;

pub use coefficient::{sym_eigenvalues, CoefficientBounds, CoefficientField, CoefficientSpec, Mat2};
pub use load::LoadSpec;
pub use sparse::CsrMatrix;
pub use system::{
    assemble, solve_dirichlet, AmbientSystem, DirichletSystem, DualNorms, EnergyNorm, Factor, FieldNorms,
    FieldVector, Quadrature, Solution,
};

use std::sync::Arc;

use crate::geometry::GridGeometry;
use crate::Result;

/// Friedrichs constant `p = 1/λ_min` of the Dirichlet problem on the whole box.
pub fn friedrichs_constant(grid: &GridGeometry, coeff: &CoefficientField) -> Result<f64> {
    let amb: Arc<AmbientSystem> = assemble(grid, coeff, Quadrature::Gauss2)?;
    amb.friedrichs_constant()
}
