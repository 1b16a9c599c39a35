//! Raster sets, moduli of continuity, morphology, Hausdorff-type distances
//! and the ω-cusp condition on a flat square box.

pub mod cusp;
pub mod distance;
pub mod modulus;
pub mod morphology;
pub mod raster;
pub mod shape;

pub use cusp::{check_direction, cone_contains, cusp_check, CuspCondition, CuspCone, CuspOptions, CuspReport, CuspSample};
pub use distance::{co_gap, difference_gap, gap, hausdorff_distances, HausdorffDistances};
pub use modulus::{Modulus, ModulusKind, ModulusName, ModulusSpec};
pub use morphology::{dilate, erode};
pub use raster::{GridGeometry, RasterSet};
pub use shape::{from_boundary_graph, rasterize, validate_graph_modulus, GraphSide, GraphSpec, ShapeSpec};
