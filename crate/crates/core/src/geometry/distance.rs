//! Excess functions and Hausdorff-type distances between raster sets.

use serde::{Deserialize, Serialize};

use super::raster::{squared_distance_field, RasterSet};
use crate::{Error, Result};

/// Excess `e(X, Y) = sup_{x ∈ X} d(x, Y)` over cell centers.
///
/// Zero for empty `X`, `+∞` when `X` is nonempty and `Y` is empty.
pub fn gap(x: &RasterSet, y: &RasterSet) -> Result<f64> {
    x.require_same_grid(y)?;
    Ok(excess(x, y))
}

fn excess(x: &RasterSet, y: &RasterSet) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let grid = x.grid();
    let Some(field) = squared_distance_field(grid, y.mask()) else {
        return f64::INFINITY;
    };
    let worst = x.mask().iter().zip(&field).filter(|(&m, _)| m).map(|(_, &d2)| d2).max().unwrap_or(0);
    (worst as f64).sqrt() * grid.h()
}

/// Co-excess `ě(X, Y) = e(box ∖ Y, box ∖ X)`.
pub fn co_gap(x: &RasterSet, y: &RasterSet) -> Result<f64> {
    x.require_same_grid(y)?;
    Ok(excess(&y.complement(), &x.complement()))
}

/// `e(X Δ Y, ∂W)` for a reference set `W` (usually one of the two).
pub fn difference_gap(x: &RasterSet, y: &RasterSet, reference: &RasterSet) -> Result<f64> {
    x.require_same_grid(y)?;
    x.require_same_grid(reference)?;
    Ok(excess(&x.symmetric_difference(y)?, &reference.boundary()))
}

/// The four Hausdorff-type distances between two raster sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HausdorffDistances {
    /// `d_H`: Hausdorff distance of the closures.
    pub closed: f64,
    /// `d^H`: Hausdorff distance of the open sets via complements.
    pub open: f64,
    /// `d^HP = max(d_H, d^H)`: upper Hausdorff–Pompeiu distance.
    pub pompeiu: f64,
    /// `d_HS`: minimum of `e(XΔY, ∂Y)`, `e(XΔY, ∂X)`, `d_H` and `d^H`.
    pub weakest: f64,
}

pub fn hausdorff_distances(x: &RasterSet, y: &RasterSet) -> Result<HausdorffDistances> {
    x.require_same_grid(y)?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyDomain("Hausdorff distances need nonempty sets".into()));
    }
    let closed = excess(x, y).max(excess(y, x));
    let (cx, cy) = (x.complement(), y.complement());
    let open = excess(&cy, &cx).max(excess(&cx, &cy));
    let sym = x.symmetric_difference(y)?;
    let to_y = excess(&sym, &y.boundary());
    let to_x = excess(&sym, &x.boundary());
    let weakest = to_y.min(to_x).min(closed).min(open);
    Ok(HausdorffDistances { closed, open, pompeiu: closed.max(open), weakest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::raster::GridGeometry;
    use crate::geometry::shape::{rasterize, ShapeSpec};

    // O(|X|·|Y|) reference over cell centers
    fn brute_gap(x: &RasterSet, y: &RasterSet) -> f64 {
        let g = x.grid();
        let ys: Vec<[f64; 2]> = y.cells().map(|(i, j)| g.center(i, j)).collect();
        x.cells()
            .map(|(i, j)| {
                let p = g.center(i, j);
                ys.iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn gap_of_a_set_with_itself_or_a_superset_is_zero() {
        let grid = GridGeometry::unit(32);
        let x = rasterize(&ShapeSpec::disk([0.5, 0.5], 0.3), &grid).unwrap();
        let y = rasterize(&ShapeSpec::disk([0.5, 0.5], 0.4), &grid).unwrap();
        assert_eq!(gap(&x, &x).unwrap(), 0.0);
        assert_eq!(gap(&x, &y).unwrap(), 0.0);
        assert_eq!(gap(&x, &RasterSet::empty(grid)).unwrap(), f64::INFINITY);
        assert_eq!(gap(&RasterSet::empty(grid), &x).unwrap(), 0.0);
    }

    #[test]
    fn shifted_strip_gap() {
        // X = [0,1]², Y = [0.25, 1.25] × [0, 1] clipped to the box [-0.5, 1.5]²
        let grid = GridGeometry::new([-0.5, -0.5], 2.0, 64).unwrap();
        let x = rasterize(&ShapeSpec::rectangle([0.0, 0.0], [1.0, 1.0]), &grid).unwrap();
        let y = rasterize(&ShapeSpec::rectangle([0.25, 0.0], [1.25, 1.0]), &grid).unwrap();
        let g = gap(&x, &y).unwrap();
        assert_eq!(g, brute_gap(&x, &y));
        assert!((g - 0.25).abs() <= grid.h() * 2f64.sqrt());
    }

    #[test]
    fn concentric_disks() {
        let grid = GridGeometry::unit(64);
        let h = grid.h();
        let a = rasterize(&ShapeSpec::disk([0.5, 0.5], 0.4), &grid).unwrap();
        let b = rasterize(&ShapeSpec::disk([0.5, 0.5], 0.3), &grid).unwrap();
        let d = hausdorff_distances(&a, &b).unwrap();
        assert_eq!(gap(&a, &b).unwrap(), brute_gap(&a, &b));
        for v in [d.closed, d.open, d.pompeiu] {
            assert!((v - 0.1).abs() <= 2.0 * h, "{v}");
        }
    }

    #[test]
    fn translated_square() {
        let grid = GridGeometry::unit(64);
        let h = grid.h();
        let s = 0.125;
        let a = rasterize(&ShapeSpec::square([0.2, 0.2], 0.4), &grid).unwrap();
        let b = rasterize(&ShapeSpec::square([0.2 + s, 0.2], 0.4), &grid).unwrap();
        let d = hausdorff_distances(&a, &b).unwrap();
        assert!((d.closed - s).abs() <= 2.0 * h);
        assert_eq!(d, hausdorff_distances(&b, &a).unwrap());
    }

    #[test]
    fn identical_sets_have_zero_distances() {
        let grid = GridGeometry::unit(32);
        let a = rasterize(&ShapeSpec::disk([0.4, 0.5], 0.25), &grid).unwrap();
        let d = hausdorff_distances(&a, &a).unwrap();
        assert_eq!(d, HausdorffDistances { closed: 0.0, open: 0.0, pompeiu: 0.0, weakest: 0.0 });
        assert!(matches!(hausdorff_distances(&a, &RasterSet::empty(grid)), Err(Error::EmptyDomain(_))));
    }

    #[test]
    fn erosion_depth_is_measured_exactly() {
        let grid = GridGeometry::new([-0.25, -0.25], 1.5, 96).unwrap();
        let h = grid.h();
        let sq = rasterize(&ShapeSpec::square([0.0, 0.0], 1.0), &grid).unwrap();
        for k in 1..5 {
            let er = crate::geometry::morphology::erode(&sq, k as f64 * h).unwrap();
            let d = hausdorff_distances(&sq, &er).unwrap();
            // the corners sit √2 deeper than the sides
            assert!((d.closed - 2f64.sqrt() * k as f64 * h).abs() < 1e-12);
            assert!((d.open - k as f64 * h).abs() < 1e-12);
            let e = difference_gap(&sq, &er, &sq).unwrap();
            assert!((e - k as f64 * h).abs() <= 2.0 * 2f64.sqrt() * h);
        }
    }
}
