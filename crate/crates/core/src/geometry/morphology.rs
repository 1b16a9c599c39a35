//! Dilation (blowing) and erosion (contraction) of raster sets.
//!
//! Distances are measured between cell centers. A cell whose center lies at
//! exactly distance ε counts as reached: with cells of width h, a center at
//! lattice distance k·h sits (k − ½)·h from the cell-union boundary, so the
//! inclusive rule reproduces the continuum operations on ε = k·h.

use super::raster::{squared_distance_field, RasterSet};
use crate::{Error, Result, TIE_RTOL};

/// Whether a squared lattice distance (cell units) is within `eps` (physical).
#[inline]
pub(crate) fn within(d2: i64, eps: f64, h: f64) -> bool {
    let r = eps / h;
    (d2 as f64) <= r * r * (1.0 + TIE_RTOL)
}

fn check_radius(eps: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("morphology radius must be finite and nonnegative, got {eps}")));
    }
    Ok(())
}

/// `X^ε`: cells whose center is within ε of a member center.
///
/// Fails with `MarginError` when a positive dilation reaches the outermost
/// ring of cells.
pub fn dilate(x: &RasterSet, eps: f64) -> Result<RasterSet> {
    check_radius(eps)?;
    if eps == 0.0 || x.is_empty() {
        return Ok(x.clone());
    }
    let grid = *x.grid();
    let h = grid.h();
    let field = squared_distance_field(&grid, x.mask()).expect("nonempty");
    let mask: Vec<bool> = field.iter().map(|&d2| within(d2, eps, h)).collect();
    let out = RasterSet::from_mask(grid, mask)?;
    if !out.respects_margin() {
        return Err(Error::Margin(format!("dilation by {eps} reaches the box frame")));
    }
    Ok(out)
}

/// `X^{−ε}`: members whose ε-neighbourhood holds no complement center.
pub fn erode(x: &RasterSet, eps: f64) -> Result<RasterSet> {
    check_radius(eps)?;
    if eps == 0.0 {
        return Ok(x.clone());
    }
    let grid = *x.grid();
    let h = grid.h();
    let comp = x.complement();
    let Some(field) = squared_distance_field(&grid, comp.mask()) else {
        return Ok(x.clone());
    };
    let mask: Vec<bool> =
        x.mask().iter().zip(&field).map(|(&inside, &d2)| inside && !within(d2, eps, h)).collect();
    RasterSet::from_mask(grid, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::raster::GridGeometry;
    use crate::geometry::shape::{rasterize, ShapeSpec};
    use proptest::prelude::*;

    fn brute_dilate(x: &RasterSet, eps: f64) -> RasterSet {
        let g = *x.grid();
        let pts: Vec<[f64; 2]> = x.cells().map(|(i, j)| g.center(i, j)).collect();
        let tol = eps * (1.0 + 1e-9);
        RasterSet::from_fn(g, |p| pts.iter().any(|q| (p[0] - q[0]).hypot(p[1] - q[1]) <= tol))
    }

    fn brute_erode(x: &RasterSet, eps: f64) -> RasterSet {
        let g = *x.grid();
        let comp: Vec<[f64; 2]> = x.complement().cells().map(|(i, j)| g.center(i, j)).collect();
        let tol = eps * (1.0 + 1e-9);
        let mut mask = x.mask().to_vec();
        for (k, m) in mask.iter_mut().enumerate() {
            if *m {
                let (i, j) = g.coords(k);
                let p = g.center(i, j);
                *m = !comp.iter().any(|q| (p[0] - q[0]).hypot(p[1] - q[1]) <= tol);
            }
        }
        RasterSet::from_mask(g, mask).unwrap()
    }

    #[test]
    fn zero_radius_is_identity() {
        let grid = GridGeometry::unit(16);
        let x = rasterize(&ShapeSpec::disk([0.5, 0.5], 0.3), &grid).unwrap();
        assert_eq!(dilate(&x, 0.0).unwrap(), x);
        assert_eq!(erode(&x, 0.0).unwrap(), x);
    }

    #[test]
    fn square_grows_and_shrinks_by_the_radius() {
        let grid = GridGeometry::unit(40);
        let sq = rasterize(&ShapeSpec::square([0.25, 0.25], 0.5), &grid).unwrap();
        let grown = dilate(&sq, 0.1).unwrap();
        assert_eq!(grown, brute_dilate(&sq, 0.1));
        // side 0.7 up to one-cell rounding at the rounded corners
        let big = rasterize(&ShapeSpec::square([0.15, 0.15], 0.7), &grid).unwrap();
        assert!(grown.is_subset_of(&big));
        assert!((big.count() - grown.count()) as f64 <= 4.0 * (0.1 / grid.h()).powi(2));
        let shrunk = erode(&sq, 0.1).unwrap();
        assert_eq!(shrunk, brute_erode(&sq, 0.1));
        let small = rasterize(&ShapeSpec::square([0.35, 0.35], 0.3), &grid).unwrap();
        assert_eq!(shrunk, small);
    }

    #[test]
    fn dilation_to_the_frame_is_rejected() {
        let grid = GridGeometry::unit(16);
        let x = rasterize(&ShapeSpec::square([0.25, 0.25], 0.5), &grid).unwrap();
        assert!(matches!(dilate(&x, 0.25), Err(Error::Margin(_))));
        assert!(matches!(dilate(&x, -0.1), Err(Error::Domain(_))));
    }

    // random cells kept `pad` cells away from the frame
    fn random_set(n: usize, pad: usize) -> impl Strategy<Value = RasterSet> {
        let w = n - 2 * pad;
        proptest::collection::vec(any::<bool>(), w * w).prop_map(move |bits| {
            let grid = GridGeometry::unit(n);
            let mut mask = vec![false; n * n];
            for j in pad..n - pad {
                for i in pad..n - pad {
                    mask[grid.index(i, j)] = bits[(j - pad) * w + (i - pad)];
                }
            }
            RasterSet::from_mask(grid, mask).unwrap()
        })
    }

    proptest! {
        #[test]
        fn morphology_matches_brute_force(x in random_set(12, 2), k in 0usize..4) {
            let eps = k as f64 * 0.6 / 12.0;
            if let Ok(d) = dilate(&x, eps) {
                prop_assert_eq!(d, brute_dilate(&x, eps));
            }
            prop_assert_eq!(erode(&x, eps).unwrap(), brute_erode(&x, eps));
        }

        #[test]
        fn closing_contains_the_set(x in random_set(14, 3), k in 1usize..3) {
            let eps = k as f64 / 14.0;
            let d = dilate(&x, eps).unwrap();
            let closed = erode(&d, eps).unwrap();
            prop_assert!(x.is_subset_of(&closed));
            prop_assert!(x.is_subset_of(&d));
            prop_assert!(erode(&x, eps).unwrap().is_subset_of(&x));
        }

        #[test]
        fn dilation_is_monotone_and_composes(x in random_set(20, 6), a in 0usize..3, b in 0usize..3) {
            let h = 1.0 / 20.0;
            let (ea, eb) = (a as f64 * h, b as f64 * 0.75 * h);
            let step = dilate(&dilate(&x, ea).unwrap(), eb).unwrap();
            let once = dilate(&x, ea + eb).unwrap();
            // lattice balls do not compose exactly; a cell diagonal closes the gap
            prop_assert!(step.is_subset_of(&once));
            prop_assert!(once.is_subset_of(&dilate(&dilate(&x, ea).unwrap(), eb + 1.5 * h).unwrap()));
            prop_assert!(x.is_subset_of(&once));
            let bigger = dilate(&x, ea + h).unwrap();
            prop_assert!(dilate(&x, ea).unwrap().is_subset_of(&bigger));
        }
    }
}
