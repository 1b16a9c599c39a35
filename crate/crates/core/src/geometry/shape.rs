//! Analytic open shapes and their rasterization.

use serde::{Deserialize, Serialize};

use super::modulus::Modulus;
use super::raster::{GridGeometry, RasterSet};
use crate::{Error, Result};

/// Which side of a boundary graph the domain occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSide {
    /// `{ y < g(x) }`
    Below,
    /// `{ y > g(x) }`
    Above,
}

/// Domain bounded by the graph of a sampled function.
///
/// `samples[k]` is `g` at `x = x_range[0] + k·(x_range[1] − x_range[0])/(N−1)`,
/// linearly interpolated in between. The domain is
/// `{ x_range[0] < x < x_range[1], floor < y < g(x) }` for [`GraphSide::Below`]
/// (`g(x) < y < ceiling` for [`GraphSide::Above`]), where the unused bound
/// defaults to the box frame inset by one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub samples: Vec<f64>,
    pub side: GraphSide,
    #[serde(default)]
    pub x_range: Option<[f64; 2]>,
    #[serde(default)]
    pub bound: Option<f64>,
}

/// An open planar shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Disk { center: [f64; 2], radius: f64 },
    Rectangle { min: [f64; 2], max: [f64; 2] },
    /// Simple polygon, vertices in order (either orientation).
    Polygon { vertices: Vec<[f64; 2]> },
    Graph(GraphSpec),
    Union { shapes: Vec<ShapeSpec> },
    Intersection { shapes: Vec<ShapeSpec> },
    Difference { base: Box<ShapeSpec>, minus: Box<ShapeSpec> },
}

impl ShapeSpec {
    pub fn disk(center: [f64; 2], radius: f64) -> Self {
        ShapeSpec::Disk { center, radius }
    }

    pub fn rectangle(min: [f64; 2], max: [f64; 2]) -> Self {
        ShapeSpec::Rectangle { min, max }
    }

    /// Square `[lo, lo + side]²`.
    pub fn square(lo: [f64; 2], side: f64) -> Self {
        ShapeSpec::Rectangle { min: lo, max: [lo[0] + side, lo[1] + side] }
    }

    /// Same shape moved by `shift`.
    pub fn translated(&self, shift: [f64; 2]) -> ShapeSpec {
        let mv = |p: [f64; 2]| [p[0] + shift[0], p[1] + shift[1]];
        match self {
            ShapeSpec::Disk { center, radius } => ShapeSpec::Disk { center: mv(*center), radius: *radius },
            ShapeSpec::Rectangle { min, max } => ShapeSpec::Rectangle { min: mv(*min), max: mv(*max) },
            ShapeSpec::Polygon { vertices } => {
                ShapeSpec::Polygon { vertices: vertices.iter().map(|&v| mv(v)).collect() }
            }
            ShapeSpec::Graph(g) => ShapeSpec::Graph(GraphSpec {
                samples: g.samples.iter().map(|s| s + shift[1]).collect(),
                side: g.side,
                x_range: g.x_range.map(|r| [r[0] + shift[0], r[1] + shift[0]]),
                bound: g.bound.map(|b| b + shift[1]),
            }),
            ShapeSpec::Union { shapes } => {
                ShapeSpec::Union { shapes: shapes.iter().map(|s| s.translated(shift)).collect() }
            }
            ShapeSpec::Intersection { shapes } => {
                ShapeSpec::Intersection { shapes: shapes.iter().map(|s| s.translated(shift)).collect() }
            }
            ShapeSpec::Difference { base, minus } => ShapeSpec::Difference {
                base: Box::new(base.translated(shift)),
                minus: Box::new(minus.translated(shift)),
            },
        }
    }

    /// Open-set membership of a point. Graph shapes need the grid to resolve
    /// their default bounds.
    pub fn contains(&self, p: [f64; 2], grid: &GridGeometry) -> bool {
        match self {
            ShapeSpec::Disk { center, radius } => (p[0] - center[0]).hypot(p[1] - center[1]) < *radius,
            ShapeSpec::Rectangle { min, max } => p[0] > min[0] && p[0] < max[0] && p[1] > min[1] && p[1] < max[1],
            ShapeSpec::Polygon { vertices } => point_in_polygon(p, vertices),
            ShapeSpec::Graph(g) => {
                let ([a, b], bound) = graph_frame(g, grid);
                if !(p[0] > a && p[0] < b) {
                    return false;
                }
                let y = graph_value(&g.samples, a, b, p[0]);
                match g.side {
                    GraphSide::Below => p[1] > bound && p[1] < y,
                    GraphSide::Above => p[1] > y && p[1] < bound,
                }
            }
            ShapeSpec::Union { shapes } => shapes.iter().any(|s| s.contains(p, grid)),
            ShapeSpec::Intersection { shapes } => !shapes.is_empty() && shapes.iter().all(|s| s.contains(p, grid)),
            ShapeSpec::Difference { base, minus } => base.contains(p, grid) && !minus.contains(p, grid),
        }
    }

    /// Axis-aligned bounding box, `None` for shapes that are trivially empty.
    pub fn bounding_box(&self, grid: &GridGeometry) -> Option<([f64; 2], [f64; 2])> {
        match self {
            ShapeSpec::Disk { center, radius } => {
                (*radius > 0.0).then(|| ([center[0] - radius, center[1] - radius], [center[0] + radius, center[1] + radius]))
            }
            ShapeSpec::Rectangle { min, max } => (max[0] > min[0] && max[1] > min[1]).then_some((*min, *max)),
            ShapeSpec::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return None;
                }
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for d in 0..2 {
                        lo[d] = lo[d].min(v[d]);
                        hi[d] = hi[d].max(v[d]);
                    }
                }
                Some((lo, hi))
            }
            ShapeSpec::Graph(g) => {
                let ([a, b], bound) = graph_frame(g, grid);
                let gmin = g.samples.iter().cloned().fold(f64::INFINITY, f64::min);
                let gmax = g.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let (lo, hi) = match g.side {
                    GraphSide::Below => (bound, gmax),
                    GraphSide::Above => (gmin, bound),
                };
                (b > a && hi > lo).then_some(([a, lo], [b, hi]))
            }
            ShapeSpec::Union { shapes } => shapes.iter().filter_map(|s| s.bounding_box(grid)).reduce(|x, y| {
                ([x.0[0].min(y.0[0]), x.0[1].min(y.0[1])], [x.1[0].max(y.1[0]), x.1[1].max(y.1[1])])
            }),
            ShapeSpec::Intersection { shapes } => {
                let boxes: Vec<_> = shapes.iter().map(|s| s.bounding_box(grid)).collect();
                if boxes.is_empty() || boxes.iter().any(|b| b.is_none()) {
                    return None;
                }
                boxes.into_iter().flatten().reduce(|x, y| {
                    ([x.0[0].max(y.0[0]), x.0[1].max(y.0[1])], [x.1[0].min(y.1[0]), x.1[1].min(y.1[1])])
                })
            }
            ShapeSpec::Difference { base, .. } => base.bounding_box(grid),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ShapeSpec::Disk { radius, .. } if !(*radius >= 0.0) => {
                Err(Error::Domain(format!("disk radius must be nonnegative, got {radius}")))
            }
            ShapeSpec::Graph(g) if g.samples.len() < 2 => {
                Err(Error::Domain("boundary graph needs at least two samples".into()))
            }
            ShapeSpec::Union { shapes } | ShapeSpec::Intersection { shapes } => {
                shapes.iter().try_for_each(|s| s.validate())
            }
            ShapeSpec::Difference { base, minus } => {
                base.validate()?;
                minus.validate()
            }
            _ => Ok(()),
        }
    }
}

pub(crate) fn graph_frame(g: &GraphSpec, grid: &GridGeometry) -> ([f64; 2], f64) {
    let h = grid.h();
    let range = g.x_range.unwrap_or([grid.origin[0] + h, grid.origin[0] + grid.side - h]);
    let bound = g.bound.unwrap_or(match g.side {
        GraphSide::Below => grid.origin[1] + h,
        GraphSide::Above => grid.origin[1] + grid.side - h,
    });
    (range, bound)
}

pub(crate) fn graph_value(samples: &[f64], a: f64, b: f64, x: f64) -> f64 {
    let m = samples.len() - 1;
    let t = ((x - a) / (b - a) * m as f64).clamp(0.0, m as f64);
    let k = (t.floor() as usize).min(m - 1);
    let s = t - k as f64;
    samples[k] * (1.0 - s) + samples[k + 1] * s
}

fn point_in_polygon(p: [f64; 2], vertices: &[[f64; 2]]) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[j]);
        // points on an edge are outside the open polygon
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let within = p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1]);
        if cross.abs() <= 1e-14 * (1.0 + a[0].abs() + a[1].abs()) && within {
            return false;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Cells whose centers lie in the open shape.
///
/// The shape's bounding box must lie in the closed box (`MarginError`
/// otherwise) and at least one cell must be selected (`EmptyDomain`).
pub fn rasterize(shape: &ShapeSpec, grid: &GridGeometry) -> Result<RasterSet> {
    grid.validate()?;
    shape.validate()?;
    let Some((lo, hi)) = shape.bounding_box(grid) else {
        return Err(Error::EmptyDomain("shape has empty extent".into()));
    };
    if !grid.contains_box(lo, hi) {
        return Err(Error::Margin(format!(
            "shape extent [{:?}, {:?}] leaves the box [{:?}, side {}]",
            lo, hi, grid.origin, grid.side
        )));
    }
    let set = RasterSet::from_fn(*grid, |p| shape.contains(p, grid));
    if set.is_empty() {
        return Err(Error::EmptyDomain("no cell center lies in the shape".into()));
    }
    Ok(set)
}

/// Check `|g(a) − g(b)| ≤ c·ω(|a − b|)` over all sample pairs of a graph.
pub fn validate_graph_modulus(g: &GraphSpec, grid: &GridGeometry, modulus: &Modulus, c: f64) -> Result<()> {
    let ([a, b], _) = graph_frame(g, grid);
    let m = g.samples.len();
    if m < 2 {
        return Err(Error::Domain("boundary graph needs at least two samples".into()));
    }
    let dx = (b - a) / (m - 1) as f64;
    let scaled = modulus.scaled(c)?;
    for i in 0..m {
        for j in i + 1..m {
            let dist = (j - i) as f64 * dx;
            let bound = scaled.eval(dist.min(scaled.r_max()))?;
            let jump = (g.samples[i] - g.samples[j]).abs();
            if jump > bound * (1.0 + 1e-12) + 1e-15 {
                return Err(Error::Modulus(format!(
                    "|g({:.6}) - g({:.6})| = {jump:.6e} exceeds {c}·ω({dist:.6e}) = {bound:.6e}",
                    a + i as f64 * dx,
                    a + j as f64 * dx
                )));
            }
        }
    }
    Ok(())
}

/// Rasterize the sub- or epigraph of a sampled boundary function after
/// checking that its sampled increments respect `c·ω`.
pub fn from_boundary_graph(g: &GraphSpec, modulus: &Modulus, c: f64, grid: &GridGeometry) -> Result<RasterSet> {
    validate_graph_modulus(g, grid, modulus, c)?;
    rasterize(&ShapeSpec::Graph(g.clone()), grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_area_matches_continuum() {
        let grid = GridGeometry::unit(64);
        let d = rasterize(&ShapeSpec::disk([0.5, 0.5], 0.25), &grid).unwrap();
        let exact = PI * 0.0625;
        assert!((d.area() - exact).abs() / exact < 0.01);
    }

    #[test]
    fn rectangle_cell_count() {
        let grid = GridGeometry::unit(4);
        let r = rasterize(&ShapeSpec::rectangle([0.25, 0.25], [0.75, 0.75]), &grid).unwrap();
        assert_eq!(r.count(), 4);
    }

    #[test]
    fn degenerate_and_escaping_shapes() {
        let grid = GridGeometry::unit(16);
        assert!(matches!(rasterize(&ShapeSpec::disk([0.5, 0.5], 0.0), &grid), Err(Error::EmptyDomain(_))));
        assert!(matches!(rasterize(&ShapeSpec::disk([0.9, 0.5], 0.2), &grid), Err(Error::Margin(_))));
        // a tiny disk between cell centers selects nothing
        assert!(matches!(rasterize(&ShapeSpec::disk([0.5, 0.5], 0.01), &grid), Err(Error::EmptyDomain(_))));
    }

    #[test]
    fn polygon_and_boolean_combinations() {
        let grid = GridGeometry::unit(32);
        let tri = ShapeSpec::Polygon { vertices: vec![[0.1, 0.1], [0.9, 0.1], [0.1, 0.9]] };
        let t = rasterize(&tri, &grid).unwrap();
        assert!((t.area() - 0.32).abs() < 0.03);
        let sq = ShapeSpec::rectangle([0.1, 0.1], [0.9, 0.9]);
        let hole = ShapeSpec::disk([0.5, 0.5], 0.2);
        let ring = ShapeSpec::Difference { base: Box::new(sq.clone()), minus: Box::new(hole.clone()) };
        let a = rasterize(&ring, &grid).unwrap();
        let b = rasterize(&sq, &grid).unwrap().difference(&rasterize(&hole, &grid).unwrap()).unwrap();
        assert_eq!(a, b);
        let u = ShapeSpec::Union { shapes: vec![tri, hole] };
        assert!(rasterize(&u, &grid).unwrap().count() >= t.count());
    }

    #[test]
    fn constant_graph_is_a_rectangle() {
        let grid = GridGeometry::unit(16);
        let g = GraphSpec { samples: vec![0.5; 5], side: GraphSide::Below, x_range: None, bound: None };
        let set = from_boundary_graph(&g, &Modulus::lipschitz(1.0), 1.0, &grid).unwrap();
        let h = grid.h();
        let rect = rasterize(&ShapeSpec::rectangle([h, h], [1.0 - h, 0.5]), &grid).unwrap();
        assert_eq!(set, rect);
    }

    #[test]
    fn graph_modulus_validation() {
        let grid = GridGeometry::unit(64);
        let t: Vec<f64> = (0..201).map(|k| k as f64 / 200.0).collect();
        let sine = GraphSpec {
            samples: t.iter().map(|&x| 0.5 + 0.1 * (2.0 * PI * x).sin()).collect(),
            side: GraphSide::Below,
            x_range: Some([0.0, 1.0]),
            bound: Some(0.1),
        };
        validate_graph_modulus(&sine, &grid, &Modulus::lipschitz(1.0), 0.2 * PI).unwrap();

        // sawtooth of amplitude 0.3 and slope 10 against a declared unit slope
        let saw = GraphSpec {
            samples: t.iter().map(|&x| 0.4 + 0.3 * ((x * 10.0 / 0.3) % 1.0)).collect(),
            side: GraphSide::Below,
            x_range: Some([0.0, 1.0]),
            bound: Some(0.05),
        };
        assert!(matches!(
            from_boundary_graph(&saw, &Modulus::lipschitz(1.0), 1.0, &grid),
            Err(Error::Modulus(_))
        ));
    }
}
