//! ω-cusp cones and the uniform ω-cusp condition on raster sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::modulus::Modulus;
use super::raster::RasterSet;
use crate::{Error, Result, TIE_RTOL};

/// The cone `C_{ω,r}(ξ) = S_{ω,r}(ξ) ∪ F_{ω,r}(ξ)`.
#[derive(Debug, Clone)]
pub struct CuspCone {
    modulus: Modulus,
    r: f64,
    xi: [f64; 2],
    omega_r: f64,
    psi_r: f64,
}

impl CuspCone {
    pub fn new(modulus: Modulus, r: f64, xi: [f64; 2]) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Domain(format!("cone radius must be positive, got {r}")));
        }
        let norm = xi[0].hypot(xi[1]);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("cone direction must be a unit vector, |ξ| = {norm}")));
        }
        let omega_r = modulus.eval(r)?;
        let psi_r = modulus.psi(r)?;
        Ok(CuspCone { modulus, r, xi, omega_r, psi_r })
    }

    /// Cone along the unit vector at `angle` radians.
    pub fn at_angle(modulus: Modulus, r: f64, angle: f64) -> Result<Self> {
        Self::new(modulus, r, [angle.cos(), angle.sin()])
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn direction(&self) -> [f64; 2] {
        self.xi
    }

    /// `ψ(r)`, the outer radius of the cone.
    pub fn reach(&self) -> f64 {
        self.psi_r
    }

    // (|z̃|, z^d) in the frame taking e_d to ξ
    fn frame(&self, z: [f64; 2]) -> (f64, f64) {
        let zd = z[0] * self.xi[0] + z[1] * self.xi[1];
        let zt = (z[0] * self.xi[1] - z[1] * self.xi[0]).abs();
        (zt, zd)
    }

    /// Membership with the open conditions tightened by `tol`.
    pub(crate) fn contains_tol(&self, z: [f64; 2], tol: f64) -> bool {
        let (zt, zd) = self.frame(z);
        let norm = z[0].hypot(z[1]);
        let in_f = norm < self.psi_r - tol && zd >= self.omega_r - tol;
        if in_f {
            return true;
        }
        if zt >= self.r - tol || zd >= self.omega_r {
            return false;
        }
        zd > self.modulus.eval_unchecked(zt) + tol
    }

    pub fn contains(&self, z: [f64; 2]) -> bool {
        self.contains_tol(z, TIE_RTOL * self.psi_r)
    }

    /// Clearance of `z` inside the cone; negative outside.
    pub fn depth(&self, z: [f64; 2]) -> f64 {
        let (zt, zd) = self.frame(z);
        let lower = zd - self.modulus.eval_unchecked(zt.min(self.modulus.r_max()));
        lower.min(self.r - zt).min(self.psi_r - z[0].hypot(z[1]))
    }
}

/// Membership of `z` in the cone.
pub fn cone_contains(cone: &CuspCone, z: [f64; 2]) -> bool {
    cone.contains(z)
}

/// Which of the two equivalent formulations is verified on the samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CuspCondition {
    /// Inside points pulled back along the cone stay inside.
    #[default]
    W1,
    /// Outside points pushed along the cone never land inside.
    W2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuspOptions {
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default)]
    pub condition: CuspCondition,
    /// Test every `stride`-th boundary cell.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Explicit test points replacing the boundary samples.
    #[serde(default)]
    pub points: Option<Vec<[f64; 2]>>,
}

fn default_directions() -> usize {
    64
}

fn default_stride() -> usize {
    1
}

impl Default for CuspOptions {
    fn default() -> Self {
        CuspOptions { directions: 64, condition: CuspCondition::W1, stride: 1, points: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspSample {
    pub point: [f64; 2],
    /// A passing direction, if one was found.
    pub direction: Option<[f64; 2]>,
    /// Zero on success, otherwise minus the cone depth of the worst violation
    /// under the least-violated direction.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspReport {
    pub pass: bool,
    pub condition: CuspCondition,
    pub r: f64,
    pub directions: usize,
    pub samples: Vec<CuspSample>,
}

impl CuspReport {
    pub fn failures(&self) -> impl Iterator<Item = &CuspSample> {
        self.samples.iter().filter(|s| s.direction.is_none())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Lattice vectors (cell units) lying in the cone, deepest first.
#[derive(Debug, Clone)]
pub(crate) struct LatticeCone {
    pub xi: [f64; 2],
    pub offsets: Vec<(i64, i64, f64)>,
}

impl LatticeCone {
    pub(crate) fn new(cone: &CuspCone, h: f64) -> Self {
        let reach = (cone.reach() / h).ceil() as i64 + 1;
        let tol = TIE_RTOL * h;
        let mut offsets = Vec::new();
        for b in -reach..=reach {
            for a in -reach..=reach {
                let z = [a as f64 * h, b as f64 * h];
                if cone.contains_tol(z, tol) {
                    offsets.push((a, b, cone.depth(z)));
                }
            }
        }
        offsets.sort_by(|p, q| q.2.total_cmp(&p.2).then((p.0, p.1).cmp(&(q.0, q.1))));
        LatticeCone { xi: cone.direction(), offsets }
    }
}

/// Worst violation depth of `condition` at `x` for one direction, or `None`.
///
/// With `first_only` the scan stops at the first violating cell.
pub(crate) fn direction_violation(
    set: &RasterSet,
    x: [f64; 2],
    rho: f64,
    cone: &LatticeCone,
    condition: CuspCondition,
    first_only: bool,
) -> Option<f64> {
    let grid = set.grid();
    let h = grid.h();
    let reach2 = 2.0 * rho;
    let lo_i = (((x[0] - reach2 - grid.origin[0]) / h).floor() as i64).max(0);
    let hi_i = (((x[0] + reach2 - grid.origin[0]) / h).ceil() as i64).min(grid.n as i64 - 1);
    let lo_j = (((x[1] - reach2 - grid.origin[1]) / h).floor() as i64).max(0);
    let hi_j = (((x[1] + reach2 - grid.origin[1]) / h).ceil() as i64).min(grid.n as i64 - 1);
    let mut worst: Option<f64> = None;
    for j in lo_j..=hi_j {
        for i in lo_i..=hi_i {
            let c = grid.center(i as usize, j as usize);
            if (c[0] - x[0]).hypot(c[1] - x[1]) >= reach2 {
                continue;
            }
            let inside = set.contains(i as usize, j as usize);
            // W1: an outside cell in B_{2ρ} reached from an inside cell by −C.
            // W2: an inside cell in B_{2ρ} reached from an outside cell by +C.
            let hit = match condition {
                CuspCondition::W1 if !inside => {
                    cone.offsets.iter().find(|&&(a, b, _)| set.contains_signed(i + a, j + b))
                }
                CuspCondition::W2 if inside => {
                    cone.offsets.iter().find(|&&(a, b, _)| !set.contains_signed(i - a, j - b))
                }
                _ => None,
            };
            if let Some(&(_, _, depth)) = hit {
                worst = Some(worst.map_or(depth, |w: f64| w.max(depth)));
                if first_only {
                    return worst;
                }
            }
        }
    }
    worst
}

/// Margin of `condition` at `x` along `xi`: zero when it holds, otherwise
/// minus the cone depth of the worst violating pair.
pub fn check_direction(
    set: &RasterSet,
    modulus: &Modulus,
    r: f64,
    x: [f64; 2],
    xi: [f64; 2],
    condition: CuspCondition,
) -> Result<f64> {
    let cone = CuspCone::new(modulus.clone(), r, xi)?;
    let rho = cone.reach();
    require_room(set, x, rho)?;
    let lattice = LatticeCone::new(&cone, set.grid().h());
    Ok(direction_violation(set, x, rho, &lattice, condition, false).map_or(0.0, |d| -d))
}

fn require_room(set: &RasterSet, x: [f64; 2], rho: f64) -> Result<()> {
    let reach = 3.0 * rho;
    let grid = set.grid();
    if !grid.contains_box([x[0] - reach, x[1] - reach], [x[0] + reach, x[1] + reach]) {
        return Err(Error::Domain(format!(
            "ball of radius 3ψ(r) = {reach} around ({}, {}) leaves the box",
            x[0], x[1]
        )));
    }
    Ok(())
}

/// Uniform ω-cusp condition with parameter `r` at the boundary samples of `set`
/// (or at `options.points`), searching a uniform lattice of directions.
pub fn cusp_check(set: &RasterSet, modulus: &Modulus, r: f64, options: &CuspOptions) -> Result<CuspReport> {
    if options.directions == 0 || options.stride == 0 {
        return Err(Error::Domain("cusp check needs at least one direction and a positive stride".into()));
    }
    let grid = *set.grid();
    let h = grid.h();
    let points: Vec<[f64; 2]> = match &options.points {
        Some(p) => p.clone(),
        None => set.boundary().cells().step_by(options.stride).map(|(i, j)| grid.center(i, j)).collect(),
    };
    let probe = CuspCone::new(modulus.clone(), r, [1.0, 0.0])?;
    let rho = probe.reach();
    for &p in &points {
        require_room(set, p, rho)?;
    }
    let cones: Vec<LatticeCone> = (0..options.directions)
        .map(|k| {
            let angle = k as f64 * std::f64::consts::TAU / options.directions as f64;
            CuspCone::at_angle(modulus.clone(), r, angle).map(|c| LatticeCone::new(&c, h))
        })
        .collect::<Result<_>>()?;

    let samples: Vec<CuspSample> = points
        .par_iter()
        .map(|&x| {
            let order = search_order(set, x, rho, &cones);
            let mut best: Option<(usize, f64)> = None;
            for &k in &order {
                match direction_violation(set, x, rho, &cones[k], options.condition, false) {
                    None => return CuspSample { point: x, direction: Some(cones[k].xi), margin: 0.0 },
                    Some(d) => {
                        if best.map_or(true, |(_, b)| d < b) {
                            best = Some((k, d));
                        }
                    }
                }
            }
            CuspSample { point: x, direction: None, margin: -best.map_or(0.0, |b| b.1) }
        })
        .collect();
    let pass = samples.iter().all(|s| s.direction.is_some());
    Ok(CuspReport { pass, condition: options.condition, r, directions: options.directions, samples })
}

// Directions sorted by angle from the outward normal estimate at `x`.
fn search_order(set: &RasterSet, x: [f64; 2], rho: f64, cones: &[LatticeCone]) -> Vec<usize> {
    let grid = set.grid();
    let (mut sx, mut sy, mut count) = (0.0, 0.0, 0usize);
    for (i, j) in set.cells() {
        let c = grid.center(i, j);
        if (c[0] - x[0]).hypot(c[1] - x[1]) < rho {
            sx += c[0] - x[0];
            sy += c[1] - x[1];
            count += 1;
        }
    }
    let mut order: Vec<usize> = (0..cones.len()).collect();
    if count > 0 && sx.hypot(sy) > 0.0 {
        let normal = [-sx, -sy];
        let norm = normal[0].hypot(normal[1]);
        let key = |k: usize| -(cones[k].xi[0] * normal[0] + cones[k].xi[1] * normal[1]) / norm;
        order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::raster::GridGeometry;
    use crate::geometry::shape::{rasterize, ShapeSpec};

    #[test]
    fn cone_membership_examples() {
        let flat = CuspCone::new(Modulus::zero(), 1.0, [0.0, 1.0]).unwrap();
        assert!(cone_contains(&flat, [0.0, 0.5]));
        assert!(!cone_contains(&flat, [0.9, -0.1]));
        let lip = CuspCone::new(Modulus::lipschitz(1.0), 1.0, [0.0, 1.0]).unwrap();
        assert!(cone_contains(&lip, [0.3, 0.5]));
        assert!(!cone_contains(&lip, [0.5, 0.3]));
        // F part: above ω(r) inside the ψ(r) ball
        assert!(cone_contains(&lip, [0.1, 1.2]));
        assert!(!cone_contains(&lip, [0.0, 1.5]));
        assert!(CuspCone::new(Modulus::zero(), 1.0, [1.0, 1.0]).is_err());
    }

    #[test]
    fn rotated_cone_matches_frame() {
        let m = Modulus::lipschitz(1.0);
        let up = CuspCone::new(m.clone(), 0.5, [0.0, 1.0]).unwrap();
        let right = CuspCone::new(m, 0.5, [1.0, 0.0]).unwrap();
        for z in [[0.1, 0.3], [0.2, 0.1], [-0.1, 0.4], [0.0, 0.6]] {
            assert_eq!(up.contains(z), right.contains([z[1], -z[0]]));
        }
        // a lattice vector on the cone edge is excluded
        let diag = CuspCone::at_angle(Modulus::lipschitz(1.0), 0.5, std::f64::consts::FRAC_PI_4).unwrap();
        assert!(!diag.contains_tol([0.1, 0.0], 1e-12));
    }

    #[test]
    fn depth_is_positive_exactly_inside() {
        let cone = CuspCone::new(Modulus::hoelder(1.0, 0.5), 0.2, [0.0, 1.0]).unwrap();
        for k in 0..400 {
            let z = [((k * 37) % 97) as f64 / 200.0 - 0.24, ((k * 53) % 89) as f64 / 150.0 - 0.1];
            let d = cone.depth(z);
            if d.abs() > 1e-9 {
                assert_eq!(d > 0.0, cone.contains(z), "{z:?} {d}");
            }
        }
    }

    fn padded_grid(n: usize) -> GridGeometry {
        GridGeometry::new([-0.5, -0.5], 2.0, n).unwrap()
    }

    #[test]
    fn square_passes_with_lipschitz_modulus() {
        let grid = padded_grid(96);
        let sq = rasterize(&ShapeSpec::square([0.0, 0.0], 1.0), &grid).unwrap();
        let opts = CuspOptions { stride: 3, ..Default::default() };
        let report = cusp_check(&sq, &Modulus::lipschitz(1.0), 0.05, &opts).unwrap();
        assert!(report.pass, "{:?}", report.failures().next());
        let w2 = CuspOptions { condition: CuspCondition::W2, ..opts };
        assert!(cusp_check(&sq, &Modulus::lipschitz(1.0), 0.05, &w2).unwrap().pass);
    }

    #[test]
    fn disk_passes() {
        let grid = padded_grid(96);
        let disk = rasterize(&ShapeSpec::disk([0.5, 0.5], 0.4), &grid).unwrap();
        let opts = CuspOptions { stride: 2, ..Default::default() };
        assert!(cusp_check(&disk, &Modulus::lipschitz(1.0), 0.05, &opts).unwrap().pass);
    }

    #[test]
    fn touching_corners_fail_at_the_corner() {
        let grid = padded_grid(96);
        let quadrants = ShapeSpec::Union {
            shapes: vec![
                ShapeSpec::rectangle([0.0, 0.0], [0.45, 0.45]),
                ShapeSpec::rectangle([-0.45, -0.45], [0.0, 0.0]),
            ],
        };
        let set = rasterize(&quadrants, &grid).unwrap();
        let h = grid.h();
        let opts = CuspOptions { points: Some(vec![[h / 2.0, h / 2.0], [0.2 + h / 2.0, 0.45 + h / 2.0]]), ..Default::default() };
        let report = cusp_check(&set, &Modulus::lipschitz(1.0), 0.03, &opts).unwrap();
        assert!(report.samples[0].direction.is_none());
        assert!(report.samples[0].margin < 0.0);
        assert!(report.samples[1].direction.is_some());
        assert!(!report.pass);
    }

    #[test]
    fn oversized_radius_is_rejected() {
        let grid = GridGeometry::unit(32);
        let sq = rasterize(&ShapeSpec::square([0.25, 0.25], 0.5), &grid).unwrap();
        let err = cusp_check(&sq, &Modulus::lipschitz(1.0), 0.2, &CuspOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn report_serializes() {
        let grid = padded_grid(48);
        let sq = rasterize(&ShapeSpec::square([0.0, 0.0], 1.0), &grid).unwrap();
        let opts = CuspOptions { points: Some(vec![[0.5, 1.0]]), ..Default::default() };
        let report = cusp_check(&sq, &Modulus::lipschitz(1.0), 0.05, &opts).unwrap();
        let back: CuspReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }
}
