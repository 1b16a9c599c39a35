//! One-parameter families of perturbed domains.

use serde::{Deserialize, Serialize};

use crate::geometry::shape::{graph_frame, graph_value};
use crate::geometry::{
    dilate, erode, from_boundary_graph, rasterize, GraphSpec, GridGeometry, Modulus, ModulusKind, ModulusSpec,
    RasterSet, ShapeSpec,
};
use crate::{Error, Result};

/// How a member `Ω_ε` is obtained from the base domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    /// Raster erosion by ε.
    Erode,
    /// Raster dilation by ε.
    Dilate,
    /// Analytic shift by `ε·direction` (direction normalized).
    Translate { direction: [f64; 2] },
    /// Boundary graph `g₀(t) + ε·b((t − center)/width)` with the tent
    /// `b(s) = (1 − |s|)₊` for Lipschitz ω and `b(s) = (1 − |s|^α)₊` for
    /// Hölder ω; the base shape must be a graph.
    Bump { modulus: ModulusSpec, center: f64, width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationFamily {
    pub base: ShapeSpec,
    pub perturbation: Perturbation,
    /// Strictly decreasing, nonnegative.
    pub schedule: Vec<f64>,
    pub grid: GridGeometry,
}

impl PerturbationFamily {
    pub fn new(base: ShapeSpec, perturbation: Perturbation, schedule: Vec<f64>, grid: GridGeometry) -> Result<Self> {
        let fam = PerturbationFamily { base, perturbation, schedule, grid };
        fam.validate()?;
        Ok(fam)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.schedule.is_empty() {
            return Err(Error::Domain("perturbation schedule is empty".into()));
        }
        if let Some(e) = self.schedule.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::Domain(format!("schedule entries must be finite and nonnegative, got {e}")));
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Domain("schedule must be strictly decreasing".into()));
        }
        match &self.perturbation {
            Perturbation::Translate { direction } if !(direction[0].hypot(direction[1]) > 0.0) => {
                Err(Error::Domain("translation direction must be nonzero".into()))
            }
            Perturbation::Bump { modulus, width, .. } => {
                if !matches!(self.base, ShapeSpec::Graph(_)) {
                    return Err(Error::Domain("bump families need a boundary-graph base shape".into()));
                }
                if !(*width > 0.0) {
                    return Err(Error::Domain(format!("bump width must be positive, got {width}")));
                }
                let m = Modulus::try_from(modulus.clone())?;
                bump_profile(&m).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    /// Same family on another grid of the same box.
    pub fn on_grid(&self, grid: GridGeometry) -> Self {
        PerturbationFamily { grid, ..self.clone() }
    }

    pub fn base_set(&self) -> Result<RasterSet> {
        match &self.perturbation {
            Perturbation::Bump { .. } => self.member(0.0),
            _ => rasterize(&self.base, &self.grid),
        }
    }

    /// The member for perturbation size `eps`.
    pub fn member(&self, eps: f64) -> Result<RasterSet> {
        match &self.perturbation {
            Perturbation::Erode => erode(&rasterize(&self.base, &self.grid)?, eps),
            Perturbation::Dilate => dilate(&rasterize(&self.base, &self.grid)?, eps),
            Perturbation::Translate { direction } => {
                let len = direction[0].hypot(direction[1]);
                let shift = [eps * direction[0] / len, eps * direction[1] / len];
                rasterize(&self.base.translated(shift), &self.grid)
            }
            Perturbation::Bump { modulus, center, width } => {
                let ShapeSpec::Graph(g0) = &self.base else {
                    return Err(Error::Domain("bump families need a boundary-graph base shape".into()));
                };
                let m = Modulus::try_from(modulus.clone())?;
                let profile = bump_profile(&m)?;
                let g = bumped_graph(g0, &self.grid, eps, *center, *width, profile);
                from_boundary_graph(&g, &m, 1.0, &self.grid)
            }
        }
    }

    /// Members in schedule order.
    pub fn members(&self) -> Result<Vec<(f64, RasterSet)>> {
        self.schedule.iter().map(|&e| self.member(e).map(|s| (e, s))).collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum Profile {
    Tent,
    Power(f64),
}

fn bump_profile(m: &Modulus) -> Result<Profile> {
    if m.offset() != 0.0 {
        return Err(Error::Modulus("bump profiles need ω(0) = 0".into()));
    }
    match m.kind() {
        ModulusKind::Lipschitz { .. } => Ok(Profile::Tent),
        ModulusKind::Hoelder { exponent, .. } => Ok(Profile::Power(*exponent)),
        _ => Err(Error::Modulus("bump profiles exist for Lipschitz and Hölder moduli only".into())),
    }
}

fn bumped_graph(g0: &GraphSpec, grid: &GridGeometry, eps: f64, center: f64, width: f64, profile: Profile) -> GraphSpec {
    let ([a, b], _) = graph_frame(g0, grid);
    // resample at a quarter cell so the profile is resolved
    let cells = ((b - a) / grid.h()).ceil() as usize;
    let m = (4 * cells + 1).max(g0.samples.len());
    let samples = (0..m)
        .map(|k| {
            let t = a + (b - a) * k as f64 / (m - 1) as f64;
            let s = ((t - center) / width).abs();
            let bump = match profile {
                Profile::Tent => (1.0 - s).max(0.0),
                Profile::Power(alpha) => (1.0 - s.powf(alpha)).max(0.0),
            };
            graph_value(&g0.samples, a, b, t) + eps * bump
        })
        .collect();
    GraphSpec { samples, side: g0.side, x_range: Some([a, b]), bound: g0.bound.or(Some(graph_frame(g0, grid).1)) }
}
