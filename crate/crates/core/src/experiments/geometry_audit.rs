//! Seeded property audits of cusp sets, dilations, translations and gaps.

use std::f64::consts::{SQRT_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::audit::{AuditCheck, AuditReport};
use crate::geometry::raster::squared_distance_field;
use crate::geometry::{
    check_direction, co_gap, cusp_check, dilate, erode, gap, hausdorff_distances, rasterize, CuspCondition, CuspCone,
    CuspOptions, GridGeometry, Modulus, RasterSet, ShapeSpec,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometrySuite {
    /// Cusp condition of `Ω^ε` at a verified point with `r₂ = ψ⁻¹(ψ(r)/2)`.
    DilationStability,
    /// `B_ε(φ(ε)ξ) ⊂ C_{ω,r}(ξ)` for `ε ≤ φ⁻¹(ψ(r)/2)`.
    BallInCone,
    /// `x + [φ(ε) + φ(−η)]ξ_y ∉ Z^ε` for `x ∈ B_{2ρ}(y) ∖ Z^η`.
    TranslationEscape,
    /// `ě(Ω₂, Ω₁) ≤ φ(e(Ω₂, Ω₁))`.
    GapComparison,
    /// The two dual forms of the cusp condition agree.
    CuspEquivalence,
    /// Symmetry, identity and triangle inequality of the four distances.
    MetricAxioms,
}

impl GeometrySuite {
    pub const ALL: [GeometrySuite; 6] = [
        GeometrySuite::DilationStability,
        GeometrySuite::BallInCone,
        GeometrySuite::TranslationEscape,
        GeometrySuite::GapComparison,
        GeometrySuite::CuspEquivalence,
        GeometrySuite::MetricAxioms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeometrySuite::DilationStability => "dilation_stability",
            GeometrySuite::BallInCone => "ball_in_cone",
            GeometrySuite::TranslationEscape => "translation_escape",
            GeometrySuite::GapComparison => "gap_comparison",
            GeometrySuite::CuspEquivalence => "cusp_equivalence",
            GeometrySuite::MetricAxioms => "metric_axioms",
        }
    }

    fn needs_zero_offset(self) -> bool {
        matches!(
            self,
            GeometrySuite::DilationStability | GeometrySuite::TranslationEscape | GeometrySuite::GapComparison
        )
    }
}

/// A modulus together with the cusp parameter used for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusChoice {
    pub modulus: Modulus,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryAuditOptions {
    /// Cells per side of the unit box.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_directions")]
    pub directions: usize,
    /// Moduli to draw from; the built-in catalogue when empty.
    #[serde(default)]
    pub moduli: Vec<ModulusChoice>,
}

fn default_n() -> usize {
    128
}

fn default_directions() -> usize {
    64
}

impl Default for GeometryAuditOptions {
    fn default() -> Self {
        GeometryAuditOptions { n: default_n(), directions: default_directions(), moduli: Vec::new() }
    }
}

impl GeometryAuditOptions {
    fn grid(&self) -> Result<GridGeometry> {
        GridGeometry::new([0.0, 0.0], 1.0, self.n)
    }

    fn tolerance(&self) -> f64 {
        2.0 * SQRT_2 / self.n as f64
    }

    fn moduli(&self) -> Vec<ModulusChoice> {
        if self.moduli.is_empty() {
            vec![
                ModulusChoice { modulus: Modulus::lipschitz(1.0), r: 0.028 },
                ModulusChoice { modulus: Modulus::lipschitz(2.0), r: 0.018 },
                ModulusChoice { modulus: Modulus::hoelder(0.3, 0.5), r: 0.0148 },
            ]
        } else {
            self.moduli.clone()
        }
    }
}

/// A base domain verified against one modulus, with a passing direction
/// per boundary sample.
struct Base {
    label: String,
    set: RasterSet,
    modulus: Modulus,
    r: f64,
    points: Vec<([f64; 2], [f64; 2])>,
}

fn catalogue(opts: &GeometryAuditOptions, choices: &[ModulusChoice]) -> Result<Vec<Base>> {
    let grid = opts.grid()?;
    let shapes = [
        ("square", ShapeSpec::square([0.3, 0.3], 0.4)),
        ("disk", ShapeSpec::disk([0.5, 0.5], 0.2)),
    ];
    let cusp = CuspOptions { directions: opts.directions, ..Default::default() };
    let mut out = Vec::new();
    for (name, shape) in &shapes {
        let set = rasterize(shape, &grid)?;
        for (k, c) in choices.iter().enumerate() {
            if c.modulus.offset() != 0.0 {
                continue;
            }
            let report = cusp_check(&set, &c.modulus, c.r, &cusp)?;
            if report.pass {
                let points = report.samples.iter().filter_map(|s| s.direction.map(|d| (s.point, d))).collect();
                out.push(Base { label: format!("{name}/{k}"), set: set.clone(), modulus: c.modulus.clone(), r: c.r, points });
            }
        }
    }
    Ok(out)
}

/// Runs `instances` seeded instances of one suite.
pub fn audit_geometry(
    suite: GeometrySuite,
    instances: usize,
    seed: u64,
    opts: &GeometryAuditOptions,
) -> Result<AuditReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let choices = opts.moduli();
    if choices.is_empty() {
        return Err(Error::Config("no moduli to audit".into()));
    }
    let tol = opts.tolerance();
    let mut checks = Vec::new();
    let mut rejected = 0;
    let mut details = serde_json::Map::new();

    let bases = if suite.needs_zero_offset() {
        let accepted: Vec<ModulusChoice> = choices.iter().filter(|c| c.modulus.offset() == 0.0).cloned().collect();
        // instances drawn on a modulus with ω(0) > 0 are turned away
        rejected = (0..instances).filter(|_| choices[rng.gen_range(0..choices.len())].modulus.offset() != 0.0).count();
        if accepted.is_empty() {
            return Ok(AuditReport::from_checks(suite.name(), instances, rejected, checks, Some(seed)));
        }
        let b = catalogue(opts, &accepted)?;
        if b.is_empty() {
            return Err(Error::Domain("no catalogue shape passes the cusp check for the given moduli".into()));
        }
        b
    } else {
        Vec::new()
    };
    let runs = instances - rejected;

    match suite {
        GeometrySuite::DilationStability => {
            for i in 0..runs {
                let b = &bases[rng.gen_range(0..bases.len())];
                let (x, xi) = b.points[rng.gen_range(0..b.points.len())];
                let psi = b.modulus.psi(b.r)?;
                let eps = psi * rng.gen_range(0.05..=1.0);
                let r2 = b.modulus.psi_inv(psi / 2.0)?;
                let grown = dilate(&b.set, eps)?;
                let mut margin = check_direction(&grown, &b.modulus, r2, x, xi, CuspCondition::W1)?;
                if margin < 0.0 {
                    let opts = CuspOptions { directions: opts.directions, points: Some(vec![x]), ..Default::default() };
                    let rep = cusp_check(&grown, &b.modulus, r2, &opts)?;
                    margin = margin.max(rep.samples[0].margin);
                }
                checks.push(AuditCheck::new(format!("{i}:{}:eps={eps:.5}", b.label), -margin, 0.0, tol));
            }
        }
        GeometrySuite::BallInCone => {
            for i in 0..runs {
                let c = &choices[rng.gen_range(0..choices.len())];
                let r = c.r * rng.gen_range(0.5..=1.5);
                let limit = c.modulus.phi_inv(c.modulus.psi(r)? / 2.0)?;
                let eps = if i % 5 == 4 { limit } else { limit * rng.gen_range(0.05..1.0) };
                let angle = rng.gen_range(0.0..TAU);
                let cone = CuspCone::at_angle(c.modulus.clone(), r, angle)?;
                let phi = c.modulus.phi(eps)?;
                let xi = cone.direction();
                let center = [phi * xi[0], phi * xi[1]];
                let mut worst = f64::INFINITY;
                for k in 0..=16 {
                    let rho = eps * (k as f64 / 16.0) * (1.0 - 1e-9);
                    let m = if k == 0 { 1 } else { 64 };
                    for a in 0..m {
                        let t = a as f64 * TAU / m as f64;
                        worst = worst.min(cone.depth([center[0] + rho * t.cos(), center[1] + rho * t.sin()]));
                    }
                }
                checks.push(AuditCheck::new(format!("{i}:r={r:.5}:eps={eps:.6}"), -worst.min(0.0), 0.0, tol));
            }
            details.insert("tight_instances".into(), (runs / 5).into());
        }
        GeometrySuite::TranslationEscape => {
            for i in 0..runs {
                let b = &bases[rng.gen_range(0..bases.len())];
                let (y, xi) = b.points[rng.gen_range(0..b.points.len())];
                let rho = b.modulus.psi(b.r)?;
                let limit = b.modulus.phi_inv(rho / 4.0)?;
                let eta = -limit * rng.gen_range(0.0..=1.0);
                let eps = limit * rng.gen_range(0.0..=1.0);
                let shift = b.modulus.phi(eps)? + b.modulus.phi(-eta)?;
                let worst = translation_escape(&b.set, y, xi, rho, eta, eps, shift)?;
                checks.push(AuditCheck::new(
                    format!("{i}:{}:eta={eta:.5}:eps={eps:.5}", b.label),
                    worst,
                    0.0,
                    tol,
                ));
            }
        }
        GeometrySuite::GapComparison => {
            let grid = opts.grid()?;
            let mut drawn = 0;
            while checks.len() < runs && drawn < 20 * runs.max(1) {
                let b = &bases[rng.gen_range(0..bases.len())];
                let limit = b.modulus.phi_inv(b.modulus.psi(b.r)? / 2.0)?;
                let (kind, other) = perturb(&mut rng, b, limit, &grid)?;
                drawn += 1;
                let e = gap(&other, &b.set)?;
                if e > limit {
                    rejected += 1;
                    continue;
                }
                let measured = co_gap(&other, &b.set)?;
                let bound = b.modulus.phi(e)?;
                checks.push(AuditCheck::new(format!("{drawn}:{}:{kind}:e={e:.5}", b.label), measured, bound, tol));
            }
        }
        GeometrySuite::CuspEquivalence => {
            let grid = opts.grid()?;
            let mut mismatches = Vec::new();
            for i in 0..runs {
                let (set, x, angle, c, r) = cusp_configuration(&mut rng, &choices, &grid)?;
                let xi = [angle.cos(), angle.sin()];
                let w1 = check_direction(&set, &c.modulus, r, x, xi, CuspCondition::W1)? >= 0.0;
                let w2 = check_direction(&set, &c.modulus, r, x, xi, CuspCondition::W2)? >= 0.0;
                if w1 != w2 && mismatches.len() < 10 {
                    mismatches.push(serde_json::json!({
                        "instance": i, "point": x, "direction": xi, "r": r,
                        "modulus": c.modulus, "w1": w1, "w2": w2,
                    }));
                }
                let label = format!("{i}:w1={w1}:w2={w2}");
                checks.push(AuditCheck::new(label, if w1 == w2 { 0.0 } else { 1.0 }, 0.0, 0.0));
            }
            details.insert("mismatches".into(), mismatches.into());
        }
        GeometrySuite::MetricAxioms => {
            let grid = opts.grid()?;
            for i in 0..runs {
                let sets: Vec<RasterSet> =
                    (0..3).map(|_| rasterize(&random_shape(&mut rng), &grid)).collect::<Result<_>>()?;
                metric_checks(i, &sets, tol, &mut checks)?;
            }
        }
    }
    let mut report = AuditReport::from_checks(suite.name(), instances, rejected, checks, Some(seed));
    for (k, v) in details {
        report.details.insert(k, v);
    }
    Ok(report)
}

/// Deepest intrusion into `Z^ε` of the translates of `B_{2ρ}(y) ∖ Z^η`;
/// zero when every translate escapes.
fn translation_escape(
    z: &RasterSet,
    y: [f64; 2],
    xi: [f64; 2],
    rho: f64,
    eta: f64,
    eps: f64,
    shift: f64,
) -> Result<f64> {
    let grid = *z.grid();
    let h = grid.h();
    let inner = erode(z, -eta)?;
    let outer = dilate(z, eps)?;
    let outside = outer.complement();
    let depth2 = squared_distance_field(&grid, outside.mask());
    let mut worst: f64 = 0.0;
    for (i, j) in inner.complement().cells() {
        let x = grid.center(i, j);
        if (x[0] - y[0]).hypot(x[1] - y[1]) >= 2.0 * rho {
            continue;
        }
        let p = [x[0] + shift * xi[0], x[1] + shift * xi[1]];
        if let Some((a, b)) = grid.locate(p) {
            if outer.contains(a, b) {
                let d = depth2.as_ref().map_or(f64::INFINITY, |f| (f[grid.index(a, b)] as f64).sqrt() * h);
                worst = worst.max(d);
            }
        }
    }
    Ok(worst)
}

fn perturb(rng: &mut ChaCha8Rng, b: &Base, limit: f64, grid: &GridGeometry) -> Result<(&'static str, RasterSet)> {
    let size = limit * rng.gen_range(0.2..1.4);
    Ok(match rng.gen_range(0..5) {
        0 => ("erode", erode(&b.set, size * 3.0)?),
        1 => ("dilate", dilate(&b.set, size)?),
        2 => {
            let a = rng.gen_range(0.0..TAU);
            let shifted = RasterSet::from_fn(*grid, |p| {
                grid.locate([p[0] - size * a.cos(), p[1] - size * a.sin()]).is_some_and(|(i, j)| b.set.contains(i, j))
            });
            ("translate", shifted)
        }
        k => {
            let (x, _) = b.points[rng.gen_range(0..b.points.len())];
            let radius = rng.gen_range(0.02..0.06);
            let disk = rasterize(&ShapeSpec::disk(x, radius), grid)?;
            if k == 3 {
                ("bump", b.set.union(&disk.intersection(&dilate(&b.set, size)?)?)?)
            } else {
                ("dent", b.set.difference(&disk)?)
            }
        }
    })
}

fn random_shape(rng: &mut ChaCha8Rng) -> ShapeSpec {
    let c = [rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7)];
    match rng.gen_range(0..4) {
        0 => ShapeSpec::disk(c, rng.gen_range(0.08..0.25)),
        1 => {
            let s = rng.gen_range(0.15..0.45);
            ShapeSpec::square([c[0] - s / 2.0, c[1] - s / 2.0], s)
        }
        2 => ShapeSpec::Union {
            shapes: vec![
                ShapeSpec::disk(c, rng.gen_range(0.08..0.2)),
                ShapeSpec::disk(
                    [c[0] + rng.gen_range(-0.15..0.15), c[1] + rng.gen_range(-0.15..0.15)],
                    rng.gen_range(0.05..0.15),
                ),
            ],
        },
        _ => {
            let s = rng.gen_range(0.25..0.45);
            ShapeSpec::Difference {
                base: Box::new(ShapeSpec::square([c[0] - s / 2.0, c[1] - s / 2.0], s)),
                minus: Box::new(ShapeSpec::disk(
                    [c[0] + s / 2.0 * rng.gen_range(-1.0..1.0), c[1] + s / 2.0],
                    rng.gen_range(0.05..0.12),
                )),
            }
        }
    }
}

// redraws until the 3ψ(r) ball around the point fits in the box
fn cusp_configuration(
    rng: &mut ChaCha8Rng,
    choices: &[ModulusChoice],
    grid: &GridGeometry,
) -> Result<(RasterSet, [f64; 2], f64, ModulusChoice, f64)> {
    for _ in 0..1000 {
        let set = rasterize(&random_shape(rng), grid)?;
        let boundary: Vec<(usize, usize)> = set.boundary().cells().collect();
        if boundary.is_empty() {
            continue;
        }
        let (i, j) = boundary[rng.gen_range(0..boundary.len())];
        let x = grid.center(i, j);
        let c = choices[rng.gen_range(0..choices.len())].clone();
        let r = c.r * rng.gen_range(0.5..=1.5);
        let reach = 3.0 * c.modulus.psi(r)?;
        if !grid.contains_box([x[0] - reach, x[1] - reach], [x[0] + reach, x[1] + reach]) {
            continue;
        }
        return Ok((set, x, rng.gen_range(0.0..TAU), c, r));
    }
    Err(Error::Domain("could not draw a cusp configuration with room in the box".into()))
}

fn metric_checks(i: usize, sets: &[RasterSet], tol: f64, checks: &mut Vec<AuditCheck>) -> Result<()> {
    let (x, y, z) = (&sets[0], &sets[1], &sets[2]);
    let xy = hausdorff_distances(x, y)?;
    let yx = hausdorff_distances(y, x)?;
    let yz = hausdorff_distances(y, z)?;
    let xz = hausdorff_distances(x, z)?;
    let four = |d: &crate::geometry::HausdorffDistances| [d.closed, d.open, d.pompeiu, d.weakest];
    let names = ["closed", "open", "pompeiu", "weakest"];
    for (k, name) in names.iter().enumerate() {
        let asym = (four(&xy)[k] - four(&yx)[k]).abs();
        checks.push(AuditCheck::new(format!("{i}:symmetry:{name}"), asym, 0.0, 0.0));
        if k < 3 {
            checks.push(AuditCheck::new(
                format!("{i}:triangle:{name}"),
                four(&xz)[k],
                four(&xy)[k] + four(&yz)[k],
                tol,
            ));
            let ghost = if four(&xy)[k] == 0.0 && x != y { 1.0 } else { 0.0 };
            checks.push(AuditCheck::new(format!("{i}:identity:{name}"), ghost, 0.0, 0.0));
        }
    }
    checks.push(AuditCheck::new(format!("{i}:pompeiu_dominates"), xy.closed.max(xy.open), xy.pompeiu, 0.0));
    checks.push(AuditCheck::new(format!("{i}:weakest_below_open"), xy.weakest, xy.open, 0.0));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GeometryAuditOptions {
        GeometryAuditOptions { n: 96, directions: 32, moduli: vec![ModulusChoice { modulus: Modulus::lipschitz(1.0), r: 0.035 }] }
    }

    #[test]
    fn suites_are_seeded() {
        let a = audit_geometry(GeometrySuite::MetricAxioms, 5, 3, &small()).unwrap();
        let b = audit_geometry(GeometrySuite::MetricAxioms, 5, 3, &small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed, Some(3));
        assert!(a.pass, "{a:?}");
    }

    #[test]
    fn ball_in_cone_holds_at_the_admissibility_limit() {
        let rep = audit_geometry(GeometrySuite::BallInCone, 10, 1, &small()).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.details["tight_instances"], 2);
    }

    #[test]
    fn dilation_and_gap_suites_pass_on_the_catalogue() {
        for suite in [GeometrySuite::DilationStability, GeometrySuite::GapComparison, GeometrySuite::TranslationEscape] {
            let rep = audit_geometry(suite, 8, 11, &small()).unwrap();
            assert!(rep.pass, "{suite:?}: {rep:?}");
            assert!(!rep.checks.is_empty());
        }
    }

    #[test]
    fn offset_moduli_are_rejected_before_auditing() {
        let mut opts = small();
        opts.moduli = vec![ModulusChoice { modulus: Modulus::lipschitz(1.0).with_offset(0.01).unwrap(), r: 0.03 }];
        let rep = audit_geometry(GeometrySuite::DilationStability, 6, 0, &opts).unwrap();
        assert_eq!(rep.rejected, 6);
        assert!(rep.checks.is_empty());
    }
}
