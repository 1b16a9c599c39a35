//! Numerical audits of the solution-gap and eigenvalue lower-bound inequalities.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sweep::{csv_err, num};
use crate::fem::{
    assemble, solve_dirichlet, AmbientSystem, CoefficientField, DirichletSystem, EnergyNorm, FieldVector, LoadSpec,
    Quadrature,
};
use crate::geometry::{dilate, erode, gap, rasterize, GridGeometry, RasterSet, ShapeSpec};
use crate::spectral::eigen::generalized_eigen;
use crate::spectral::{eigens_with, energy_norm, project_onto, subspace_distance_in, EigenOptions};
use crate::{Error, Result};

/// One inequality `measured ≤ bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub label: String,
    pub measured: f64,
    pub bound: f64,
    /// `bound − measured`.
    pub slack: f64,
    /// Per-check tolerance; the check passes when `slack ≥ −tolerance`.
    pub tolerance: f64,
}

impl AuditCheck {
    pub fn new(label: impl Into<String>, measured: f64, bound: f64, tolerance: f64) -> Self {
        AuditCheck { label: label.into(), measured, bound, slack: bound - measured, tolerance }
    }

    pub fn passes(&self) -> bool {
        self.slack >= -self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub audit: String,
    pub instances: usize,
    /// Inputs turned away by a precondition gate.
    pub rejected: usize,
    /// Smallest slack over all checks.
    pub worst_slack: Option<f64>,
    /// Tolerance of the check attaining the worst slack.
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub violations: usize,
    pub checks: Vec<AuditCheck>,
    #[serde(default)]
    pub details: BTreeMap<String, serde_json::Value>,
}

impl AuditReport {
    pub fn from_checks(
        audit: impl Into<String>,
        instances: usize,
        rejected: usize,
        checks: Vec<AuditCheck>,
        seed: Option<u64>,
    ) -> Self {
        let worst = checks.iter().min_by(|a, b| (a.slack + a.tolerance).total_cmp(&(b.slack + b.tolerance)));
        let violations = checks.iter().filter(|c| !c.passes()).count();
        AuditReport {
            audit: audit.into(),
            instances,
            rejected,
            worst_slack: checks.iter().map(|c| c.slack).min_by(f64::total_cmp),
            tolerance: worst.map_or(0.0, |c| c.tolerance),
            pass: violations == 0,
            seed,
            violations,
            checks,
            details: BTreeMap::new(),
        }
    }

    pub fn with_detail(mut self, key: &str, value: impl Serialize) -> Self {
        if let Ok(v) = serde_json::to_value(value) {
            self.details.insert(key.to_string(), v);
        }
        self
    }

    /// Concatenates reports of the same audit.
    pub fn merge(audit: impl Into<String>, parts: Vec<AuditReport>, seed: Option<u64>) -> Self {
        let instances = parts.iter().map(|p| p.instances).sum();
        let rejected = parts.iter().map(|p| p.rejected).sum();
        let checks = parts.into_iter().flat_map(|p| p.checks).collect();
        AuditReport::from_checks(audit, instances, rejected, checks, seed)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["label", "measured", "bound", "slack", "tolerance", "pass"]).map_err(csv_err)?;
        for c in &self.checks {
            out.write_record([
                c.label.clone(),
                num(c.measured),
                num(c.bound),
                num(c.slack),
                num(c.tolerance),
                c.passes().to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn rel_tol(values: &[f64]) -> f64 {
    1e-9 * values.iter().copied().fold(0.0, f64::max) + 1e-14
}

/// `‖u₁ − u₂‖ ≤ √(β/α)(d(u₁, V₁∩V₂) + d(u₂, V₁∩V₂))`, its variant through
/// `u¹² = G(f; V¹²)`, and the two-sided variant through `u²¹ = G(f; V²¹)`.
///
/// Norms and distances are taken in the `H̊¹` norm `∫ G(∇u, ∇u)`, in which
/// `α‖u‖² ≤ a(u, u) ≤ β‖u‖²` with α, β the coefficient bounds.
/// `V¹²` lives on `Ω₁` dilated by `e(Ω₂, Ω₁)` and `V²¹` on `Ω₂` dilated by
/// `e(Ω₁, Ω₂)` together with `Ω₁ ∪ Ω₂`.
pub fn audit_solution_gap(
    ambient: &Arc<AmbientSystem>,
    omega1: &RasterSet,
    omega2: &RasterSet,
    f: &[f64],
) -> Result<AuditReport> {
    let norm = EnergyNorm::Gradient;
    let b = ambient.bounds();
    let ratio = b.beta / b.alpha;
    let c = ratio.sqrt();
    let sys1 = DirichletSystem::restrict(ambient, omega1)?;
    let sys2 = DirichletSystem::restrict(ambient, omega2)?;
    let cap = DirichletSystem::restrict(ambient, &omega1.intersection(omega2)?)?;
    let u1 = solve_dirichlet(&sys1, f)?.u;
    let u2 = solve_dirichlet(&sys2, f)?.u;
    let lhs = energy_norm(ambient, &u1.sub(&u2), norm);

    let b8 = c * (subspace_distance_in(&cap, &u1, norm)? + subspace_distance_in(&cap, &u2, norm)?);

    let v12 = dilate(omega1, gap(omega2, omega1)?)?;
    let sys12 = DirichletSystem::restrict(ambient, &v12)?;
    let u12 = solve_dirichlet(&sys12, f)?.u;
    let d12_1 = subspace_distance_in(&sys1, &u12, norm)?;
    let b9 = c * (d12_1 + subspace_distance_in(&sys2, &u12, norm)?);

    let v21 = dilate(omega2, gap(omega1, omega2)?)?.union(omega1)?.union(omega2)?;
    let sys21 = DirichletSystem::restrict(ambient, &v21)?;
    let u21 = solve_dirichlet(&sys21, f)?.u;
    let bc = ratio * (d12_1 + subspace_distance_in(&sys2, &u21, norm)?);

    let checks = vec![
        AuditCheck::new("intersection", lhs, b8, rel_tol(&[lhs, b8])),
        AuditCheck::new("inner_solution", lhs, b9, rel_tol(&[lhs, b9])),
        AuditCheck::new("two_sided", lhs, bc, rel_tol(&[lhs, bc])),
    ];
    Ok(AuditReport::from_checks("solution_gap", 1, 0, checks, None)
        .with_detail("alpha", b.alpha)
        .with_detail("beta", b.beta))
}

/// Seeded instances of [`audit_solution_gap`] on the unit box: perturbed disks and
/// squares, Gaussian plus constant loads, `A = I` and `A = diag(1, 4)`
/// alternating.
pub fn audit_solution_gap_suite(count: usize, seed: u64, n: usize) -> Result<AuditReport> {
    let grid = GridGeometry::new([0.0, 0.0], 1.0, n)?;
    let ambients = [
        assemble(&grid, &CoefficientField::identity(), Quadrature::default())?,
        assemble(&grid, &CoefficientField::constant([[1.0, 0.0], [0.0, 4.0]])?, Quadrature::default())?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = Vec::with_capacity(count);
    for i in 0..count {
        let (o1, o2, load) = solution_gap_instance(&mut rng, &grid)?;
        let amb = &ambients[i % 2];
        let f = load.sample(amb)?;
        let mut rep = audit_solution_gap(amb, &o1, &o2, &f)?;
        for c in &mut rep.checks {
            c.label = format!("{i}:{}", c.label);
        }
        parts.push(rep);
    }
    Ok(AuditReport::merge("solution_gap", parts, Some(seed)))
}

fn solution_gap_instance(rng: &mut ChaCha8Rng, grid: &GridGeometry) -> Result<(RasterSet, RasterSet, LoadSpec)> {
    let c = [rng.gen_range(0.42..0.58), rng.gen_range(0.42..0.58)];
    let base = if rng.gen_bool(0.5) {
        ShapeSpec::disk(c, rng.gen_range(0.2..0.3))
    } else {
        let s = rng.gen_range(0.35..0.5);
        ShapeSpec::square([c[0] - s / 2.0, c[1] - s / 2.0], s)
    };
    let o1 = rasterize(&base, grid)?;
    let mut o2 = o1.clone();
    while o2 == o1 {
        o2 = solution_gap_partner(rng, &base, &o1, c, grid)?;
    }
    let load = LoadSpec::Sum {
        terms: vec![
            LoadSpec::Constant { value: rng.gen_range(0.2..1.0) },
            LoadSpec::Gaussian {
                center: [rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7)],
                width: rng.gen_range(0.05..0.2),
                amplitude: rng.gen_range(-2.0..2.0),
            },
        ],
    };
    Ok((o1, o2, load))
}

fn solution_gap_partner(
    rng: &mut ChaCha8Rng,
    base: &ShapeSpec,
    o1: &RasterSet,
    c: [f64; 2],
    grid: &GridGeometry,
) -> Result<RasterSet> {
    Ok(match rng.gen_range(0..4) {
        0 => {
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let d = rng.gen_range(0.02..0.1);
            rasterize(&base.translated([d * a.cos(), d * a.sin()]), grid)?
        }
        1 => erode(o1, rng.gen_range(0.02..0.06))?,
        2 => dilate(o1, rng.gen_range(0.02..0.06))?,
        _ => {
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let bump = ShapeSpec::disk([c[0] + 0.25 * a.cos(), c[1] + 0.25 * a.sin()], rng.gen_range(0.05..0.12));
            o1.union(&rasterize(&bump, grid)?)?
        }
    })
}

/// For `m ≤ n`: the smallest `A_m`, `B_m` with `‖u − P_{Ω₂}u‖²_V ≤ A_m‖u‖²_L`
/// and `‖u − P_{Ω₂}u‖²_L ≤ B_m‖u‖²_L` on `S_m = span(u₁…u_m)` of `Ω₁`,
/// then `λ_m(Ω₁) ≥ λ_m(Ω₂) − A_m/((√p − √B_m)² p)` as printed.
///
/// `‖·‖_V` is the operator energy, `‖·‖_L = √p‖·‖_{L²}` with p the
/// Friedrichs constant of the box. `B_m ≥ p` gives `InapplicableError`.
pub fn audit_eigen_lower_bound(
    ambient: &Arc<AmbientSystem>,
    omega1: &RasterSet,
    omega2: &RasterSet,
    n: usize,
    opts: &EigenOptions,
) -> Result<AuditReport> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let p = ambient.friedrichs_constant()?;
    let sys1 = DirichletSystem::restrict(ambient, omega1)?;
    let sys2 = DirichletSystem::restrict(ambient, omega2)?;
    let e1 = eigens_with(&sys1, n, opts)?;
    let e2 = eigens_with(&sys2, n, opts)?;
    if e1.len() < n || e2.len() < n {
        return Err(Error::Domain(format!("a domain has fewer than {n} degrees of freedom")));
    }
    let norm = EnergyNorm::Operator;
    let defects: Vec<FieldVector> = e1
        .vectors
        .iter()
        .map(|u| project_onto(&sys2, u, norm).map(|pu| u.sub(&pu)))
        .collect::<Result<_>>()?;
    let k = ambient.stiffness();
    let m = ambient.mass();
    let gram = |mat: &crate::fem::CsrMatrix, x: &[FieldVector], s: f64, d: usize| {
        let mx: Vec<Vec<f64>> = x[..d].iter().map(|v| mat.matvec(v)).collect();
        Mat::from_fn(d, d, |i, j| {
            let a: f64 = x[i].iter().zip(&mx[j]).map(|(p, q)| p * q).sum();
            let b: f64 = x[j].iter().zip(&mx[i]).map(|(p, q)| p * q).sum();
            0.5 * s * (a + b)
        })
    };
    let mut checks = Vec::with_capacity(n);
    let mut constants = Vec::with_capacity(n);
    for d in 1..=n {
        let gl = gram(m, &e1.vectors, p, d);
        let dv = gram(k, &defects, 1.0, d);
        let dl = gram(m, &defects, p, d);
        let a = top_generalized(&dv, &gl)?;
        let b = top_generalized(&dl, &gl)?;
        if b >= p {
            return Err(Error::Inapplicable(format!("B_{d} = {b} is not below p = {p}")));
        }
        let correction = a / ((p.sqrt() - b.sqrt()).powi(2) * p);
        let (l1, l2) = (e1.values[d - 1], e2.values[d - 1]);
        // λ₂ − correction ≤ λ₁
        let bound = l1;
        let measured = l2 - correction;
        checks.push(AuditCheck::new(format!("lambda_{d}"), measured, bound, rel_tol(&[l1, l2])));
        constants.push(serde_json::json!({ "n": d, "A": a, "B": b, "lambda1": l1, "lambda2": l2, "correction": correction }));
    }
    Ok(AuditReport::from_checks("eigen_lower_bound", 1, 0, checks, None)
        .with_detail("p", p)
        .with_detail("constants", constants))
}

// largest eigenvalue of the pencil (a, g), clamped at zero
fn top_generalized(a: &Mat<f64>, g: &Mat<f64>) -> Result<f64> {
    let (vals, _) = generalized_eigen(a, g)?;
    Ok(vals.last().copied().unwrap_or(0.0).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ShapeSpec;

    fn ambient(grid: &GridGeometry, a: [[f64; 2]; 2]) -> Arc<AmbientSystem> {
        assemble(grid, &CoefficientField::constant(a).unwrap(), Quadrature::Gauss2).unwrap()
    }

    #[test]
    fn identical_domains_give_zero_on_both_sides() {
        let grid = GridGeometry::unit(32);
        let amb = ambient(&grid, [[1.0, 0.0], [0.0, 1.0]]);
        let o = rasterize(&ShapeSpec::disk([0.5, 0.5], 0.3), &grid).unwrap();
        let f = amb.interpolate(|_| 1.0);
        let rep = audit_solution_gap(&amb, &o, &o, &f).unwrap();
        assert!(rep.pass);
        for c in &rep.checks {
            assert!(c.measured.abs() < 1e-12 && c.bound.abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn translated_square_holds_for_isotropic_and_anisotropic_coefficients() {
        let grid = GridGeometry::unit(48);
        let sq = ShapeSpec::square([0.25, 0.25], 0.5);
        let o1 = rasterize(&sq, &grid).unwrap();
        let o2 = rasterize(&sq.translated([1.0 / 16.0, 0.0]), &grid).unwrap();
        for a in [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 4.0]]] {
            let amb = ambient(&grid, a);
            let f = amb.interpolate(|_| 1.0);
            let rep = audit_solution_gap(&amb, &o1, &o2, &f).unwrap();
            assert!(rep.pass, "{rep:?}");
            assert!(rep.worst_slack.unwrap() > 0.0);
        }
    }

    #[test]
    fn disjoint_domains_are_rejected() {
        let grid = GridGeometry::unit(32);
        let amb = ambient(&grid, [[1.0, 0.0], [0.0, 1.0]]);
        let a = rasterize(&ShapeSpec::disk([0.25, 0.5], 0.15), &grid).unwrap();
        let b = rasterize(&ShapeSpec::disk([0.75, 0.5], 0.15), &grid).unwrap();
        let f = amb.interpolate(|_| 1.0);
        assert!(matches!(audit_solution_gap(&amb, &a, &b, &f), Err(Error::EmptyDomain(_))));
    }

    #[test]
    fn seeded_suite_is_reproducible() {
        let a = audit_solution_gap_suite(4, 7, 32).unwrap();
        let b = audit_solution_gap_suite(4, 7, 32).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.instances, 4);
        assert_eq!(a.checks.len(), 12);
        assert!(a.pass, "{a:?}");
    }

    fn square_box(n: usize) -> GridGeometry {
        GridGeometry::new([-0.125, -0.125], 1.25, n).unwrap()
    }

    #[test]
    fn nested_domains_reduce_to_monotonicity() {
        let grid = square_box(40);
        let amb = ambient(&grid, [[1.0, 0.0], [0.0, 1.0]]);
        let big = rasterize(&ShapeSpec::square([0.0, 0.0], 1.0), &grid).unwrap();
        let small = erode(&big, 3.0 * grid.h()).unwrap();
        let rep = audit_eigen_lower_bound(&amb, &small, &big, 3, &EigenOptions::default()).unwrap();
        assert!(rep.pass);
        for c in &rep.details["constants"].as_array().unwrap()[..] {
            assert!(c["A"].as_f64().unwrap() < 1e-10 && c["B"].as_f64().unwrap() < 1e-10);
        }
    }

    #[test]
    fn eroded_square_satisfies_the_lower_bound() {
        let grid = square_box(40);
        let amb = ambient(&grid, [[1.0, 0.0], [0.0, 1.0]]);
        let sq = rasterize(&ShapeSpec::square([0.0, 0.0], 1.0), &grid).unwrap();
        let eroded = erode(&sq, 1.0 / 32.0).unwrap();
        let rep = audit_eigen_lower_bound(&amb, &sq, &eroded, 3, &EigenOptions::default()).unwrap();
        assert!(rep.pass, "{rep:?}");
        let gross = erode(&sq, 0.3).unwrap();
        assert!(matches!(
            audit_eigen_lower_bound(&amb, &sq, &gross, 3, &EigenOptions::default()),
            Err(Error::Inapplicable(_))
        ));
    }
}
