//! Acceptance criteria, one line per criterion.
//!
//! Criteria listed in `KNOWN_FAILING` are expected to fail; the target exits
//! nonzero if any other criterion fails or if a known failure starts passing.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use domain_stability::cli::{run, RunConfig};
use domain_stability::experiments::{
    angle_sweep, audit_eigen_lower_bound, audit_geometry, audit_solution_gap_suite, eigen_stability_sweep, fit_slope,
    resolvent_sweep, GeometryAuditOptions, GeometrySuite, Perturbation, PerturbationFamily, SweepSetup,
};
use domain_stability::fem::{assemble, solve_dirichlet, CoefficientField, DirichletSystem, LoadSpec, Quadrature};
use domain_stability::geometry::{erode, rasterize, CuspOptions, GridGeometry, Modulus, ShapeSpec};
use domain_stability::spectral::{eigens, EigenOptions};
use domain_stability::Result;

const KNOWN_FAILING: [u32; 2] = [4, 7];
const SEED: u64 = 20240611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

// box [−1/8, 9/8] with the unit square on node lines
fn square_box(h_inv: usize) -> GridGeometry {
    GridGeometry::new([-0.125, -0.125], 1.25, h_inv * 5 / 4).unwrap()
}

fn unit_square() -> ShapeSpec {
    ShapeSpec::square([0.0, 0.0], 1.0)
}

fn within(got: f64, want: f64, rel: f64) -> bool {
    ((got - want) / want).abs() <= rel
}

/// Dirichlet eigenvalues of the unit square, ascending.
fn square_spectrum(count: usize) -> Vec<f64> {
    let mut v: Vec<f64> =
        (1..=10).flat_map(|m| (1..=10).map(move |n| PI * PI * (m * m + n * n) as f64)).collect();
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

/// Torsion function of the unit square at its center by double sine series.
fn torsion_center() -> f64 {
    let mut s = 0.0;
    for m in (1..400).step_by(2) {
        for n in (1..400).step_by(2) {
            // sin(mπ/2) sin(nπ/2)
            let sign = if ((m - 1) / 2 + (n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let (m, n) = (m as f64, n as f64);
            s += sign * 16.0 / (PI.powi(4) * m * n * (m * m + n * n));
        }
    }
    s
}

fn c1_eigen_oracle() -> Result<Outcome> {
    let exact = square_spectrum(4);
    let solve = |h_inv: usize, k: usize| -> Result<Vec<f64>> {
        let grid = square_box(h_inv);
        let amb = assemble(&grid, &CoefficientField::identity(), Quadrature::Gauss2)?;
        let sys = DirichletSystem::restrict(&amb, &rasterize(&unit_square(), &grid)?)?;
        Ok(eigens(&sys, k)?.values)
    };
    let fine = solve(128, 4)?;
    let rel: Vec<f64> = fine.iter().zip(&exact).map(|(g, w)| (g - w).abs() / w).collect();
    let close = rel.iter().all(|r| *r <= 0.005);
    let lam1: Vec<f64> = [16, 32, 64, 128].iter().map(|&h| solve(h, 1).map(|v| v[0])).collect::<Result<_>>()?;
    let orders: Vec<f64> =
        lam1.windows(3).map(|w| ((w[0] - w[1]) / (w[1] - w[2])).log2()).collect();
    let ordered = orders.iter().all(|p| (p - 2.0).abs() <= 0.2);
    outcome(close && ordered, format!("max rel err {:.2e}, Richardson orders {orders:.3?}", rel.iter().copied().fold(0.0, f64::max)))
}

fn c2_poisson_oracle() -> Result<Outcome> {
    let oracle = torsion_center();
    let grid = square_box(128);
    let amb = assemble(&grid, &CoefficientField::identity(), Quadrature::Gauss2)?;
    let sys = DirichletSystem::restrict(&amb, &rasterize(&unit_square(), &grid)?)?;
    let u = solve_dirichlet(&sys, &amb.interpolate(|_| 1.0))?.u;
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(within(max, oracle, 0.01) && within(oracle, 0.0736713, 1e-6), format!("max u {max:.7}, series {oracle:.7}"))
}

fn c3_friedrichs() -> Result<Outcome> {
    let amb = assemble(&GridGeometry::unit(128), &CoefficientField::identity(), Quadrature::Gauss2)?;
    let p = amb.friedrichs_constant()?;
    let want = 1.0 / (2.0 * PI * PI);
    outcome(within(p, want, 0.005), format!("p {p:.6e}, 1/(2π²) {want:.6e}"))
}

fn erosion_family(h_inv: usize, with_zero: bool) -> PerturbationFamily {
    let mut schedule = vec![1.0 / 16.0, 1.0 / 24.0, 1.0 / 32.0, 1.0 / 48.0, 1.0 / 64.0];
    if with_zero {
        schedule.push(0.0);
    }
    PerturbationFamily::new(unit_square(), Perturbation::Erode, schedule, square_box(h_inv)).unwrap()
}

fn square_setup() -> SweepSetup {
    let mut s = SweepSetup::new(Modulus::lipschitz(1.0), 0.025);
    s.cusp = Some(CuspOptions { stride: 4, ..Default::default() });
    s
}

fn c4_eigen_rate() -> Result<Outcome> {
    let rep = eigen_stability_sweep(&erosion_family(192, false), &square_setup(), 1)?;
    let mut worst: f64 = 0.0;
    for r in &rep.records {
        let exact = 2.0 * PI * PI * (1.0 / (1.0 - 2.0 * r.eps).powi(2) - 1.0);
        worst = worst.max((r.headline() - exact).abs() / exact);
    }
    let slope = rep.fit.as_ref().map_or(f64::NAN, |f| f.slope);
    // the same fit on the closed-form differences
    let exact_pts: Vec<(f64, f64)> =
        rep.records.iter().map(|r| (r.phi, 2.0 * PI * PI * (1.0 / (1.0 - 2.0 * r.eps).powi(2) - 1.0))).collect();
    let exact_slope = fit_slope(&exact_pts)?.slope;
    outcome(
        worst <= 0.1 && (0.95..=1.10).contains(&slope),
        format!("max rel dev {worst:.3e}, slope {slope:.4} (closed form {exact_slope:.4}) vs [0.95, 1.10]"),
    )
}

fn c5_resolvent_bounded() -> Result<Outcome> {
    let mut parts = Vec::new();
    let mut pass = true;
    for h_inv in [192, 384] {
        let mut setup = square_setup();
        if h_inv != 192 {
            setup.cusp = None;
        }
        let rep = resolvent_sweep(&erosion_family(h_inv, false), &setup, &LoadSpec::Constant { value: 1.0 })?;
        pass &= rep.ratio_max <= 1.5 * rep.ratio_median;
        parts.push(format!("h=1/{h_inv}: max/median {:.4}", rep.ratio_max / rep.ratio_median));
    }
    outcome(pass, parts.join(", "))
}

fn c6_metric_suite() -> Result<Outcome> {
    let rep = audit_geometry(GeometrySuite::MetricAxioms, 200, SEED, &GeometryAuditOptions::default())?;
    outcome(rep.pass, format!("{} checks, {} violations, worst slack {:?}", rep.checks.len(), rep.violations, rep.worst_slack))
}

fn c7_cusp_equivalence() -> Result<Outcome> {
    let rep = audit_geometry(GeometrySuite::CuspEquivalence, 500, SEED, &GeometryAuditOptions::default())?;
    let first = rep.details.get("mismatches").and_then(|m| m.get(0)).map(|m| m.to_string()).unwrap_or_default();
    outcome(rep.pass, format!("{} of {} verdicts differ; first {first}", rep.violations, rep.checks.len()))
}

fn c8_geometry_audits() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for suite in [
        GeometrySuite::DilationStability,
        GeometrySuite::BallInCone,
        GeometrySuite::TranslationEscape,
        GeometrySuite::GapComparison,
    ] {
        let rep = audit_geometry(suite, 50, SEED, &GeometryAuditOptions::default())?;
        let audited = rep.checks.len();
        pass &= rep.pass && audited >= 50;
        parts.push(format!("{} {}/{} ok", suite.name(), audited - rep.violations, audited));
    }
    outcome(pass, parts.join(", "))
}

fn c9_solution_gap() -> Result<Outcome> {
    let rep = audit_solution_gap_suite(20, SEED, 96)?;
    // nested pairs make the intersection bound an equality; slack there is rounding
    let negative = rep.checks.iter().filter(|c| c.slack < 0.0).count();
    outcome(
        rep.pass,
        format!(
            "{} instances, worst slack {:.3e} (tolerance {:.1e}), {negative} slacks below zero",
            rep.instances,
            rep.worst_slack.unwrap_or(f64::NAN),
            rep.tolerance
        ),
    )
}

fn c10_eigen_lower_bound() -> Result<Outcome> {
    let grid = square_box(128);
    let amb = assemble(&grid, &CoefficientField::identity(), Quadrature::Gauss2)?;
    let sq = rasterize(&unit_square(), &grid)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for eps in [1.0 / 128.0, 1.0 / 64.0, 1.0 / 32.0] {
        let rep = audit_eigen_lower_bound(&amb, &sq, &erode(&sq, eps)?, 3, &EigenOptions::default())?;
        pass &= rep.checks.iter().all(|c| c.slack >= 0.0);
        let b = rep.details["constants"][2]["B"].as_f64().unwrap_or(f64::NAN);
        parts.push(format!("ε={eps}: worst slack {:.3e}, B₃ {b:.3e}", rep.worst_slack.unwrap_or(f64::NAN)));
    }
    outcome(pass, parts.join(", "))
}

fn c11_angle() -> Result<Outcome> {
    let rep = angle_sweep(&erosion_family(192, true), &square_setup(), 1, 0.0135)?;
    let angles: Vec<f64> = rep.records.iter().map(|r| r.headline()).collect();
    let decreasing = angles.windows(2).all(|w| w[1] < w[0]) && angles.last() == Some(&0.0);
    let slope = rep.fit.as_ref().map_or(f64::NAN, |f| f.slope);
    outcome(decreasing && (0.4..=1.1).contains(&slope), format!("slope {slope:.4}, angles {}", angles.iter().map(|a| format!("{a:.3e}")).collect::<Vec<_>>().join(" ")))
}

fn c12_reproducible() -> Result<Outcome> {
    let configs = [
        r#"{"grid": {"origin": [-0.125, -0.125], "side": 1.25, "n": 40},
            "command": {"kind": "eig", "shape": {"kind": "rectangle", "min": [0, 0], "max": [1, 1]}, "k": 4}}"#,
        r#"{"grid": {"origin": [-0.125, -0.125], "side": 1.25, "n": 40},
            "command": {"kind": "sweep", "base": {"kind": "rectangle", "min": [0, 0], "max": [1, 1]},
                        "perturbation": {"kind": "erode"}, "schedule": [0.09375, 0.0625, 0.03125, 0],
                        "setup": {"modulus": {"kind": "lipschitz", "slope": 1}, "r": 0.025, "cusp": null},
                        "mode": {"kind": "resolvent"}}}"#,
        r#"{"seed": 5, "grid": {"origin": [0, 0], "side": 1, "n": 64},
            "command": {"kind": "audit", "audit": {"kind": "geometry", "suite": "gap_comparison", "instances": 10}}}"#,
    ];
    let tmp = tempfile::tempdir()?;
    let mut same = 0;
    for (i, text) in configs.iter().enumerate() {
        let mut bytes = Vec::new();
        for rep in 0..2 {
            let mut c = RunConfig::from_json(text)?;
            c.output = Some(tmp.path().join(format!("{i}-{rep}")));
            let out = run(&c)?;
            bytes.push(std::fs::read(out.dir.join("results.csv"))?);
        }
        same += usize::from(bytes[0] == bytes[1]);
    }
    outcome(same == configs.len(), format!("{same}/{} configs byte-identical", configs.len()))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Result<Outcome>); 12] = [
        (1, "eigenvalue oracle", c1_eigen_oracle),
        (2, "poisson oracle", c2_poisson_oracle),
        (3, "friedrichs constant", c3_friedrichs),
        (4, "eigenvalue rate", c4_eigen_rate),
        (5, "resolvent boundedness", c5_resolvent_bounded),
        (6, "metric suite", c6_metric_suite),
        (7, "cusp equivalence", c7_cusp_equivalence),
        (8, "geometric property audits", c8_geometry_audits),
        (9, "solution gap audit", c9_solution_gap),
        (10, "eigen lower bound audit", c10_eigen_lower_bound),
        (11, "angle sweep", c11_angle),
        (12, "reproducibility", c12_reproducible),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = 0;
    for (id, name, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("{}: {e}", e.name())),
        };
        let known = KNOWN_FAILING.contains(&id);
        let tag = match (pass, known) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
            (true, true) => "PASS (unexpected)",
        };
        if pass == known {
            unexpected += 1;
        }
        println!("criterion {id:>2} {tag:<17} {name}: {detail} [{:.1}s]", start.elapsed().as_secs_f64());
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria with unexpected outcome");
        ExitCode::FAILURE
    }
}
