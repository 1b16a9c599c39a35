//! Configuration-driven runs: one JSON config in, one directory of
//! `results.csv`, `summary.json` and `manifest.json` out.

pub mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::experiments::{
    angle_sweep, audit_eigen_lower_bound, audit_geometry, audit_solution_gap, audit_solution_gap_suite, eigen_stability_sweep,
    resolvent_sweep, AuditReport, GeometryAuditOptions, GeometrySuite, Perturbation, PerturbationFamily, SweepReport,
    SweepSetup,
};
use crate::fem::{assemble, solve_dirichlet, CoefficientField, CoefficientSpec, DirichletSystem, LoadSpec, Quadrature};
use crate::geometry::{
    co_gap, cusp_check, difference_gap, gap, hausdorff_distances, rasterize, CuspOptions, GridGeometry, Modulus,
    ShapeSpec,
};
use crate::spectral::{eigens_with, EigenOptions};
use crate::{Error, Result, VERSION};

pub use report::{merge_runs, ReportOptions};

/// Version of the artifact layout; `report` refuses to mix versions.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub grid: GridGeometry,
    #[serde(default)]
    pub coefficient: CoefficientSpec,
    #[serde(default)]
    pub quadrature: Quadrature,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    /// All distances between two shapes.
    Metrics { x: ShapeSpec, y: ShapeSpec },
    /// Cusp condition at the boundary samples of a shape.
    Cusp {
        shape: ShapeSpec,
        modulus: Modulus,
        r: f64,
        #[serde(default)]
        options: CuspOptions,
    },
    /// Lowest `k` Dirichlet eigenvalues.
    Eig {
        shape: ShapeSpec,
        k: usize,
        #[serde(default)]
        eigen: EigenOptions,
    },
    /// Weak solution of `−div(A∇u) = f`.
    Poisson {
        shape: ShapeSpec,
        #[serde(default)]
        load: LoadSpec,
    },
    Sweep {
        base: ShapeSpec,
        perturbation: Perturbation,
        schedule: Vec<f64>,
        setup: SweepSetup,
        mode: SweepMode,
    },
    Audit { audit: AuditSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepMode {
    Eigen { n_max: usize },
    Resolvent {
        #[serde(default)]
        load: LoadSpec,
    },
    Angle { k: usize, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AuditSpec {
    /// Solution-gap inequalities for one pair of domains.
    SolutionGap {
        omega1: ShapeSpec,
        omega2: ShapeSpec,
        #[serde(default)]
        load: LoadSpec,
    },
    /// Seeded solution-gap instances on the unit box at the grid resolution.
    SolutionGapSuite { instances: usize },
    EigenLowerBound {
        omega1: ShapeSpec,
        omega2: ShapeSpec,
        n: usize,
        #[serde(default)]
        eigen: EigenOptions,
    },
    /// Seeded geometric property suite on the unit box at the grid resolution.
    Geometry {
        suite: GeometrySuite,
        instances: usize,
        #[serde(default = "default_directions")]
        directions: usize,
        #[serde(default)]
        moduli: Vec<crate::experiments::ModulusChoice>,
    },
}

fn default_directions() -> usize {
    64
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Metrics { .. } => "metrics".into(),
            Command::Cusp { .. } => "cusp".into(),
            Command::Eig { .. } => "eig".into(),
            Command::Poisson { .. } => "poisson".into(),
            Command::Sweep { mode, .. } => format!(
                "sweep/{}",
                match mode {
                    SweepMode::Eigen { .. } => "eigen",
                    SweepMode::Resolvent { .. } => "resolvent",
                    SweepMode::Angle { .. } => "angle",
                }
            ),
            Command::Audit { audit } => format!(
                "audit/{}",
                match audit {
                    AuditSpec::SolutionGap { .. } | AuditSpec::SolutionGapSuite { .. } => "solution_gap".to_string(),
                    AuditSpec::EigenLowerBound { .. } => "eigen_lower_bound".to_string(),
                    AuditSpec::Geometry { suite, .. } => suite.name().to_string(),
                }
            ),
        }
    }
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub resolution_check: bool,
}

impl RunConfig {
    /// Parses a config file, or the config embedded in a run manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        match serde_json::from_str::<RunConfig>(text) {
            Ok(c) => Ok(c),
            Err(first) => {
                if let Ok(serde_json::Value::Object(m)) = serde_json::from_str::<serde_json::Value>(text) {
                    if m.contains_key("schema_version") {
                        if let Some(c) = m.get("config") {
                            return serde_json::from_value(c.clone())
                                .map_err(|e| Error::Config(format!("manifest config: {e}")));
                        }
                    }
                }
                Err(Error::Config(format!("line {}, column {}: {first}", first.line(), first.column())))
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.output = Some(out.clone());
        }
        if o.resolution_check {
            if let Command::Sweep { setup, .. } = &mut self.command {
                setup.resolution_check = true;
            }
        }
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let at_least_one = |name: &str, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be at least 1")))
            }
        };
        match &self.command {
            Command::Metrics { .. } => {}
            Command::Cusp { r, options, .. } => {
                positive("command.r", *r)?;
                at_least_one("command.options.directions", options.directions)?;
                at_least_one("command.options.stride", options.stride)?;
            }
            Command::Eig { k, .. } => at_least_one("command.k", *k)?,
            Command::Poisson { load, .. } => load.validate()?,
            Command::Sweep { base, perturbation, schedule, setup, mode } => {
                PerturbationFamily { base: base.clone(), perturbation: perturbation.clone(), schedule: schedule.clone(), grid: self.grid }
                    .validate()?;
                positive("command.setup.r", setup.r)?;
                if setup.coefficient != CoefficientSpec::default() || setup.quadrature != Quadrature::default() {
                    return Err(Error::Config(
                        "command.setup: set coefficient and quadrature at the top level of the config".into(),
                    ));
                }
                match mode {
                    SweepMode::Eigen { n_max } => at_least_one("command.mode.n_max", *n_max)?,
                    SweepMode::Resolvent { load } => load.validate()?,
                    SweepMode::Angle { k, radius } => {
                        at_least_one("command.mode.k", *k)?;
                        positive("command.mode.radius", *radius)?;
                    }
                }
            }
            Command::Audit { audit } => match audit {
                AuditSpec::SolutionGap { load, .. } => load.validate()?,
                AuditSpec::SolutionGapSuite { instances } => at_least_one("command.audit.instances", *instances)?,
                AuditSpec::EigenLowerBound { n, .. } => at_least_one("command.audit.n", *n)?,
                AuditSpec::Geometry { instances, directions, .. } => {
                    at_least_one("command.audit.instances", *instances)?;
                    at_least_one("command.audit.directions", *directions)?;
                }
            },
        }
        if self.output.is_none() {
            return Err(Error::Config("no output directory: set \"output\" or pass --out".into()));
        }
        Ok(())
    }

    /// SHA-256 of the normalized config.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Process exit status for an error: 2 for invalid input, 3 for numerical
/// failures, 1 for I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Domain(_)
        | Error::EmptyDomain(_)
        | Error::Margin(_)
        | Error::Modulus(_)
        | Error::Coefficient(_) => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub summary: serde_json::Value,
}

struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    summary: serde_json::Value,
}

/// Validates, executes and writes all artifacts of one config.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let dir = config.output.clone().expect("validated");
    let art = execute(config)?;
    fs::create_dir_all(&dir)?;
    let mut hashes = serde_json::Map::new();
    let mut names = Vec::new();
    for (name, bytes) in &art.files {
        write_atomic(&dir.join(name), bytes)?;
        hashes.insert(name.clone(), hex::encode(Sha256::digest(bytes)).into());
        names.push(name.clone());
    }
    let summary = serde_json::to_vec_pretty(&art.summary).map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(&dir.join("summary.json"), &summary)?;
    hashes.insert("summary.json".into(), hex::encode(Sha256::digest(&summary)).into());
    names.push("summary.json".into());

    let mut normalized = config.clone();
    normalized.output = None;
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "tool": "domain-stability",
        "version": VERSION,
        "command": config.command.name(),
        "config_sha256": normalized.digest(),
        "seed": config.seed,
        "grid": config.grid,
        "h": config.grid.h(),
        "config": normalized,
        "files": hashes,
    });
    let bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(&dir.join("manifest.json"), &bytes)?;
    names.push("manifest.json".into());
    Ok(RunOutcome { dir, files: names, summary: art.summary })
}

/// Writes through a temporary file in the same directory and renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn to_value(v: impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn execute(config: &RunConfig) -> Result<Artifacts> {
    let grid = config.grid;
    let ambient = || -> Result<_> {
        let coeff = CoefficientField::from_spec(&config.coefficient, &grid)?;
        assemble(&grid, &coeff, config.quadrature)
    };
    match &config.command {
        Command::Metrics { x, y } => {
            let (a, b) = (rasterize(x, &grid)?, rasterize(y, &grid)?);
            let d = hausdorff_distances(&a, &b)?;
            let row = [
                d.closed,
                d.open,
                d.pompeiu,
                d.weakest,
                gap(&a, &b)?,
                gap(&b, &a)?,
                co_gap(&a, &b)?,
                co_gap(&b, &a)?,
                difference_gap(&a, &b, &a)?,
            ];
            let mut csv = b"d_closed,d_open,d_pompeiu,d_weakest,gap_xy,gap_yx,co_gap_xy,co_gap_yx,difference_gap\n".to_vec();
            csv.extend(row.iter().map(|v| num(*v)).collect::<Vec<_>>().join(",").bytes());
            csv.push(b'\n');
            Ok(Artifacts { files: vec![("results.csv".into(), csv)], summary: json!({ "distances": d }) })
        }
        Command::Cusp { shape, modulus, r, options } => {
            let set = rasterize(shape, &grid)?;
            let rep = cusp_check(&set, modulus, *r, options)?;
            let mut csv = b"x,y,xi_x,xi_y,margin,pass\n".to_vec();
            for s in &rep.samples {
                let (dx, dy) = s.direction.map_or((String::new(), String::new()), |d| (num(d[0]), num(d[1])));
                writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    num(s.point[0]),
                    num(s.point[1]),
                    dx,
                    dy,
                    num(s.margin),
                    s.direction.is_some()
                )?;
            }
            let failures = rep.failures().count();
            Ok(Artifacts {
                files: vec![("results.csv".into(), csv)],
                summary: json!({
                    "pass": rep.pass, "samples": rep.samples.len(), "failures": failures,
                    "condition": rep.condition, "r": rep.r, "directions": rep.directions,
                }),
            })
        }
        Command::Eig { shape, k, eigen } => {
            let amb = ambient()?;
            let sys = DirichletSystem::restrict(&amb, &rasterize(shape, &grid)?)?;
            let e = eigens_with(&sys, *k, eigen)?;
            let mut csv = Vec::new();
            e.write_csv(&mut csv)?;
            Ok(Artifacts {
                files: vec![("results.csv".into(), csv)],
                summary: json!({
                    "eigenvalues": e.values, "residuals": e.residuals, "clusters": e.clusters,
                    "method": e.method, "iterations": e.iterations, "unknowns": sys.dim(),
                }),
            })
        }
        Command::Poisson { shape, load } => {
            let amb = ambient()?;
            let sys = DirichletSystem::restrict(&amb, &rasterize(shape, &grid)?)?;
            let f = load.sample(&amb)?;
            let sol = solve_dirichlet(&sys, &f)?;
            let mut csv = Vec::new();
            amb.write_field_csv(&sol.u, &mut csv)?;
            let max = sol.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = sol.u.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(Artifacts {
                files: vec![("results.csv".into(), csv)],
                summary: json!({
                    "max": max, "min": min, "energy": sol.energy, "residual": sol.residual,
                    "dual_bound": sol.dual, "unknowns": sys.dim(),
                }),
            })
        }
        Command::Sweep { base, perturbation, schedule, setup, mode } => {
            let fam = PerturbationFamily::new(base.clone(), perturbation.clone(), schedule.clone(), grid)?;
            let mut setup = setup.clone();
            setup.coefficient = config.coefficient.clone();
            setup.quadrature = config.quadrature;
            let rep = match mode {
                SweepMode::Eigen { n_max } => eigen_stability_sweep(&fam, &setup, *n_max)?,
                SweepMode::Resolvent { load } => resolvent_sweep(&fam, &setup, load)?,
                SweepMode::Angle { k, radius } => angle_sweep(&fam, &setup, *k, *radius)?,
            };
            sweep_artifacts(&rep)
        }
        Command::Audit { audit } => {
            let rep = match audit {
                AuditSpec::SolutionGap { omega1, omega2, load } => {
                    let amb = ambient()?;
                    let f = load.sample(&amb)?;
                    audit_solution_gap(&amb, &rasterize(omega1, &grid)?, &rasterize(omega2, &grid)?, &f)?
                }
                AuditSpec::SolutionGapSuite { instances } => audit_solution_gap_suite(*instances, config.seed, grid.n)?,
                AuditSpec::EigenLowerBound { omega1, omega2, n, eigen } => {
                    let amb = ambient()?;
                    audit_eigen_lower_bound(&amb, &rasterize(omega1, &grid)?, &rasterize(omega2, &grid)?, *n, eigen)?
                }
                AuditSpec::Geometry { suite, instances, directions, moduli } => {
                    let opts = GeometryAuditOptions { n: grid.n, directions: *directions, moduli: moduli.clone() };
                    audit_geometry(*suite, *instances, config.seed, &opts)?
                }
            };
            audit_artifacts(&rep)
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn sweep_artifacts(rep: &SweepReport) -> Result<Artifacts> {
    let mut csv = Vec::new();
    rep.write_csv(&mut csv)?;
    let mut plot = Vec::new();
    rep.write_plot_csv(&mut plot)?;
    let summary = json!({
        "kind": rep.kind,
        "h": rep.h,
        "refined_h": rep.refined_h,
        "delta0": rep.delta0,
        "fit": rep.fit,
        "ratio_max": rep.ratio_max,
        "ratio_median": rep.ratio_median,
        "bounded": rep.ratio_max <= 1.5 * rep.ratio_median,
        "monotone": rep.monotone,
        "resolution_flags": rep.flagged,
        "records": to_value(&rep.records),
    });
    Ok(Artifacts { files: vec![("results.csv".into(), csv), ("plot.csv".into(), plot)], summary })
}

fn audit_artifacts(rep: &AuditReport) -> Result<Artifacts> {
    let mut csv = Vec::new();
    rep.write_csv(&mut csv)?;
    let summary = json!({
        "audit": rep.audit,
        "instances": rep.instances,
        "rejected": rep.rejected,
        "worst_slack": rep.worst_slack,
        "tolerance": rep.tolerance,
        "pass": rep.pass,
        "violations": rep.violations,
        "seed": rep.seed,
        "details": rep.details,
    });
    Ok(Artifacts { files: vec![("results.csv".into(), csv)], summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configs_reject_unknown_keys_and_missing_grid() {
        let ok = r#"{"grid": {"origin": [0, 0], "side": 1, "n": 8},
                     "command": {"kind": "metrics", "x": {"kind": "disk", "center": [0.5, 0.5], "radius": 0.2},
                                 "y": {"kind": "disk", "center": [0.5, 0.5], "radius": 0.2}}}"#;
        let c = RunConfig::from_json(ok).unwrap();
        assert_eq!(c.seed, 0);
        let unknown = ok.replacen("\"grid\"", "\"colour\": 1, \"grid\"", 1);
        assert!(matches!(RunConfig::from_json(&unknown), Err(Error::Config(_))));
        let missing = r#"{"command": {"kind": "metrics", "x": {"kind": "disk", "center": [0.5, 0.5], "radius": 0.2},
                                 "y": {"kind": "disk", "center": [0.5, 0.5], "radius": 0.2}}}"#;
        let err = RunConfig::from_json(missing).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        assert!(err.to_string().contains("grid"));
    }

    #[test]
    fn missing_output_is_a_validation_failure() {
        let c = RunConfig {
            seed: 0,
            grid: GridGeometry::unit(8),
            coefficient: CoefficientSpec::default(),
            quadrature: Quadrature::default(),
            output: None,
            command: Command::Eig { shape: ShapeSpec::square([0.25, 0.25], 0.5), k: 2, eigen: EigenOptions::default() },
        };
        let e = run(&c).unwrap_err();
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn overrides_replace_seed_and_force_the_dual_run() {
        let mut c: RunConfig = serde_json::from_value(json!({
            "grid": {"origin": [0, 0], "side": 1, "n": 8},
            "seed": 4,
            "command": {"kind": "sweep", "base": {"kind": "disk", "center": [0.5, 0.5], "radius": 0.3},
                        "perturbation": {"kind": "erode"}, "schedule": [0.1, 0.0],
                        "setup": {"modulus": {"kind": "lipschitz", "slope": 1.0}, "r": 0.02},
                        "mode": {"kind": "eigen", "n_max": 1}}
        }))
        .unwrap();
        c.apply(&Overrides { out: Some("x".into()), seed: Some(9), resolution_check: true });
        assert_eq!(c.seed, 9);
        assert_eq!(c.output, Some(PathBuf::from("x")));
        match &c.command {
            Command::Sweep { setup, .. } => assert!(setup.resolution_check),
            _ => unreachable!(),
        }
        assert_eq!(c.command.name(), "sweep/eigen");
    }
}
