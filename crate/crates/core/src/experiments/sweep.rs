//! Eigenvalue, resolvent and eigenspace-angle sweeps over perturbation families.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::family::PerturbationFamily;
use super::fit::{fit_slope, SlopeFit};
use crate::fem::{
    assemble, solve_dirichlet, AmbientSystem, CoefficientField, CoefficientSpec, DirichletSystem, EnergyNorm,
    FieldVector, LoadSpec, Quadrature,
};
use crate::geometry::{cusp_check, difference_gap, hausdorff_distances, CuspOptions, Modulus, RasterSet};
use crate::spectral::{eigens_with, generalized_angle, EigenOptions, SubspaceHandle};
use crate::{Error, Result};

/// Relative change between the two resolutions above which a record is flagged.
pub const RESOLUTION_FLAG: f64 = 0.1;

/// Shared settings of every sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSetup {
    /// Declared modulus ω of the base boundary.
    pub modulus: Modulus,
    /// Cusp parameter r of the base domain.
    pub r: f64,
    #[serde(default)]
    pub coefficient: CoefficientSpec,
    #[serde(default)]
    pub quadrature: Quadrature,
    /// Repeat the sweep on the grid refined twice and flag changes above 10%.
    #[serde(default)]
    pub resolution_check: bool,
    /// Cusp verification of the base domain; `null` skips it.
    #[serde(default = "default_cusp")]
    pub cusp: Option<CuspOptions>,
    #[serde(default)]
    pub eigen: EigenOptions,
    /// Smallness threshold; defaults to `φ⁻¹(ψ(r)/4)`.
    #[serde(default)]
    pub delta0: Option<f64>,
}

fn default_cusp() -> Option<CuspOptions> {
    Some(CuspOptions::default())
}

impl SweepSetup {
    pub fn new(modulus: Modulus, r: f64) -> Self {
        SweepSetup {
            modulus,
            r,
            coefficient: CoefficientSpec::default(),
            quadrature: Quadrature::default(),
            resolution_check: false,
            cusp: default_cusp(),
            eigen: EigenOptions::default(),
            delta0: None,
        }
    }

    pub fn delta0(&self) -> Result<f64> {
        match self.delta0 {
            Some(d) if d > 0.0 => Ok(d),
            Some(d) => Err(Error::Domain(format!("delta0 must be positive, got {d}"))),
            None => self.modulus.phi_inv(self.modulus.psi(self.r)? / 4.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Eigen,
    Resolvent,
    Angle,
}

/// Raster distances between the base domain and one member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredDistances {
    pub closed: f64,
    pub open: f64,
    pub pompeiu: f64,
    pub weakest: f64,
    /// `e(Ω₁ Δ Ω₂, ∂Ω₁)`.
    pub difference_gap: f64,
}

fn measure(base: &RasterSet, member: &RasterSet) -> Result<MeasuredDistances> {
    let d = hausdorff_distances(base, member)?;
    Ok(MeasuredDistances {
        closed: d.closed,
        open: d.open,
        pompeiu: d.pompeiu,
        weakest: d.weakest,
        difference_gap: difference_gap(base, member, base)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub base: Vec<f64>,
    pub member: Vec<f64>,
    /// `|λ_n(Ω₁) − λ_n(Ω₂)|`.
    pub delta: Vec<f64>,
    /// `|Δλ_n| / (ω(ε_meas) + ε_meas)`.
    pub ratio: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventRecord {
    /// `‖u₁ − u₂‖²_V`.
    pub defect_sq: f64,
    pub v_dual: f64,
    pub l_dual: f64,
    /// `φ(ε_meas)·‖f‖_{L′}·‖f‖_{V′}`.
    pub bound: f64,
    pub gamma: f64,
    /// `φ(d_HS)`.
    pub phi_hs: f64,
    pub gamma_hs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRecord {
    pub angle: f64,
    /// Dimension of the eigenspace.
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    /// Nominal perturbation size.
    pub eps: f64,
    pub distances: MeasuredDistances,
    /// The measured ε the bound is evaluated at.
    pub eps_meas: f64,
    /// `φ(ε_meas) = ε_meas + ω(ε_meas)`.
    pub phi: f64,
    pub below_delta0: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen: Option<EigenRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolvent: Option<ResolventRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<AngleRecord>,
    /// Headline quantity on the refined grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined: Option<f64>,
    pub resolution_flag: bool,
}

impl SweepRecord {
    /// `|Δλ₁|`, `‖u₁ − u₂‖²_V` or the angle.
    pub fn headline(&self) -> f64 {
        if let Some(e) = &self.eigen {
            e.delta[0]
        } else if let Some(r) = &self.resolvent {
            r.defect_sq
        } else if let Some(a) = &self.angle {
            a.angle
        } else {
            f64::NAN
        }
    }

    /// Headline divided by its bound: `|Δλ₁|/φ`, `Γ̂` or `angle/φ^{1/2}`.
    pub fn ratio(&self) -> f64 {
        if let Some(e) = &self.eigen {
            e.ratio[0]
        } else if let Some(r) = &self.resolvent {
            r.gamma
        } else if let Some(a) = &self.angle {
            safe_ratio(a.angle, self.phi.sqrt())
        } else {
            f64::NAN
        }
    }
}

fn safe_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Records in schedule order plus fitted rate and empirical constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_h: Option<f64>,
    pub delta0: f64,
    pub records: Vec<SweepRecord>,
    /// Log-log fit of the headline quantity against `φ(ε_meas)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<SlopeFit>,
    /// Maximum ratio over the records with `ε_meas > 0`.
    pub ratio_max: f64,
    pub ratio_median: f64,
    /// Headline quantity nonincreasing as ε decreases.
    pub monotone: bool,
    pub flagged: usize,
}

impl SweepReport {
    fn assemble(kind: SweepKind, h: f64, delta0: f64, records: Vec<SweepRecord>, refined_h: Option<f64>) -> Self {
        let pts: Vec<(f64, f64)> =
            records.iter().filter(|r| r.eps_meas > 0.0 && r.headline() > 0.0).map(|r| (r.phi, r.headline())).collect();
        let fit = fit_slope(&pts).ok();
        let mut ratios: Vec<f64> = records.iter().filter(|r| r.eps_meas > 0.0).map(|r| r.ratio()).collect();
        ratios.sort_by(f64::total_cmp);
        let ratio_max = ratios.last().copied().unwrap_or(0.0);
        let ratio_median = median(&ratios);
        let monotone = is_monotone(&records.iter().map(|r| r.headline()).collect::<Vec<_>>());
        let flagged = records.iter().filter(|r| r.resolution_flag).count();
        SweepReport { kind, h, refined_h, delta0, records, fit, ratio_max, ratio_median, monotone, flagged }
    }

    /// One row per record.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> =
            ["eps", "d_closed", "d_open", "d_pompeiu", "d_weakest", "difference_gap", "eps_meas", "phi", "below_delta0"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        let n_eig = self.records.first().and_then(|r| r.eigen.as_ref()).map_or(0, |e| e.delta.len());
        match self.kind {
            SweepKind::Eigen => {
                for n in 1..=n_eig {
                    for c in ["lambda_base", "lambda", "dlambda", "ratio"] {
                        header.push(format!("{c}_{n}"));
                    }
                }
            }
            SweepKind::Resolvent => {
                header.extend(
                    ["defect_sq", "v_dual", "l_dual", "bound", "gamma", "phi_hs", "gamma_hs"].iter().map(|s| s.to_string()),
                )
            }
            SweepKind::Angle => header.extend(["angle", "dim"].iter().map(|s| s.to_string())),
        }
        header.push("refined".into());
        header.push("resolution_flag".into());
        out.write_record(&header).map_err(csv_err)?;
        for r in &self.records {
            let d = &r.distances;
            let mut row: Vec<String> = [r.eps, d.closed, d.open, d.pompeiu, d.weakest, d.difference_gap, r.eps_meas, r.phi]
                .iter()
                .map(|v| num(*v))
                .collect();
            row.push(r.below_delta0.to_string());
            if let Some(e) = &r.eigen {
                for n in 0..e.delta.len() {
                    row.extend([e.base[n], e.member[n], e.delta[n], e.ratio[n]].iter().map(|v| num(*v)));
                }
            }
            if let Some(x) = &r.resolvent {
                row.extend([x.defect_sq, x.v_dual, x.l_dual, x.bound, x.gamma, x.phi_hs, x.gamma_hs].iter().map(|v| num(*v)));
            }
            if let Some(a) = &r.angle {
                row.push(num(a.angle));
                row.push(a.dim.to_string());
            }
            row.push(r.refined.map_or(String::new(), num));
            row.push(r.resolution_flag.to_string());
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Two columns `phi,value` for plotting.
    pub fn write_plot_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["phi", "value"]).map_err(csv_err)?;
        for r in &self.records {
            out.write_record([num(r.phi), num(r.headline())]).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

// values in schedule order (ε decreasing) must not increase
fn is_monotone(values: &[f64]) -> bool {
    let scale = values.iter().copied().fold(0.0, f64::max);
    values.windows(2).all(|w| w[1] <= w[0] + 1e-9 * scale)
}

struct Prepared {
    ambient: Arc<AmbientSystem>,
    base: RasterSet,
    members: Vec<(f64, RasterSet)>,
}

fn prepare(fam: &PerturbationFamily, setup: &SweepSetup, verify: bool) -> Result<Prepared> {
    fam.validate()?;
    let base = fam.base_set()?;
    if verify {
        if let Some(opts) = &setup.cusp {
            let report = cusp_check(&base, &setup.modulus, setup.r, opts)?;
            if !report.pass {
                return Err(Error::Domain(format!(
                    "base domain fails the ω-cusp condition with r = {} at {} of {} boundary samples",
                    setup.r,
                    report.failures().count(),
                    report.samples.len()
                )));
            }
        }
    }
    let coeff = CoefficientField::from_spec(&setup.coefficient, &fam.grid)?;
    let ambient = assemble(&fam.grid, &coeff, setup.quadrature)?;
    let members = fam.members()?;
    Ok(Prepared { ambient, base, members })
}

fn record_shell(setup: &SweepSetup, eps: f64, distances: MeasuredDistances, eps_meas: f64) -> Result<SweepRecord> {
    let phi = setup.modulus.phi(eps_meas)?;
    Ok(SweepRecord {
        eps,
        distances,
        eps_meas,
        phi,
        below_delta0: eps_meas <= setup.delta0()?,
        eigen: None,
        resolvent: None,
        angle: None,
        refined: None,
        resolution_flag: false,
    })
}

/// Runs `pass` on the family's grid and, when requested, on the refined grid,
/// then flags and checks the headline quantity.
fn with_resolution(
    fam: &PerturbationFamily,
    setup: &SweepSetup,
    kind: SweepKind,
    check_monotone: bool,
    pass: impl Fn(&PerturbationFamily, bool) -> Result<Vec<SweepRecord>>,
) -> Result<SweepReport> {
    let mut records = pass(fam, true)?;
    let values: Vec<f64> = records.iter().map(|r| r.headline()).collect();
    if check_monotone && !is_monotone(&values) {
        return Err(Error::Resolution(format!(
            "{kind:?} sweep is not monotone in ε at h = {}: {values:?}",
            fam.grid.h()
        )));
    }
    let mut refined_h = None;
    if setup.resolution_check {
        let fine = fam.on_grid(fam.grid.refined(2));
        let fine_records = pass(&fine, false)?;
        let fine_values: Vec<f64> = fine_records.iter().map(|r| r.headline()).collect();
        if check_monotone && !is_monotone(&fine_values) {
            return Err(Error::Resolution(format!(
                "{kind:?} sweep is not monotone in ε at h = {}: {fine_values:?}",
                fine.grid.h()
            )));
        }
        for (r, f) in records.iter_mut().zip(fine_values) {
            let coarse = r.headline();
            r.refined = Some(f);
            let scale = coarse.abs().max(f.abs());
            r.resolution_flag = scale > 0.0 && (coarse - f).abs() > RESOLUTION_FLAG * f.abs().max(1e-300);
        }
        refined_h = Some(fine.grid.h());
    }
    Ok(SweepReport::assemble(kind, fam.grid.h(), setup.delta0()?, records, refined_h))
}

/// `|λ_n(Ω₁) − λ_n(Ω₂)|` for `n ≤ n_max` along the family, with `ε_meas = d^HP`.
pub fn eigen_stability_sweep(fam: &PerturbationFamily, setup: &SweepSetup, n_max: usize) -> Result<SweepReport> {
    if n_max == 0 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    with_resolution(fam, setup, SweepKind::Eigen, true, |fam, verify| {
        let prep = prepare(fam, setup, verify)?;
        let sys1 = DirichletSystem::restrict(&prep.ambient, &prep.base)?;
        let base_vals = eigens_with(&sys1, n_max, &setup.eigen)?.values;
        drop(sys1);
        let mut out = Vec::with_capacity(prep.members.len());
        for (eps, member) in &prep.members {
            let dist = measure(&prep.base, member)?;
            let mut rec = record_shell(setup, *eps, dist, dist.pompeiu)?;
            let vals = if *member == prep.base {
                base_vals.clone()
            } else {
                let sys2 = DirichletSystem::restrict(&prep.ambient, member)?;
                eigens_with(&sys2, n_max, &setup.eigen)?.values
            };
            check_domain_monotonicity(&prep.base, member, &base_vals, &vals)?;
            let delta: Vec<f64> = base_vals.iter().zip(&vals).map(|(a, b)| (a - b).abs()).collect();
            let ratio = delta.iter().map(|d| safe_ratio(*d, rec.phi)).collect();
            rec.eigen = Some(EigenRecord { base: base_vals.clone(), member: vals, delta, ratio });
            out.push(rec);
        }
        Ok(out)
    })
}

fn check_domain_monotonicity(base: &RasterSet, member: &RasterSet, lb: &[f64], lm: &[f64]) -> Result<()> {
    let tol = 1e-9;
    let bad = if member.is_subset_of(base) {
        lb.iter().zip(lm).position(|(b, m)| *m < b * (1.0 - tol))
    } else if base.is_subset_of(member) {
        lb.iter().zip(lm).position(|(b, m)| *m > b * (1.0 + tol))
    } else {
        None
    };
    match bad {
        Some(n) => Err(Error::Numerics(format!(
            "domain monotonicity violated for λ_{}: base {} member {}",
            n + 1,
            lb[n],
            lm[n]
        ))),
        None => Ok(()),
    }
}

/// `‖u₁ − u₂‖²_V` against `φ(ε_meas)‖f‖_{L′}‖f‖_{V′}` with
/// `ε_meas = e(Ω₁ Δ Ω₂, ∂Ω₁)`, and the same ratio at `d_HS`.
pub fn resolvent_sweep(fam: &PerturbationFamily, setup: &SweepSetup, load: &LoadSpec) -> Result<SweepReport> {
    with_resolution(fam, setup, SweepKind::Resolvent, true, |fam, verify| {
        let prep = prepare(fam, setup, verify)?;
        let amb = &prep.ambient;
        amb.friedrichs_constant()?;
        let f = load.sample(amb)?;
        let dual = amb.dual_norms(&f)?;
        let sys1 = DirichletSystem::restrict(amb, &prep.base)?;
        let u1 = solve_dirichlet(&sys1, &f)?.u;
        drop(sys1);
        let mut out = Vec::with_capacity(prep.members.len());
        for (eps, member) in &prep.members {
            let dist = measure(&prep.base, member)?;
            let mut rec = record_shell(setup, *eps, dist, dist.difference_gap)?;
            let defect_sq = if *member == prep.base {
                0.0
            } else {
                let sys2 = DirichletSystem::restrict(amb, member)?;
                let u2 = solve_dirichlet(&sys2, &f)?.u;
                let d = u1.sub(&u2);
                amb.stiffness().bilinear(&d, &d).max(0.0)
            };
            let scale = dual.l_dual * dual.v_dual;
            let bound = rec.phi * scale;
            let phi_hs = setup.modulus.phi(dist.weakest)?;
            rec.resolvent = Some(ResolventRecord {
                defect_sq,
                v_dual: dual.v_dual,
                l_dual: dual.l_dual,
                bound,
                gamma: safe_ratio(defect_sq, bound),
                phi_hs,
                gamma_hs: safe_ratio(defect_sq, phi_hs * scale),
            });
            out.push(rec);
        }
        Ok(out)
    })
}

/// Generalized angle between the `k`-th eigenspace of the base domain (the
/// `k`-th cluster of resolvent eigenvalues `ν = 1/λ`, counted from the top)
/// and the span of member eigenvectors with `|ν − ν_k| < radius`.
pub fn angle_sweep(fam: &PerturbationFamily, setup: &SweepSetup, k: usize, radius: f64) -> Result<SweepReport> {
    if k == 0 {
        return Err(Error::Domain("eigenspace index k starts at 1".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("gap radius must be positive, got {radius}")));
    }
    with_resolution(fam, setup, SweepKind::Angle, false, |fam, verify| {
        let prep = prepare(fam, setup, verify)?;
        let amb = &prep.ambient;
        let sys1 = DirichletSystem::restrict(amb, &prep.base)?;
        let (nu, e1) = isolated_cluster(&sys1, k, radius, &setup.eigen)?;
        drop(sys1);
        let h1 = SubspaceHandle::new(amb, e1.clone(), EnergyNorm::Operator)?;
        let mut out = Vec::with_capacity(prep.members.len());
        for (eps, member) in &prep.members {
            let dist = measure(&prep.base, member)?;
            let mut rec = record_shell(setup, *eps, dist, dist.difference_gap)?;
            let angle = if *member == prep.base {
                0.0
            } else {
                let sys2 = DirichletSystem::restrict(amb, member)?;
                let e2 = disk_span(&sys2, nu, radius, e1.len(), &setup.eigen)?;
                if e2.len() != e1.len() {
                    return Err(Error::Gap(format!(
                        "member ε = {eps} has {} resolvent eigenvalues within {radius} of ν = {nu}, base cluster has {}",
                        e2.len(),
                        e1.len()
                    )));
                }
                generalized_angle(&h1, &SubspaceHandle::new(amb, e2, EnergyNorm::Operator)?)?
            };
            rec.angle = Some(AngleRecord { angle, dim: e1.len() });
            out.push(rec);
        }
        Ok(out)
    })
}

/// `ν_k` and the eigenvectors of the `k`-th cluster, checking that
/// `B_{2r}(ν_k)` holds no other resolvent eigenvalue.
fn isolated_cluster(sys: &DirichletSystem, k: usize, r: f64, opts: &EigenOptions) -> Result<(f64, Vec<FieldVector>)> {
    let dim = sys.dim();
    let mut m = (2 * k + 2).min(dim);
    loop {
        let e = eigens_with(sys, m, opts)?;
        let labels = &e.clusters;
        let target = labels.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().nth(k - 1);
        let complete = labels.last().is_some_and(|&l| Some(l) > target);
        if let (Some(t), true) = (target, complete || m == dim) {
            let members: Vec<usize> = (0..e.len()).filter(|&i| labels[i] == t).collect();
            let nu = members.iter().map(|&i| 1.0 / e.values[i]).sum::<f64>() / members.len() as f64;
            if let Some(j) = (0..e.len()).find(|&j| labels[j] != t && (1.0 / e.values[j] - nu).abs() < 2.0 * r) {
                return Err(Error::Gap(format!(
                    "resolvent eigenvalue {} lies within 2r = {} of ν_{k} = {nu}",
                    1.0 / e.values[j],
                    2.0 * r
                )));
            }
            if 1.0 / e.values[m - 1] < nu - 2.0 * r || m == dim {
                return Ok((nu, members.into_iter().map(|i| e.vectors[i].clone()).collect()));
            }
        } else if m == dim {
            return Err(Error::Gap(format!("the domain has fewer than {k} eigenvalue clusters")));
        }
        m = (2 * m).min(dim);
    }
}

/// Eigenvectors whose resolvent eigenvalue lies in `|ν − center| < r`.
fn disk_span(sys: &DirichletSystem, center: f64, r: f64, hint: usize, opts: &EigenOptions) -> Result<Vec<FieldVector>> {
    let dim = sys.dim();
    let mut m = (hint + 2).min(dim);
    loop {
        let e = eigens_with(sys, m, opts)?;
        if 1.0 / e.values[m - 1] <= center - r || m == dim {
            return Ok((0..e.len())
                .filter(|&i| (1.0 / e.values[i] - center).abs() < r)
                .map(|i| e.vectors[i].clone())
                .collect());
        }
        m = (2 * m).min(dim);
    }
}
