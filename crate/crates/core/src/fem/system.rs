//! Q1 assembly on the ambient box, Dirichlet restriction, solves and norms.

use std::io::Write;
use std::ops::Deref;
use std::sync::{Arc, OnceLock};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::{Mat, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coefficient::{CoefficientBounds, CoefficientField, Mat2};
use super::sparse::CsrMatrix;
use crate::geometry::{GridGeometry, RasterSet};
use crate::{Error, Result};

/// Quadrature rule for the stiffness integrals. The mass matrix is always
/// integrated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    #[default]
    Gauss2,
    /// One point per cell. Under-integrates Q1 and admits hourglass modes.
    Midpoint,
}

impl Quadrature {
    fn points(self) -> &'static [([f64; 2], f64)] {
        const G0: f64 = 0.211_324_865_405_187_1; // (1 − 1/√3)/2
        const G1: f64 = 0.788_675_134_594_812_9;
        match self {
            Quadrature::Gauss2 => &[([G0, G0], 0.25), ([G1, G0], 0.25), ([G1, G1], 0.25), ([G0, G1], 0.25)],
            Quadrature::Midpoint => &[([0.5, 0.5], 1.0)],
        }
    }
}

/// Which quadratic form defines the energy norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnergyNorm {
    /// `∫ A(∇u, ∇u)`.
    #[default]
    Operator,
    /// `∫ |∇u|²`.
    Gradient,
}

// local corner order: (0,0), (1,0), (1,1), (0,1)
const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

fn shape_values(q: [f64; 2]) -> [f64; 4] {
    let (x, y) = (q[0], q[1]);
    [(1.0 - x) * (1.0 - y), x * (1.0 - y), x * y, (1.0 - x) * y]
}

fn shape_gradients(q: [f64; 2]) -> [[f64; 2]; 4] {
    let (x, y) = (q[0], q[1]);
    [[-(1.0 - y), -(1.0 - x)], [1.0 - y, -x], [y, x], [-y, 1.0 - x]]
}

/// Element stiffness on a cell of any size (the h-scaling cancels in 2-D).
fn element_stiffness(quad: Quadrature, mut coeff_at: impl FnMut([f64; 2]) -> Mat2) -> [[f64; 4]; 4] {
    let mut ke = [[0.0; 4]; 4];
    for &(q, w) in quad.points() {
        let a = coeff_at(q);
        let g = shape_gradients(q);
        for r in 0..4 {
            let ag = [a[0][0] * g[r][0] + a[0][1] * g[r][1], a[1][0] * g[r][0] + a[1][1] * g[r][1]];
            for c in 0..4 {
                ke[r][c] += w * (ag[0] * g[c][0] + ag[1] * g[c][1]);
            }
        }
    }
    ke
}

fn element_mass(h: f64) -> [[f64; 4]; 4] {
    let mut me = [[0.0; 4]; 4];
    for &(q, w) in Quadrature::Gauss2.points() {
        let n = shape_values(q);
        for r in 0..4 {
            for c in 0..4 {
                me[r][c] += w * h * h * n[r] * n[c];
            }
        }
    }
    me
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct Factor {
    llt: Llt<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for Factor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factor").field("n", &self.n).finish()
    }
}

impl Factor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let sparse = a.to_faer()?;
        let llt = sparse
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Numerics(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(Factor { llt, n: a.dim() })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves for every column of `rhs` in place.
    pub fn solve_columns(&self, rhs: &mut Mat<f64>) {
        self.llt.solve_in_place(rhs.as_mut());
    }
}

/// Stiffness and mass matrices on the interior nodes of the whole box.
#[derive(Debug)]
pub struct AmbientSystem {
    grid: GridGeometry,
    coeff: CoefficientField,
    quadrature: Quadrature,
    bounds: CoefficientBounds,
    k: CsrMatrix,
    m: CsrMatrix,
    g: CsrMatrix,
    friedrichs: OnceLock<f64>,
    k_factor: OnceLock<Arc<Factor>>,
}

/// Assembles the ambient system after validating `coeff` on `grid`.
pub fn assemble(grid: &GridGeometry, coeff: &CoefficientField, quadrature: Quadrature) -> Result<Arc<AmbientSystem>> {
    grid.validate()?;
    let mut bounds = coeff.validate(grid)?;
    let h = grid.h();
    let n = grid.n;
    // ellipticity is also enforced where the stiffness is integrated
    let qpts: Vec<[f64; 2]> = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .flat_map(|(i, j)| {
            let o = grid.node(i, j);
            quadrature.points().iter().map(move |&(q, _)| [o[0] + q[0] * h, o[1] + q[1] * h])
        })
        .collect();
    let (qa, qb) = coeff.check_points(&qpts)?;
    bounds.alpha = bounds.alpha.min(qa);
    bounds.beta = bounds.beta.max(qb);

    let dim = (n - 1) * (n - 1);
    let me = element_mass(h);
    let ge = element_stiffness(quadrature, |_| [[1.0, 0.0], [0.0, 1.0]]);
    let constant_ke = coeff.constant_value().map(|a| element_stiffness(quadrature, |_| a));

    type Trip = (usize, usize, f64);
    let rows: Vec<(Vec<Trip>, Vec<Trip>, Vec<Trip>)> = (0..n)
        .into_par_iter()
        .map(|cj| {
            let (mut kt, mut mt, mut gt) = (Vec::new(), Vec::new(), Vec::new());
            for ci in 0..n {
                let origin = grid.node(ci, cj);
                let ke = constant_ke.unwrap_or_else(|| {
                    element_stiffness(quadrature, |q| coeff.eval([origin[0] + q[0] * h, origin[1] + q[1] * h]))
                });
                let idx: [Option<usize>; 4] =
                    CORNERS.map(|(di, dj)| interior_index(n, ci + di, cj + dj));
                for r in 0..4 {
                    let Some(ir) = idx[r] else { continue };
                    for c in 0..4 {
                        let Some(ic) = idx[c] else { continue };
                        kt.push((ir, ic, ke[r][c]));
                        mt.push((ir, ic, me[r][c]));
                        gt.push((ir, ic, ge[r][c]));
                    }
                }
            }
            (kt, mt, gt)
        })
        .collect();
    let (mut kt, mut mt, mut gt) = (Vec::new(), Vec::new(), Vec::new());
    for (a, b, c) in rows {
        kt.extend(a);
        mt.extend(b);
        gt.extend(c);
    }
    Ok(Arc::new(AmbientSystem {
        grid: *grid,
        coeff: coeff.clone(),
        quadrature,
        bounds,
        k: CsrMatrix::from_triplets(dim, kt),
        m: CsrMatrix::from_triplets(dim, mt),
        g: CsrMatrix::from_triplets(dim, gt),
        friedrichs: OnceLock::new(),
        k_factor: OnceLock::new(),
    }))
}

#[inline]
fn interior_index(n: usize, i: usize, j: usize) -> Option<usize> {
    (i >= 1 && j >= 1 && i < n && j < n).then(|| (i - 1) + (j - 1) * (n - 1))
}

impl AmbientSystem {
    pub fn grid(&self) -> &GridGeometry {
        &self.grid
    }

    pub fn coefficient(&self) -> &CoefficientField {
        &self.coeff
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    /// Ellipticity and continuity constants measured during assembly.
    pub fn bounds(&self) -> CoefficientBounds {
        self.bounds
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.k
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.m
    }

    /// Stiffness of the plain Dirichlet Laplacian (`A = I`).
    pub fn laplacian(&self) -> &CsrMatrix {
        &self.g
    }

    pub fn energy_matrix(&self, norm: EnergyNorm) -> &CsrMatrix {
        match norm {
            EnergyNorm::Operator => &self.k,
            EnergyNorm::Gradient => &self.g,
        }
    }

    /// Number of interior box nodes (the ambient unknowns).
    pub fn dim(&self) -> usize {
        self.k.dim()
    }

    /// Ambient index of node `(i, j)`, `None` on the box frame.
    pub fn node_index(&self, i: usize, j: usize) -> Option<usize> {
        interior_index(self.grid.n, i, j)
    }

    /// Grid coordinates `(i, j)` of an ambient index.
    pub fn node_coords(&self, idx: usize) -> (usize, usize) {
        let m = self.grid.n - 1;
        (idx % m + 1, idx / m + 1)
    }

    pub fn node_position(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.node_coords(idx);
        self.grid.node(i, j)
    }

    /// Nodal interpolant of `f` on the ambient nodes.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> FieldVector {
        FieldVector((0..self.dim()).map(|k| f(self.node_position(k))).collect())
    }

    pub(crate) fn stiffness_factor(&self) -> Result<Arc<Factor>> {
        if let Some(f) = self.k_factor.get() {
            return Ok(f.clone());
        }
        let f = Arc::new(Factor::new(&self.k)?);
        Ok(self.k_factor.get_or_init(|| f).clone())
    }

    /// Friedrichs constant `p = 1/λ_min(K, M)` of the box, computed on first use.
    pub fn friedrichs_constant(self: &Arc<Self>) -> Result<f64> {
        if let Some(&p) = self.friedrichs.get() {
            return Ok(p);
        }
        let full = DirichletSystem::restrict(self, &RasterSet::full(self.grid))?;
        let eig = crate::spectral::eigens(&full, 1)?;
        let p = 1.0 / eig.values[0];
        Ok(*self.friedrichs.get_or_init(|| p))
    }

    /// Installs a precomputed Friedrichs constant.
    pub fn set_friedrichs_constant(&self, p: f64) -> Result<()> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Domain(format!("Friedrichs constant must be positive, got {p}")));
        }
        match self.friedrichs.set(p) {
            Ok(()) => Ok(()),
            Err(_) if self.friedrichs.get() == Some(&p) => Ok(()),
            Err(_) => Err(Error::State("Friedrichs constant already set to a different value".into())),
        }
    }

    /// The Friedrichs constant, or `StateError` if it has not been computed.
    pub fn p(&self) -> Result<f64> {
        self.friedrichs
            .get()
            .copied()
            .ok_or_else(|| Error::State("Friedrichs constant not initialized; call friedrichs_constant first".into()))
    }

    /// `‖u‖_V = √(uᵀKu)`, `‖u‖_L = √(p·uᵀMu)`, `‖u‖_{L₂}` and the gradient norm.
    pub fn norms(&self, u: &[f64]) -> Result<FieldNorms> {
        let p = self.p()?;
        let l2 = self.m.bilinear(u, u).max(0.0).sqrt();
        Ok(FieldNorms {
            v: self.k.bilinear(u, u).max(0.0).sqrt(),
            l: p.sqrt() * l2,
            l2,
            h1: self.g.bilinear(u, u).max(0.0).sqrt(),
        })
    }

    /// `‖f‖_{V′} = √(fᵀ M K⁻¹ M f)` and `‖f‖_{L′} = p^{−1/2} ‖f‖_{L₂}`.
    pub fn dual_norms(&self, f: &[f64]) -> Result<DualNorms> {
        let p = self.p()?;
        let mf = self.m.matvec(f);
        let w = self.stiffness_factor()?.solve(&mf);
        let v_dual = dot(&mf, &w).max(0.0).sqrt();
        let l2 = dot(f, &mf).max(0.0).sqrt();
        Ok(DualNorms { v_dual, l_dual: l2 / p.sqrt() })
    }

    /// Writes nodal values (frame nodes zero) as `x,y,value` CSV rows.
    pub fn write_field_csv(&self, u: &[f64], mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "x,y,value")?;
        let n = self.grid.n;
        for j in 0..=n {
            for i in 0..=n {
                let p = self.grid.node(i, j);
                let v = self.node_index(i, j).map_or(0.0, |k| u[k]);
                writeln!(w, "{:.16e},{:.16e},{:.16e}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldNorms {
    pub v: f64,
    pub l: f64,
    pub l2: f64,
    /// `(∫ |∇u|²)^{1/2}`.
    pub h1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualNorms {
    pub v_dual: f64,
    pub l_dual: f64,
}

/// Nodal coefficients on the ambient interior nodes; nodes outside a domain
/// carry zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector(pub Vec<f64>);

impl Deref for FieldVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl FieldVector {
    pub fn zeros(n: usize) -> Self {
        FieldVector(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        FieldVector(self.0.iter().map(|v| v * c).collect())
    }

    pub fn sub(&self, other: &[f64]) -> Self {
        FieldVector(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }
}

/// The Dirichlet problem on a raster domain: principal submatrices of the
/// ambient system on the nodes whose four adjacent cells lie in the domain.
#[derive(Debug)]
pub struct DirichletSystem {
    ambient: Arc<AmbientSystem>,
    domain: RasterSet,
    nodes: Vec<usize>,
    k: CsrMatrix,
    m: CsrMatrix,
    g: CsrMatrix,
    factor: OnceLock<Arc<Factor>>,
}

impl DirichletSystem {
    pub fn restrict(ambient: &Arc<AmbientSystem>, domain: &RasterSet) -> Result<Self> {
        if domain.grid() != &ambient.grid {
            return Err(Error::Domain("domain raster and ambient system use different grids".into()));
        }
        let n = ambient.grid.n;
        let mut nodes = Vec::new();
        for j in 1..n {
            for i in 1..n {
                if domain.contains(i - 1, j - 1)
                    && domain.contains(i, j - 1)
                    && domain.contains(i - 1, j)
                    && domain.contains(i, j)
                {
                    nodes.push(interior_index(n, i, j).expect("interior"));
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::EmptyDomain("domain has no interior nodes".into()));
        }
        Ok(DirichletSystem {
            k: ambient.k.principal_submatrix(&nodes),
            m: ambient.m.principal_submatrix(&nodes),
            g: ambient.g.principal_submatrix(&nodes),
            ambient: ambient.clone(),
            domain: domain.clone(),
            nodes,
            factor: OnceLock::new(),
        })
    }

    pub fn ambient(&self) -> &Arc<AmbientSystem> {
        &self.ambient
    }

    pub fn domain(&self) -> &RasterSet {
        &self.domain
    }

    /// Ambient indices of the unknowns, increasing.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.k
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.m
    }

    pub fn energy_matrix(&self, norm: EnergyNorm) -> &CsrMatrix {
        match norm {
            EnergyNorm::Operator => &self.k,
            EnergyNorm::Gradient => &self.g,
        }
    }

    /// Values of an ambient vector on the unknowns.
    pub fn restrict_vector(&self, ambient: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&k| ambient[k]).collect()
    }

    /// Zero extension of local coefficients to the ambient nodes.
    pub fn extend(&self, local: &[f64]) -> FieldVector {
        let mut out = vec![0.0; self.ambient.dim()];
        for (&k, &v) in self.nodes.iter().zip(local) {
            out[k] = v;
        }
        FieldVector(out)
    }

    /// Whether an ambient vector vanishes off the unknowns.
    pub fn supports(&self, ambient: &[f64]) -> bool {
        let mut inside = vec![false; ambient.len()];
        for &k in &self.nodes {
            inside[k] = true;
        }
        ambient.iter().zip(&inside).all(|(&v, &i)| i || v == 0.0)
    }

    pub(crate) fn factor(&self, norm: EnergyNorm) -> Result<Arc<Factor>> {
        match norm {
            EnergyNorm::Operator => {
                if let Some(f) = self.factor.get() {
                    return Ok(f.clone());
                }
                let f = Arc::new(Factor::new(&self.k)?);
                Ok(self.factor.get_or_init(|| f).clone())
            }
            EnergyNorm::Gradient => Ok(Arc::new(Factor::new(&self.g)?)),
        }
    }

    /// Solves `K x = b` on the unknowns, refining once if needed, and checks
    /// the relative residual against `1e−10`.
    pub fn solve_local(&self, b: &[f64]) -> Result<Vec<f64>> {
        solve_checked(&self.k, &*self.factor(EnergyNorm::Operator)?, b)
    }
}

pub(crate) fn solve_checked(a: &CsrMatrix, factor: &Factor, b: &[f64]) -> Result<Vec<f64>> {
    let bn = norm2(b);
    if bn == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    let mut x = factor.solve(b);
    for _ in 0..2 {
        let r: Vec<f64> = a.matvec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
        let rel = norm2(&r) / bn;
        if !rel.is_finite() {
            break;
        }
        if rel <= 1e-10 {
            return Ok(x);
        }
        let dx = factor.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    let r: Vec<f64> = a.matvec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let rel = norm2(&r) / bn;
    if rel <= 1e-10 {
        Ok(x)
    } else {
        Err(Error::Numerics(format!("linear solve residual {rel:e} exceeds 1e-10")))
    }
}

/// Weak solution on a domain together with its verification data.
#[derive(Debug, Clone)]
pub struct Solution {
    /// Zero-extended nodal solution.
    pub u: FieldVector,
    /// `‖Ku − (Mf)_Ω‖ / ‖(Mf)_Ω‖`.
    pub residual: f64,
    /// `‖u‖_V`.
    pub energy: f64,
    /// `‖f‖_{V′}` on the ambient space, bounding `energy`.
    pub dual: f64,
}

/// Solves `K_Ω u = (M f)_Ω` for ambient nodal data `f` and checks the
/// stability bound `‖u‖_V ≤ ‖f‖_{V′}`.
pub fn solve_dirichlet(sys: &DirichletSystem, f: &[f64]) -> Result<Solution> {
    let amb = &sys.ambient;
    if f.len() != amb.dim() {
        return Err(Error::Domain(format!("load has {} entries, expected {}", f.len(), amb.dim())));
    }
    let mf = amb.m.matvec(f);
    let b = sys.restrict_vector(&mf);
    let local = sys.solve_local(&b)?;
    let kb: Vec<f64> = sys.k.matvec(&local).iter().zip(&b).map(|(a, c)| a - c).collect();
    let bn = norm2(&b);
    let residual = if bn > 0.0 { norm2(&kb) / bn } else { 0.0 };
    let energy = dot(&local, &b).max(0.0).sqrt();
    let w = amb.stiffness_factor()?.solve(&mf);
    let dual = dot(&mf, &w).max(0.0).sqrt();
    if energy > dual * (1.0 + 1e-8) + 1e-300 {
        return Err(Error::Numerics(format!("stability bound violated: ‖u‖_V = {energy} > ‖f‖_V' = {dual}")));
    }
    Ok(Solution { u: sys.extend(&local), residual, energy, dual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rasterize, ShapeSpec};

    #[test]
    fn single_interior_node_stencil() {
        let sys = assemble(&GridGeometry::unit(2), &CoefficientField::identity(), Quadrature::Gauss2).unwrap();
        assert_eq!(sys.dim(), 1);
        assert!((sys.stiffness().get(0, 0) - 8.0 / 3.0).abs() < 1e-14);
        // the Q1 mass diagonal is 4·h²/9
        assert!((sys.mass().get(0, 0) - 4.0 * 0.25 / 9.0).abs() < 1e-15);
        let mid = assemble(&GridGeometry::unit(2), &CoefficientField::identity(), Quadrature::Midpoint).unwrap();
        assert!((mid.stiffness().get(0, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn element_matrices_by_hand() {
        let ke = element_stiffness(Quadrature::Gauss2, |_| [[1.0, 0.0], [0.0, 1.0]]);
        let expect = [
            [4.0, -1.0, -2.0, -1.0],
            [-1.0, 4.0, -1.0, -2.0],
            [-2.0, -1.0, 4.0, -1.0],
            [-1.0, -2.0, -1.0, 4.0],
        ];
        let me = element_mass(1.0);
        let mexp = [[4.0, 2.0, 1.0, 2.0], [2.0, 4.0, 2.0, 1.0], [1.0, 2.0, 4.0, 2.0], [2.0, 1.0, 2.0, 4.0]];
        for r in 0..4 {
            for c in 0..4 {
                assert!((ke[r][c] - expect[r][c] / 6.0).abs() < 1e-14);
                assert!((me[r][c] - mexp[r][c] / 36.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn scaling_the_coefficient_scales_stiffness_only() {
        let grid = GridGeometry::unit(8);
        let one = assemble(&grid, &CoefficientField::identity(), Quadrature::Gauss2).unwrap();
        let two = assemble(&grid, &CoefficientField::identity().scaled(2.0).unwrap(), Quadrature::Gauss2).unwrap();
        assert_eq!(two.stiffness(), &one.stiffness().scaled(2.0));
        assert_eq!(two.mass(), one.mass());
        assert_eq!(one.stiffness(), one.laplacian());
        assert_eq!(one.stiffness().asymmetry(), 0.0);
    }

    #[test]
    fn restriction_enumerates_interior_nodes() {
        let grid = GridGeometry::unit(8);
        let amb = assemble(&grid, &CoefficientField::identity(), Quadrature::Gauss2).unwrap();
        let full = DirichletSystem::restrict(&amb, &RasterSet::full(grid)).unwrap();
        assert_eq!(full.dim(), 49);
        let sq = rasterize(&ShapeSpec::square([0.25, 0.25], 0.5), &grid).unwrap();
        let sys = DirichletSystem::restrict(&amb, &sq).unwrap();
        let coords: Vec<(usize, usize)> = sys.nodes().iter().map(|&k| amb.node_coords(k)).collect();
        let expect: Vec<(usize, usize)> = (3..=5).flat_map(|j| (3..=5).map(move |i| (i, j))).collect();
        assert_eq!(coords, expect);
        let tiny = rasterize(&ShapeSpec::square([0.26, 0.26], 0.1), &grid).unwrap();
        assert!(matches!(DirichletSystem::restrict(&amb, &tiny), Err(Error::EmptyDomain(_))));
    }

    #[test]
    fn solve_is_linear_and_zero_for_zero_load() {
        let grid = GridGeometry::unit(16);
        let amb = assemble(&grid, &CoefficientField::identity(), Quadrature::Gauss2).unwrap();
        let disk = rasterize(&ShapeSpec::disk([0.5, 0.5], 0.35), &grid).unwrap();
        let sys = DirichletSystem::restrict(&amb, &disk).unwrap();
        let zero = solve_dirichlet(&sys, &vec![0.0; amb.dim()]).unwrap();
        assert!(zero.u.iter().all(|&v| v == 0.0));
        let f = amb.interpolate(|p| 1.0 + p[0] * p[1]);
        let a = solve_dirichlet(&sys, &f).unwrap();
        let b = solve_dirichlet(&sys, &f.scaled(2.0)).unwrap();
        for (x, y) in a.u.iter().zip(b.u.iter()) {
            assert!((2.0 * x - y).abs() <= 1e-14 * y.abs().max(1e-300));
        }
        assert!(a.residual <= 1e-10);
        assert!(a.energy <= a.dual);
        assert!(sys.supports(&a.u));
    }

    #[test]
    fn norms_need_the_friedrichs_constant() {
        let grid = GridGeometry::unit(8);
        let amb = assemble(&grid, &CoefficientField::identity(), Quadrature::Gauss2).unwrap();
        let u = amb.interpolate(|p| p[0]);
        assert!(matches!(amb.norms(&u), Err(Error::State(_))));
        amb.set_friedrichs_constant(0.05).unwrap();
        assert!(amb.norms(&u).is_ok());
        assert!(matches!(amb.set_friedrichs_constant(0.06), Err(Error::State(_))));
    }

    #[test]
    fn coordinate_and_field_exports() {
        let grid = GridGeometry::unit(3);
        let amb = assemble(&grid, &CoefficientField::identity(), Quadrature::Gauss2).unwrap();
        let mut buf = Vec::new();
        amb.stiffness().write_coordinate(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("4 4 16\n"));
        let mut csv = Vec::new();
        amb.write_field_csv(&amb.interpolate(|_| 1.0), &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 16);
    }
}
