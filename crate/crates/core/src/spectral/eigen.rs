//! Smallest eigenpairs of `K v = λ M v` on a Dirichlet system.

use std::io::Write;

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fem::{CsrMatrix, DirichletSystem, EnergyNorm, FieldVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenOptions {
    /// Systems with at most this many unknowns use the dense solver.
    pub dense_threshold: usize,
    /// Relative gap below which neighbouring eigenvalues share a cluster.
    pub cluster_tol: f64,
    /// Target relative residual of the iterative solver.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { dense_threshold: 400, cluster_tol: 1e-6, tol: 1e-10, max_iter: 500, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Dense,
    SubspaceIteration,
}

/// Ascending eigenpairs with `M`-orthonormal, zero-extended eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<FieldVector>,
    /// `‖K v − λ M v‖ / ‖K v‖` per pair.
    pub residuals: Vec<f64>,
    /// Cluster label per pair; neighbours within `cluster_tol` share a label.
    pub clusters: Vec<usize>,
    pub method: EigenMethod,
    pub iterations: usize,
}

impl EigenResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices carrying cluster label `label`.
    pub fn cluster_members(&self, label: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.clusters[i] == label).collect()
    }

    /// Indices of eigenvalues in the open disk `|λ − center| < radius`.
    pub fn in_disk(&self, center: f64, radius: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| (self.values[i] - center).abs() < radius).collect()
    }

    /// CSV table `n,lambda,residual,cluster` with 1-based `n`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "n,lambda,residual,cluster")?;
        for i in 0..self.len() {
            writeln!(w, "{},{:.16e},{:.16e},{}", i + 1, self.values[i], self.residuals[i], self.clusters[i])?;
        }
        Ok(())
    }
}

pub fn eigens(sys: &DirichletSystem, k: usize) -> Result<EigenResult> {
    eigens_with(sys, k, &EigenOptions::default())
}

pub fn eigens_with(sys: &DirichletSystem, k: usize, opts: &EigenOptions) -> Result<EigenResult> {
    let n = sys.dim();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("requested {k} eigenpairs of a system with {n} unknowns")));
    }
    let (values, local, method, iterations) = if n <= opts.dense_threshold {
        let (vals, vecs) = generalized_eigen(&sys.stiffness().to_dense(), &sys.mass().to_dense())?;
        (vals[..k].to_vec(), vecs.subcols(0, k).to_owned(), EigenMethod::Dense, 0)
    } else {
        let (vals, vecs, it) = subspace_iteration(sys, k, opts)?;
        (vals, vecs, EigenMethod::SubspaceIteration, it)
    };
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for (i, &lambda) in values.iter().enumerate() {
        let mut v: Vec<f64> = (0..n).map(|r| local[(r, i)]).collect();
        fix_sign(&mut v);
        residuals.push(relative_residual(sys.stiffness(), sys.mass(), &v, lambda));
        vectors.push(sys.extend(&v));
    }
    let clusters = cluster_labels(&values, opts.cluster_tol);
    Ok(EigenResult { values, vectors, residuals, clusters, method, iterations })
}

/// Largest-magnitude coefficient made positive (first such index on ties).
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub(crate) fn cluster_labels(values: &[f64], tol: f64) -> Vec<usize> {
    let mut labels = Vec::with_capacity(values.len());
    let mut label = 0;
    for (i, &v) in values.iter().enumerate() {
        if i > 0 && (v - values[i - 1]).abs() > tol * v.abs() {
            label += 1;
        }
        labels.push(label);
    }
    labels
}

fn relative_residual(k: &CsrMatrix, m: &CsrMatrix, v: &[f64], lambda: f64) -> f64 {
    let kv = k.matvec(v);
    let mv = m.matvec(v);
    let r: f64 = kv.iter().zip(&mv).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = kv.iter().map(|a| a * a).sum::<f64>().sqrt();
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

/// Dense symmetric-definite pencil `(K, M)`: ascending eigenvalues and
/// `M`-orthonormal eigenvectors.
pub(crate) fn generalized_eigen(k: &Mat<f64>, m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let par = faer::get_global_parallelism();
    let llt = m.llt(Side::Lower).map_err(|e| Error::Numerics(format!("mass matrix not positive definite: {e:?}")))?;
    let l = llt.L();
    let mut c = k.clone();
    solve_lower_triangular_in_place(l, c.as_mut(), par);
    let mut c = c.transpose().to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), par);
    let n = c.nrows();
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let evd = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerics(format!("dense eigensolver failed: {e:?}")))?;
    let values: Vec<f64> = (0..n).map(|i| evd.S().column_vector()[i]).collect();
    let mut vecs = evd.U().to_owned();
    solve_upper_triangular_in_place(l.transpose(), vecs.as_mut(), par);
    Ok((values, vecs))
}

fn csr_times(a: &CsrMatrix, x: &Mat<f64>) -> Mat<f64> {
    let cols: Vec<Vec<f64>> = (0..x.ncols())
        .into_par_iter()
        .map(|c| {
            let col: Vec<f64> = (0..x.nrows()).map(|r| x[(r, c)]).collect();
            a.matvec(&col)
        })
        .collect();
    Mat::from_fn(x.nrows(), x.ncols(), |r, c| cols[c][r])
}

/// Shift-invert (σ = 0) block subspace iteration with Rayleigh–Ritz.
fn subspace_iteration(sys: &DirichletSystem, k: usize, opts: &EigenOptions) -> Result<(Vec<f64>, Mat<f64>, usize)> {
    let n = sys.dim();
    let b = n.min((2 * k).max(k + 8));
    let factor = sys.factor(EnergyNorm::Operator)?;
    let (kmat, mmat) = (sys.stiffness(), sys.mass());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = Mat::from_fn(n, b, |_, _| rng.gen::<f64>() - 0.5);
    let mut worst = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let mx = csr_times(mmat, &x);
        let mut y = mx.clone();
        factor.solve_columns(&mut y);
        // K Y = M X, so Yᵀ K Y = Yᵀ M X
        let kr = y.transpose() * &mx;
        let my = csr_times(mmat, &y);
        let mr = y.transpose() * &my;
        let kr = Mat::from_fn(b, b, |i, j| 0.5 * (kr[(i, j)] + kr[(j, i)]));
        let mr = Mat::from_fn(b, b, |i, j| 0.5 * (mr[(i, j)] + mr[(j, i)]));
        let (theta, c) = generalized_eigen(&kr, &mr)?;
        x = &y * &c;
        let kx = csr_times(kmat, &x.subcols(0, k).to_owned());
        let mxk = csr_times(mmat, &x.subcols(0, k).to_owned());
        worst = (0..k)
            .map(|i| {
                let mut r = 0.0;
                let mut s = 0.0;
                for row in 0..n {
                    r += (kx[(row, i)] - theta[i] * mxk[(row, i)]).powi(2);
                    s += kx[(row, i)].powi(2);
                }
                (r / s).sqrt()
            })
            .fold(0.0, f64::max);
        if worst <= opts.tol {
            return Ok((theta[..k].to_vec(), x.subcols(0, k).to_owned(), it));
        }
    }
    Err(Error::Numerics(format!(
        "subspace iteration did not converge in {} iterations (residual {worst:e})",
        opts.max_iter
    )))
}
