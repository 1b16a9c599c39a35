//! Energy-orthogonal projections onto `V_Ω`, subspace distances and
//! generalized angles between finite-dimensional subspaces.

use std::sync::Arc;

use faer::{Mat, Side};

use crate::fem::{AmbientSystem, DirichletSystem, EnergyNorm, FieldVector};
use crate::geometry::RasterSet;
use crate::{Error, Result};

/// `P_Ω u`: the minimizer of `‖u − w‖` over `w ∈ V_Ω`, from the restricted
/// normal equations `E_ΩΩ w = (E u)_Ω`.
pub fn project_onto(sys: &DirichletSystem, u: &[f64], norm: EnergyNorm) -> Result<FieldVector> {
    let e = sys.ambient().energy_matrix(norm);
    if u.len() != e.dim() {
        return Err(Error::Domain(format!("vector has {} entries, expected {}", u.len(), e.dim())));
    }
    let rhs = sys.restrict_vector(&e.matvec(u));
    let factor = sys.factor(norm)?;
    let w = crate::fem::system::solve_checked(sys.energy_matrix(norm), &factor, &rhs)?;
    Ok(sys.extend(&w))
}

/// [`project_onto`] for a raster domain.
pub fn project_energy(
    ambient: &Arc<AmbientSystem>,
    u: &[f64],
    omega: &RasterSet,
    norm: EnergyNorm,
) -> Result<FieldVector> {
    let sys = DirichletSystem::restrict(ambient, omega)?;
    project_onto(&sys, u, norm)
}

/// Energy norm of an ambient vector.
pub fn energy_norm(ambient: &AmbientSystem, u: &[f64], norm: EnergyNorm) -> f64 {
    ambient.energy_matrix(norm).bilinear(u, u).max(0.0).sqrt()
}

/// `d_V(u, V_Ω) = ‖u − P_Ω u‖`.
pub fn subspace_distance_in(sys: &DirichletSystem, u: &[f64], norm: EnergyNorm) -> Result<f64> {
    let p = project_onto(sys, u, norm)?;
    Ok(energy_norm(sys.ambient(), &FieldVector(u.to_vec()).sub(&p), norm))
}

pub fn subspace_distance(
    ambient: &Arc<AmbientSystem>,
    u: &[f64],
    omega: &RasterSet,
    norm: EnergyNorm,
) -> Result<f64> {
    let sys = DirichletSystem::restrict(ambient, omega)?;
    subspace_distance_in(&sys, u, norm)
}

/// Span of ambient vectors, orthonormalized in an energy inner product.
#[derive(Debug, Clone)]
pub struct SubspaceHandle {
    ambient: Arc<AmbientSystem>,
    norm: EnergyNorm,
    generators: Vec<FieldVector>,
    basis: Mat<f64>,
    gram_condition: f64,
}

impl SubspaceHandle {
    /// Fails with `RankError` when the Gram matrix of the generators is
    /// numerically singular (condition number above 1e12).
    pub fn new(ambient: &Arc<AmbientSystem>, generators: Vec<FieldVector>, norm: EnergyNorm) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::Rank("subspace needs at least one generator".into()));
        }
        let n = ambient.dim();
        if generators.iter().any(|g| g.len() != n) {
            return Err(Error::Domain(format!("generators must have {n} entries")));
        }
        let e = ambient.energy_matrix(norm);
        let d = generators.len();
        let x = Mat::from_fn(n, d, |r, c| generators[c][r]);
        let ex: Vec<Vec<f64>> = generators.iter().map(|g| e.matvec(g)).collect();
        let gram = Mat::from_fn(d, d, |i, j| {
            let a: f64 = generators[i].iter().zip(&ex[j]).map(|(p, q)| p * q).sum();
            let b: f64 = generators[j].iter().zip(&ex[i]).map(|(p, q)| p * q).sum();
            0.5 * (a + b)
        });
        let eig = gram
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Numerics(format!("Gram eigenvalues failed: {e:?}")))?;
        let (lo, hi) = (eig[0], eig[d - 1]);
        let gram_condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(gram_condition <= 1e12) {
            return Err(Error::Rank(format!("generators are linearly dependent (Gram condition {gram_condition:e})")));
        }
        let llt = gram.llt(Side::Lower).map_err(|e| Error::Rank(format!("Gram matrix not positive definite: {e:?}")))?;
        // Q = X L⁻ᵀ, i.e. Qᵀ = L⁻¹ Xᵀ
        let mut qt = x.transpose().to_owned();
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(
            llt.L(),
            qt.as_mut(),
            faer::get_global_parallelism(),
        );
        let basis = qt.transpose().to_owned();
        Ok(SubspaceHandle { ambient: ambient.clone(), norm, generators, basis, gram_condition })
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[FieldVector] {
        &self.generators
    }

    pub fn gram_condition(&self) -> f64 {
        self.gram_condition
    }

    pub fn norm(&self) -> EnergyNorm {
        self.norm
    }

    /// Energy-orthonormal basis vectors.
    pub fn basis_vector(&self, i: usize) -> FieldVector {
        FieldVector((0..self.basis.nrows()).map(|r| self.basis[(r, i)]).collect())
    }
}

/// Generalized angle `max{sup_{u∈A} d(u, B), sup_{u∈B} d(u, A)}` over unit
/// vectors in the energy norm.
///
/// Each one-sided supremum is the largest singular value of the residual
/// `Q_A − Q_B (Q_Bᵀ E Q_A)` of orthonormal bases, measured in `E`.
pub fn generalized_angle(a: &SubspaceHandle, b: &SubspaceHandle) -> Result<f64> {
    if a.ambient.dim() != b.ambient.dim() || a.norm != b.norm {
        return Err(Error::Domain("subspaces live in different spaces".into()));
    }
    let e = a.ambient.energy_matrix(a.norm);
    Ok(one_sided(e, a, b)?.max(one_sided(e, b, a)?).clamp(0.0, 1.0))
}

fn one_sided(e: &crate::fem::CsrMatrix, a: &SubspaceHandle, b: &SubspaceHandle) -> Result<f64> {
    let n = a.basis.nrows();
    let eb: Vec<Vec<f64>> = (0..b.dim()).map(|j| e.matvec(&b.basis_vector(j))).collect();
    let cross = Mat::from_fn(b.dim(), a.dim(), |j, i| (0..n).map(|r| eb[j][r] * a.basis[(r, i)]).sum::<f64>());
    let resid = &a.basis - &b.basis * &cross;
    let er: Vec<Vec<f64>> = (0..a.dim()).map(|i| e.matvec(&resid.col(i).iter().copied().collect::<Vec<_>>())).collect();
    let gram = Mat::from_fn(a.dim(), a.dim(), |i, j| {
        let x: f64 = (0..n).map(|r| resid[(r, i)] * er[j][r]).sum();
        let y: f64 = (0..n).map(|r| resid[(r, j)] * er[i][r]).sum();
        0.5 * (x + y)
    });
    let eig = gram
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerics(format!("residual Gram eigenvalues failed: {e:?}")))?;
    Ok(eig.iter().copied().fold(0.0, f64::max).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, CoefficientField, Quadrature};
    use crate::geometry::{rasterize, GridGeometry, ShapeSpec};
    use crate::spectral::eigens;

    fn setup(n: usize) -> Arc<AmbientSystem> {
        assemble(&GridGeometry::unit(n), &CoefficientField::identity(), Quadrature::Gauss2).unwrap()
    }

    #[test]
    fn projection_fixes_supported_vectors_and_the_full_box_is_identity() {
        let amb = setup(16);
        let grid = *amb.grid();
        let disk = rasterize(&ShapeSpec::disk([0.5, 0.5], 0.3), &grid).unwrap();
        let sys = DirichletSystem::restrict(&amb, &disk).unwrap();
        let inside = sys.extend(&(0..sys.dim()).map(|i| (i as f64).sin()).collect::<Vec<_>>());
        let p = project_onto(&sys, &inside, EnergyNorm::Operator).unwrap();
        for (a, b) in p.iter().zip(inside.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        let u = amb.interpolate(|x| x[0] * (1.0 - x[0]) * x[1]);
        let full = project_energy(&amb, &u, &RasterSet::full(grid), EnergyNorm::Operator).unwrap();
        for (a, b) in full.iter().zip(u.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn distances_shrink_with_larger_subspaces() {
        let amb = setup(24);
        let grid = *amb.grid();
        let u = amb.interpolate(|x| (x[0] * 7.0).sin() * x[1] * (1.0 - x[1]) * x[0] * (1.0 - x[0]));
        let big = rasterize(&ShapeSpec::disk([0.5, 0.5], 0.4), &grid).unwrap();
        let small = rasterize(&ShapeSpec::disk([0.5, 0.5], 0.25), &grid).unwrap();
        let d_big = subspace_distance(&amb, &u, &big, EnergyNorm::Operator).unwrap();
        let d_small = subspace_distance(&amb, &u, &small, EnergyNorm::Operator).unwrap();
        let total = energy_norm(&amb, &u, EnergyNorm::Operator);
        assert!(d_big <= d_small + 1e-12 && d_small <= total + 1e-12);
        let p = project_energy(&amb, &u, &small, EnergyNorm::Operator).unwrap();
        let pp = project_energy(&amb, &p, &small, EnergyNorm::Operator).unwrap();
        for (a, b) in p.iter().zip(pp.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn angles_between_spans() {
        let amb = setup(16);
        let grid = *amb.grid();
        let full = DirichletSystem::restrict(&amb, &RasterSet::full(grid)).unwrap();
        let eig = eigens(&full, 3).unwrap();
        let e1 = SubspaceHandle::new(&amb, vec![eig.vectors[0].clone()], EnergyNorm::Operator).unwrap();
        let e2 = SubspaceHandle::new(&amb, vec![eig.vectors[1].clone()], EnergyNorm::Operator).unwrap();
        assert!(generalized_angle(&e1, &e1).unwrap() < 1e-12);
        assert!((generalized_angle(&e1, &e2).unwrap() - 1.0).abs() < 1e-10);
        let both = SubspaceHandle::new(&amb, vec![eig.vectors[1].clone(), eig.vectors[2].clone()], EnergyNorm::Operator)
            .unwrap();
        assert!((generalized_angle(&e1, &both).unwrap() - 1.0).abs() < 1e-10);
        let dup = SubspaceHandle::new(&amb, vec![eig.vectors[0].clone(), eig.vectors[0].scaled(2.0)], EnergyNorm::Operator);
        assert!(matches!(dup, Err(Error::Rank(_))));
        let shrunk = rasterize(&ShapeSpec::square([2.0 / 16.0, 2.0 / 16.0], 12.0 / 16.0), &grid).unwrap();
        let sys2 = DirichletSystem::restrict(&amb, &shrunk).unwrap();
        let f = eigens(&sys2, 1).unwrap();
        let h2 = SubspaceHandle::new(&amb, vec![f.vectors[0].clone()], EnergyNorm::Operator).unwrap();
        let ang = generalized_angle(&e1, &h2).unwrap();
        assert!(ang > 0.0 && ang < 1.0);
        assert!((ang - generalized_angle(&h2, &e1).unwrap()).abs() < 1e-12);
    }
}
