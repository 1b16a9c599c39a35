//! Symmetric coefficient fields `A(x)` of the divergence-form operator.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::GridGeometry;
use crate::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];

/// Serializable description of a coefficient field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Identity {},
    Constant { matrix: Mat2 },
    Diagonal { values: [f64; 2] },
    /// `A(x, y) = base + x·dx + y·dy`.
    Affine { base: Mat2, dx: Mat2, dy: Mat2 },
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec::Identity {}
    }
}

/// Eigenvalues `(min, max)` of a symmetric 2×2 matrix.
pub fn sym_eigenvalues(a: &Mat2) -> (f64, f64) {
    let mean = 0.5 * (a[0][0] + a[1][1]);
    let half = 0.5 * (a[0][0] - a[1][1]);
    let rad = half.hypot(a[0][1]);
    (mean - rad, mean + rad)
}

/// Spectral norm of a symmetric 2×2 matrix.
fn sym_norm(a: &Mat2) -> f64 {
    let (lo, hi) = sym_eigenvalues(a);
    lo.abs().max(hi.abs())
}

fn sub(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
}

type Evaluator = Arc<dyn Fn([f64; 2]) -> Mat2 + Send + Sync>;

/// A coefficient field with its declared ellipticity and Lipschitz bounds.
#[derive(Clone)]
pub struct CoefficientField {
    eval: Evaluator,
    constant: Option<Mat2>,
    alpha: f64,
    lipschitz: f64,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("constant", &self.constant)
            .field("alpha", &self.alpha)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// Bounds measured on the quadrature points of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBounds {
    /// Smallest eigenvalue of `A(x)` seen.
    pub alpha: f64,
    /// Largest eigenvalue of `A(x)` seen.
    pub beta: f64,
    /// Finite-difference Lipschitz estimate of `x ↦ A(x)` in spectral norm.
    pub lipschitz: f64,
}

impl CoefficientField {
    /// Field `x ↦ A(x)` with declared ellipticity `alpha` and Lipschitz bound.
    pub fn new(
        eval: impl Fn([f64; 2]) -> Mat2 + Send + Sync + 'static,
        alpha: f64,
        lipschitz: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Coefficient(format!("ellipticity constant must be positive, got {alpha}")));
        }
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::Coefficient(format!("Lipschitz bound must be nonnegative, got {lipschitz}")));
        }
        Ok(CoefficientField { eval: Arc::new(eval), constant: None, alpha, lipschitz })
    }

    pub fn identity() -> Self {
        Self::constant([[1.0, 0.0], [0.0, 1.0]]).expect("identity is elliptic")
    }

    /// Constant field; α is its smallest eigenvalue.
    pub fn constant(a: Mat2) -> Result<Self> {
        check_symmetric(&a)?;
        let (lo, _) = sym_eigenvalues(&a);
        if !(lo > 0.0) {
            return Err(Error::Coefficient(format!("matrix {a:?} is not positive definite")));
        }
        Ok(CoefficientField { eval: Arc::new(move |_| a), constant: Some(a), alpha: lo, lipschitz: 0.0 })
    }

    /// Builds the field described by `spec`. For affine fields the declared
    /// α is the smallest eigenvalue over the corners of `grid`'s box.
    pub fn from_spec(spec: &CoefficientSpec, grid: &GridGeometry) -> Result<Self> {
        match spec {
            CoefficientSpec::Identity {} => Ok(Self::identity()),
            CoefficientSpec::Constant { matrix } => Self::constant(*matrix),
            CoefficientSpec::Diagonal { values } => Self::constant([[values[0], 0.0], [0.0, values[1]]]),
            CoefficientSpec::Affine { base, dx, dy } => {
                for m in [base, dx, dy] {
                    check_symmetric(m)?;
                }
                let (b, x, y) = (*base, *dx, *dy);
                let f = move |p: [f64; 2]| {
                    let mut a = b;
                    for r in 0..2 {
                        for c in 0..2 {
                            a[r][c] += p[0] * x[r][c] + p[1] * y[r][c];
                        }
                    }
                    a
                };
                // the minimum eigenvalue of an affine family is concave, so the
                // box corners bound it from below
                let [x0, y0] = grid.origin;
                let s = grid.side;
                let alpha = [[x0, y0], [x0 + s, y0], [x0, y0 + s], [x0 + s, y0 + s]]
                    .iter()
                    .map(|&p| sym_eigenvalues(&f(p)).0)
                    .fold(f64::INFINITY, f64::min);
                if !(alpha > 0.0) {
                    return Err(Error::Coefficient(format!("affine field loses ellipticity on the box (α = {alpha})")));
                }
                let lip = sym_norm(&x).max(sym_norm(&y));
                Self::new(f, alpha, lip)
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> Mat2 {
        (self.eval)(x)
    }

    pub fn constant_value(&self) -> Option<Mat2> {
        self.constant
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `cA` with bounds scaled accordingly.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Coefficient(format!("scale factor must be positive, got {c}")));
        }
        let inner = self.eval.clone();
        Ok(CoefficientField {
            eval: Arc::new(move |p| {
                let a = inner(p);
                [[c * a[0][0], c * a[0][1]], [c * a[1][0], c * a[1][1]]]
            }),
            constant: self.constant.map(|a| [[c * a[0][0], c * a[0][1]], [c * a[1][0], c * a[1][1]]]),
            alpha: c * self.alpha,
            lipschitz: c * self.lipschitz,
        })
    }

    /// Checks symmetry and ellipticity at `points`; returns `(α, β)` measured.
    pub fn check_points(&self, points: &[[f64; 2]]) -> Result<(f64, f64)> {
        let mut alpha = f64::INFINITY;
        let mut beta = f64::NEG_INFINITY;
        for &p in points {
            let a = self.eval(p);
            check_symmetric(&a)
                .map_err(|_| Error::Coefficient(format!("A({}, {}) = {a:?} is not symmetric", p[0], p[1])))?;
            let (lo, hi) = sym_eigenvalues(&a);
            if lo < self.alpha * (1.0 - 1e-12) {
                return Err(Error::Coefficient(format!(
                    "ellipticity fails at ({}, {}): smallest eigenvalue {lo} < α = {}",
                    p[0], p[1], self.alpha
                )));
            }
            alpha = alpha.min(lo);
            beta = beta.max(hi);
        }
        Ok((alpha, beta))
    }

    /// Checks the field on the cell centers of `grid`: symmetry, ellipticity,
    /// and a finite-difference Lipschitz estimate against the declared bound.
    pub fn validate(&self, grid: &GridGeometry) -> Result<CoefficientBounds> {
        let n = grid.n;
        let pts: Vec<[f64; 2]> =
            (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| grid.center(i, j)).collect();
        let (alpha, beta) = self.check_points(&pts)?;
        let mut lipschitz: f64 = 0.0;
        if self.constant.is_none() {
            let values: Vec<Mat2> = pts.iter().map(|&p| self.eval(p)).collect();
            let h = grid.h();
            for j in 0..n {
                for i in 0..n {
                    let a = &values[grid.index(i, j)];
                    if i + 1 < n {
                        lipschitz = lipschitz.max(sym_norm(&sub(a, &values[grid.index(i + 1, j)])) / h);
                    }
                    if j + 1 < n {
                        lipschitz = lipschitz.max(sym_norm(&sub(a, &values[grid.index(i, j + 1)])) / h);
                    }
                }
            }
            if lipschitz > self.lipschitz * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::Coefficient(format!(
                    "finite-difference Lipschitz estimate {lipschitz} exceeds the declared bound {}",
                    self.lipschitz
                )));
            }
        }
        Ok(CoefficientBounds { alpha, beta, lipschitz })
    }
}

fn check_symmetric(a: &Mat2) -> Result<()> {
    let scale = a[0][1].abs().max(a[1][0].abs()).max(1.0);
    if (a[0][1] - a[1][0]).abs() > 1e-14 * scale || a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Coefficient(format!("matrix {a:?} is not symmetric")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_symmetric_matrix() {
        let (lo, hi) = sym_eigenvalues(&[[2.0, 1.0], [1.0, 2.0]]);
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
    }

    #[test]
    fn nonsymmetric_or_indefinite_input_is_rejected() {
        assert!(matches!(CoefficientField::constant([[1.0, 0.5], [0.0, 1.0]]), Err(Error::Coefficient(_))));
        assert!(matches!(CoefficientField::constant([[1.0, 0.0], [0.0, -1.0]]), Err(Error::Coefficient(_))));
        let grid = GridGeometry::unit(4);
        let skew = CoefficientField::new(|_| [[1.0, 0.2], [0.0, 1.0]], 0.5, 0.0).unwrap();
        assert!(matches!(skew.validate(&grid), Err(Error::Coefficient(_))));
    }

    #[test]
    fn declared_bounds_are_enforced() {
        let grid = GridGeometry::unit(16);
        let wavy = |p: [f64; 2]| [[2.0 + (10.0 * p[0]).sin(), 0.0], [0.0, 2.0]];
        let honest = CoefficientField::new(wavy, 1.0, 10.0).unwrap();
        let b = honest.validate(&grid).unwrap();
        assert!(b.lipschitz <= 10.0 && b.lipschitz > 5.0);
        assert!(b.alpha >= 1.0 && b.beta <= 3.0);
        let liar = CoefficientField::new(wavy, 1.0, 1.0).unwrap();
        assert!(matches!(liar.validate(&grid), Err(Error::Coefficient(_))));
        let optimist = CoefficientField::new(wavy, 1.5, 10.0).unwrap();
        assert!(matches!(optimist.validate(&grid), Err(Error::Coefficient(_))));
    }

    #[test]
    fn spec_round_trip_and_affine_bounds() {
        let spec: CoefficientSpec = serde_json::from_str(r#"{"kind":"diagonal","values":[1.0,4.0]}"#).unwrap();
        let grid = GridGeometry::unit(8);
        let a = CoefficientField::from_spec(&spec, &grid).unwrap();
        assert_eq!(a.alpha(), 1.0);
        let b = a.validate(&grid).unwrap();
        assert_eq!((b.alpha, b.beta), (1.0, 4.0));
        let affine = CoefficientSpec::Affine {
            base: [[1.0, 0.0], [0.0, 1.0]],
            dx: [[0.5, 0.0], [0.0, 0.0]],
            dy: [[0.0, 0.1], [0.1, 0.0]],
        };
        let f = CoefficientField::from_spec(&affine, &grid).unwrap();
        let m = f.validate(&grid).unwrap();
        assert!(m.lipschitz <= f.lipschitz() * (1.0 + 1e-9));
        assert!(serde_json::from_str::<CoefficientSpec>(r#"{"kind":"identity","x":1}"#).is_err());
    }
}
