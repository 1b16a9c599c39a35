//! Log-log least squares.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// Intercept of `log y = slope·log x + intercept`.
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares line through `(log x, log y)`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("slope fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Domain(format!("slope fit needs positive finite data, got ({x}, {y})")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs at least two distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    Ok(SlopeFit { slope, intercept, residual: (ss / n).sqrt(), points: points.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let sq: Vec<_> = [0.1, 0.2, 0.4, 0.8].iter().map(|&x| (x, x * x)).collect();
        let f = fit_slope(&sq).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.residual < 1e-12);
        let lin: Vec<_> = [1.0, 2.0, 5.0].iter().map(|&x| (x, 3.0 * x)).collect();
        let f = fit_slope(&lin).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn outliers_leave_a_residual() {
        let pts = vec![(1.0, 1.0), (2.0, 2.0), (3.0, 30.0), (4.0, 4.0)];
        assert!(fit_slope(&pts).unwrap().residual > 0.1);
    }

    #[test]
    fn bad_input() {
        assert!(matches!(fit_slope(&[(1.0, 1.0), (2.0, 2.0)]), Err(Error::Domain(_))));
        assert!(matches!(fit_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]), Err(Error::Domain(_))));
        assert!(matches!(fit_slope(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]), Err(Error::Domain(_))));
    }
}
