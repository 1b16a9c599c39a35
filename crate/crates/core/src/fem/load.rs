//! Right-hand sides given analytically so they can be re-sampled on any grid.

use serde::{Deserialize, Serialize};

use super::system::{AmbientSystem, FieldVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadSpec {
    Constant { value: f64 },
    /// `amplitude · exp(−|x − center|² / (2 width²))`.
    Gaussian { center: [f64; 2], width: f64, amplitude: f64 },
    /// `amplitude · sin(kx·x + phase_x) · sin(ky·y + phase_y)`.
    Wave { k: [f64; 2], phase: [f64; 2], amplitude: f64 },
    /// Sum of loads.
    Sum { terms: Vec<LoadSpec> },
}

impl Default for LoadSpec {
    fn default() -> Self {
        LoadSpec::Constant { value: 1.0 }
    }
}

impl LoadSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            LoadSpec::Constant { value } => value.is_finite(),
            LoadSpec::Gaussian { center, width, amplitude } => finite(center) && *width > 0.0 && amplitude.is_finite(),
            LoadSpec::Wave { k, phase, amplitude } => finite(k) && finite(phase) && amplitude.is_finite(),
            LoadSpec::Sum { terms } => return terms.iter().try_for_each(|t| t.validate()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid load parameters: {self:?}")))
        }
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match self {
            LoadSpec::Constant { value } => *value,
            LoadSpec::Gaussian { center, width, amplitude } => {
                let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                amplitude * (-d2 / (2.0 * width * width)).exp()
            }
            LoadSpec::Wave { k, phase, amplitude } => {
                amplitude * (k[0] * p[0] + phase[0]).sin() * (k[1] * p[1] + phase[1]).sin()
            }
            LoadSpec::Sum { terms } => terms.iter().map(|t| t.eval(p)).sum(),
        }
    }

    /// Nodal interpolant on the ambient system.
    pub fn sample(&self, ambient: &AmbientSystem) -> Result<FieldVector> {
        self.validate()?;
        Ok(ambient.interpolate(|p| self.eval(p)))
    }

    pub fn scaled(&self, c: f64) -> LoadSpec {
        match self {
            LoadSpec::Constant { value } => LoadSpec::Constant { value: c * value },
            LoadSpec::Gaussian { center, width, amplitude } => {
                LoadSpec::Gaussian { center: *center, width: *width, amplitude: c * amplitude }
            }
            LoadSpec::Wave { k, phase, amplitude } => LoadSpec::Wave { k: *k, phase: *phase, amplitude: c * amplitude },
            LoadSpec::Sum { terms } => LoadSpec::Sum { terms: terms.iter().map(|t| t.scaled(c)).collect() },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_and_scaling() {
        let f = LoadSpec::Sum {
            terms: vec![
                LoadSpec::Constant { value: 1.0 },
                LoadSpec::Gaussian { center: [0.0, 0.0], width: 1.0, amplitude: 2.0 },
            ],
        };
        assert!((f.eval([0.0, 0.0]) - 3.0).abs() < 1e-15);
        assert!((f.scaled(2.0).eval([0.0, 0.0]) - 6.0).abs() < 1e-15);
        let bad = LoadSpec::Gaussian { center: [0.0, 0.0], width: 0.0, amplitude: 1.0 };
        assert!(bad.validate().is_err());
        let json = r#"{"kind":"wave","k":[3.14,3.14],"phase":[0,0],"amplitude":1}"#;
        assert!(serde_json::from_str::<LoadSpec>(json).is_ok());
        assert!(serde_json::from_str::<LoadSpec>(r#"{"kind":"constant","value":1,"x":2}"#).is_err());
    }
}
