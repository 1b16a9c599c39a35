//! Moduli of continuity and the derived scales ψ and φ.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Shape of a modulus of continuity, without its offset.
#[derive(Debug, Clone, PartialEq)]
pub enum ModulusKind {
    /// ω ≡ ω(0).
    Zero,
    /// ω(r) = L·r.
    Lipschitz { slope: f64 },
    /// ω(r) = L·r^α with α in (0, 1].
    Hoelder { slope: f64, exponent: f64 },
    /// Piecewise-linear interpolation of monotone samples `(r_i, ω_i)`,
    /// starting at `r_0 = 0, ω_0 = 0`.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusName {
    Zero,
    Lipschitz,
    Hoelder,
    Tabulated,
}

/// Serialized form of [`Modulus`]: `kind` plus the parameters it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusSpec {
    pub kind: ModulusName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

fn default_r_max() -> f64 {
    10.0
}

/// A validated modulus of continuity ω on `[0, r_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModulusSpec", into = "ModulusSpec")]
pub struct Modulus {
    kind: ModulusKind,
    offset: f64,
    r_max: f64,
}

impl TryFrom<ModulusSpec> for Modulus {
    type Error = Error;

    fn try_from(spec: ModulusSpec) -> Result<Self> {
        fn need<T>(v: Option<T>, name: &str, kind: &str) -> Result<T> {
            v.ok_or_else(|| Error::Modulus(format!("{kind} modulus needs `{name}`")))
        }
        let unused = |present: bool, name: &str| {
            if present {
                Err(Error::Modulus(format!("parameter `{name}` does not apply to this modulus kind")))
            } else {
                Ok(())
            }
        };
        let kind = match spec.kind {
            ModulusName::Zero => {
                unused(spec.slope.is_some(), "slope")?;
                unused(spec.exponent.is_some(), "exponent")?;
                unused(spec.radii.is_some() || spec.values.is_some(), "radii/values")?;
                ModulusKind::Zero
            }
            ModulusName::Lipschitz => {
                unused(spec.exponent.is_some(), "exponent")?;
                unused(spec.radii.is_some() || spec.values.is_some(), "radii/values")?;
                ModulusKind::Lipschitz { slope: need(spec.slope, "slope", "lipschitz")? }
            }
            ModulusName::Hoelder => {
                unused(spec.radii.is_some() || spec.values.is_some(), "radii/values")?;
                ModulusKind::Hoelder {
                    slope: need(spec.slope, "slope", "hoelder")?,
                    exponent: need(spec.exponent, "exponent", "hoelder")?,
                }
            }
            ModulusName::Tabulated => {
                unused(spec.slope.is_some() || spec.exponent.is_some(), "slope/exponent")?;
                ModulusKind::Tabulated {
                    radii: need(spec.radii, "radii", "tabulated")?,
                    values: need(spec.values, "values", "tabulated")?,
                }
            }
        };
        Modulus::new(kind, spec.offset, spec.r_max)
    }
}

impl From<Modulus> for ModulusSpec {
    fn from(m: Modulus) -> Self {
        let mut spec = ModulusSpec {
            kind: ModulusName::Zero,
            slope: None,
            exponent: None,
            radii: None,
            values: None,
            offset: m.offset,
            r_max: m.r_max,
        };
        match m.kind {
            ModulusKind::Zero => {}
            ModulusKind::Lipschitz { slope } => {
                spec.kind = ModulusName::Lipschitz;
                spec.slope = Some(slope);
            }
            ModulusKind::Hoelder { slope, exponent } => {
                spec.kind = ModulusName::Hoelder;
                spec.slope = Some(slope);
                spec.exponent = Some(exponent);
            }
            ModulusKind::Tabulated { radii, values } => {
                spec.kind = ModulusName::Tabulated;
                spec.radii = Some(radii);
                spec.values = Some(values);
            }
        }
        spec
    }
}

impl Modulus {
    pub fn new(kind: ModulusKind, offset: f64, r_max: f64) -> Result<Self> {
        if !(offset.is_finite() && offset >= 0.0) {
            return Err(Error::Modulus(format!("offset must be finite and nonnegative, got {offset}")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::Modulus(format!("r_max must be finite and positive, got {r_max}")));
        }
        match &kind {
            ModulusKind::Zero => {}
            ModulusKind::Lipschitz { slope } => {
                if !(slope.is_finite() && *slope >= 0.0) {
                    return Err(Error::Modulus(format!("Lipschitz slope must be nonnegative, got {slope}")));
                }
            }
            ModulusKind::Hoelder { slope, exponent } => {
                if !(slope.is_finite() && *slope >= 0.0) {
                    return Err(Error::Modulus(format!("Hölder slope must be nonnegative, got {slope}")));
                }
                if !(*exponent > 0.0 && *exponent <= 1.0) {
                    return Err(Error::Modulus(format!("Hölder exponent must lie in (0, 1], got {exponent}")));
                }
            }
            ModulusKind::Tabulated { radii, values } => validate_table(radii, values, r_max)?,
        }
        Ok(Modulus { kind, offset, r_max })
    }

    pub fn zero() -> Self {
        Modulus { kind: ModulusKind::Zero, offset: 0.0, r_max: default_r_max() }
    }

    pub fn lipschitz(slope: f64) -> Self {
        Modulus::new(ModulusKind::Lipschitz { slope }, 0.0, default_r_max()).expect("valid slope")
    }

    pub fn hoelder(slope: f64, exponent: f64) -> Self {
        Modulus::new(ModulusKind::Hoelder { slope, exponent }, 0.0, default_r_max())
            .expect("valid Hölder parameters")
    }

    /// Same shape with a different ω(0).
    pub fn with_offset(mut self, offset: f64) -> Result<Self> {
        if !(offset.is_finite() && offset >= 0.0) {
            return Err(Error::Modulus(format!("offset must be finite and nonnegative, got {offset}")));
        }
        self.offset = offset;
        Ok(self)
    }

    /// C·ω, with the offset scaled as well.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Modulus(format!("scale factor must be nonnegative, got {c}")));
        }
        let kind = match &self.kind {
            ModulusKind::Zero => ModulusKind::Zero,
            ModulusKind::Lipschitz { slope } => ModulusKind::Lipschitz { slope: slope * c },
            ModulusKind::Hoelder { slope, exponent } => {
                ModulusKind::Hoelder { slope: slope * c, exponent: *exponent }
            }
            ModulusKind::Tabulated { radii, values } => ModulusKind::Tabulated {
                radii: radii.clone(),
                values: values.iter().map(|v| v * c).collect(),
            },
        };
        Modulus::new(kind, self.offset * c, self.r_max)
    }

    pub fn kind(&self) -> &ModulusKind {
        &self.kind
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// True when ω(0) = 0, required by the translation and gap audits.
    pub fn vanishes_at_zero(&self) -> bool {
        self.offset == 0.0
    }

    /// ω(r) for `0 ≤ r ≤ r_max`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0 && r <= self.r_max) {
            return Err(Error::Domain(format!("radius {r} outside [0, {}]", self.r_max)));
        }
        Ok(self.eval_unchecked(r))
    }

    pub(crate) fn eval_unchecked(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        self.offset
            + match &self.kind {
                ModulusKind::Zero => 0.0,
                ModulusKind::Lipschitz { slope } => slope * r,
                ModulusKind::Hoelder { slope, exponent } => slope * r.powf(*exponent),
                ModulusKind::Tabulated { radii, values } => interpolate(radii, values, r),
            }
    }

    /// ψ(r) = √(r² + ω(r)²).
    pub fn psi(&self, r: f64) -> Result<f64> {
        let w = self.eval(r)?;
        Ok(r.hypot(w))
    }

    /// φ(r) = r + ω(r).
    pub fn phi(&self, r: f64) -> Result<f64> {
        Ok(r + self.eval(r)?)
    }

    /// `(ψ(r), φ(r))`.
    pub fn psi_phi(&self, r: f64) -> Result<(f64, f64)> {
        let w = self.eval(r)?;
        Ok((r.hypot(w), r + w))
    }

    /// φ⁻¹(s) by bisection; requires `φ(0) ≤ s ≤ φ(r_max)`.
    pub fn phi_inv(&self, s: f64) -> Result<f64> {
        self.invert(s, |m, r| r + m.eval_unchecked(r), "phi")
    }

    /// ψ⁻¹(s) by bisection; requires `ψ(0) ≤ s ≤ ψ(r_max)`.
    pub fn psi_inv(&self, s: f64) -> Result<f64> {
        self.invert(s, |m, r| r.hypot(m.eval_unchecked(r)), "psi")
    }

    fn invert(&self, s: f64, f: impl Fn(&Self, f64) -> f64, name: &str) -> Result<f64> {
        let lo_val = f(self, 0.0);
        let hi_val = f(self, self.r_max);
        if !(s >= lo_val) {
            return Err(Error::Domain(format!("{name} target {s} below range start {lo_val}")));
        }
        if s > hi_val {
            return Err(Error::Domain(format!("{name} target {s} beyond range end {hi_val}")));
        }
        // Stop on an interval of width 1e-12·r_max whose image is equally
        // narrow; steep Hölder moduli near 0 need the second condition.
        let tol = 1e-12 * self.r_max;
        let (mut lo, mut hi) = (0.0, self.r_max);
        while hi - lo > tol || f(self, hi) - f(self, lo) > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(self, mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Sampled check of monotonicity and semi-additivity of ω − ω(0) on a
    /// uniform grid of `samples` radii in `[0, r_max]`.
    pub fn check_invariants(&self, samples: usize) -> Result<()> {
        let n = samples.max(2);
        let rs: Vec<f64> = (0..n).map(|i| self.r_max * i as f64 / (n - 1) as f64).collect();
        let w: Vec<f64> = rs.iter().map(|&r| self.eval_unchecked(r) - self.offset).collect();
        let slack = 1e-12 * (1.0 + w.iter().cloned().fold(0.0, f64::max));
        for i in 1..n {
            if w[i] + slack < w[i - 1] {
                return Err(Error::Modulus(format!("not nondecreasing near r = {}", rs[i])));
            }
        }
        for i in 0..n {
            for j in 0..n - i {
                // rs[i] + rs[j] = rs[i + j] on the uniform grid
                if w[i + j] > w[i] + w[j] + slack {
                    return Err(Error::Modulus(format!(
                        "not semi-additive at a = {}, b = {}",
                        rs[i], rs[j]
                    )));
                }
            }
        }
        Ok(())
    }
}

fn validate_table(radii: &[f64], values: &[f64], r_max: f64) -> Result<()> {
    if radii.len() != values.len() || radii.len() < 2 {
        return Err(Error::Modulus("table needs at least two (radius, value) pairs of equal length".into()));
    }
    if radii[0] != 0.0 || values[0] != 0.0 {
        return Err(Error::Modulus("table must start at (0, 0); use the offset for ω(0)".into()));
    }
    for w in radii.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Modulus("table radii must be strictly increasing".into()));
        }
    }
    for w in values.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Modulus("table values must be nondecreasing".into()));
        }
    }
    if *radii.last().unwrap() < r_max {
        return Err(Error::Modulus(format!("table must cover r_max = {r_max}")));
    }
    // semi-additivity on the sample radii, interpolated in between
    for (i, &a) in radii.iter().enumerate() {
        for &b in &radii[i..] {
            if a + b > *radii.last().unwrap() {
                break;
            }
            let lhs = interpolate(radii, values, a + b);
            let rhs = interpolate(radii, values, a) + interpolate(radii, values, b);
            if lhs > rhs * (1.0 + 1e-12) + 1e-15 {
                return Err(Error::Modulus(format!("table not semi-additive at a = {a}, b = {b}")));
            }
        }
    }
    Ok(())
}

fn interpolate(radii: &[f64], values: &[f64], r: f64) -> f64 {
    let k = radii.partition_point(|&x| x <= r);
    if k == 0 {
        return values[0];
    }
    if k >= radii.len() {
        return *values.last().unwrap();
    }
    let (r0, r1) = (radii[k - 1], radii[k]);
    let t = (r - r0) / (r1 - r0);
    values[k - 1] + t * (values[k] - values[k - 1])
}
