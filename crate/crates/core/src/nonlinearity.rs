//! The diffusion nonlinearity `phi` with `0 < delta1 <= phi' <= delta2` and
//! its pressure transform `Phi(s) = int_1^s phi'(xi) / xi dxi`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::quadrature::integrate;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Law {
    Identity,
    /// `s + a sin s`
    Wavy(f64),
    /// `s + a atan s`
    Saturating(f64),
    Custom { phi: ScalarFn, phi_prime: ScalarFn },
}

#[derive(Clone)]
pub struct Nonlinearity {
    law: Law,
    label: String,
    params: Value,
    delta1: f64,
    delta2: f64,
    table: Arc<OnceLock<PressureTable>>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonlinearity({}, [{}, {}])", self.label, self.delta1, self.delta2)
    }
}

impl PartialEq for Nonlinearity {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.params == other.params
            && self.delta1 == other.delta1
            && self.delta2 == other.delta2
    }
}

impl Serialize for Nonlinearity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Nonlinearity", 4)?;
        st.serialize_field("label", &self.label)?;
        st.serialize_field("params", &self.params)?;
        st.serialize_field("delta1", &self.delta1)?;
        st.serialize_field("delta2", &self.delta2)?;
        st.end()
    }
}

impl Nonlinearity {
    fn new(law: Law, label: &str, params: Value, delta1: f64, delta2: f64) -> Result<Self> {
        if !(delta1 > 0.0 && delta1 <= delta2 && delta2.is_finite()) {
            return Err(Error::Nonlinearity(format!(
                "{label}: need 0 < delta1 <= delta2, got [{delta1}, {delta2}]"
            )));
        }
        Ok(Self {
            law,
            label: label.to_string(),
            params,
            delta1,
            delta2,
            table: Arc::new(OnceLock::new()),
        })
    }

    /// The heat equation, `phi(s) = s`.
    pub fn identity() -> Self {
        Self::new(Law::Identity, "identity", json!({}), 1.0, 1.0).unwrap()
    }

    /// `s + a sin s` with bounds `1 -+ a`; requires `0 <= a < 1`.
    pub fn wavy(a: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::Nonlinearity(format!("wavy amplitude must lie in [0, 1), got {a}")));
        }
        Self::new(Law::Wavy(a), "wavy", json!({ "amplitude": a }), 1.0 - a, 1.0 + a)
    }

    /// `s + a atan s` with bounds `1` and `1 + a`; requires `a >= 0`.
    pub fn saturating(a: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::Nonlinearity(format!("saturating amplitude must be >= 0, got {a}")));
        }
        Self::new(Law::Saturating(a), "saturating", json!({ "amplitude": a }), 1.0, 1.0 + a)
    }

    /// A user law with claimed derivative bounds; see [`validate_nonlinearity`].
    pub fn custom<F, G>(label: &str, phi: F, phi_prime: G, delta1: f64, delta2: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            Law::Custom {
                phi: Arc::new(phi),
                phi_prime: Arc::new(phi_prime),
            },
            label,
            json!({}),
            delta1,
            delta2,
        )
    }

    /// Built-in law by label: `identity`, `wavy` or `saturating`, with an
    /// optional `amplitude` parameter (defaults 0.1 and 0.2).
    pub fn from_config(label: &str, params: &Value) -> Result<Self> {
        let amp = |default: f64| -> Result<f64> {
            match params.get("amplitude") {
                None => Ok(default),
                Some(v) => v.as_f64().ok_or_else(|| {
                    Error::Config(format!("nonlinearity `{label}`: params.amplitude must be a number"))
                }),
            }
        };
        match label {
            "identity" => Ok(Self::identity()),
            "wavy" => Self::wavy(amp(0.1)?),
            "saturating" => Self::saturating(amp(0.2)?),
            other => Err(Error::Config(format!("unknown nonlinearity label `{other}`"))),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> &Value {
        &self.params
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn delta2(&self) -> f64 {
        self.delta2
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.law, Law::Identity)
    }

    #[inline]
    pub fn phi(&self, s: f64) -> f64 {
        match &self.law {
            Law::Identity => s,
            Law::Wavy(a) => s + a * s.sin(),
            Law::Saturating(a) => s + a * s.atan(),
            Law::Custom { phi, .. } => phi(s),
        }
    }

    #[inline]
    pub fn phi_prime(&self, s: f64) -> f64 {
        match &self.law {
            Law::Identity => 1.0,
            Law::Wavy(a) => 1.0 + a * s.cos(),
            Law::Saturating(a) => 1.0 + a / (1.0 + s * s),
            Law::Custom { phi_prime, .. } => phi_prime(s),
        }
    }

    /// `Phi(s)` from a cached monotone cubic table in `log s`; falls back to
    /// [`pressure`] outside the tabulated range `e^-745 <= s <= e`.
    pub fn pressure_cached(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("pressure needs s > 0, got {s}")));
        }
        if self.is_identity() {
            return Ok(s.ln());
        }
        let table = self.table.get_or_init(|| PressureTable::build(self));
        match table.eval(s.ln()) {
            Some(v) => Ok(v),
            None => pressure(self, s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub s: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityReport {
    pub label: String,
    pub sample_count: usize,
    pub pass: bool,
    pub violations: Vec<Violation>,
}

/// Checks `phi(0) = 0`, the derivative bounds on `sample_count` uniform
/// points of `[-10, 10]`, and `phi'` against centred differences of `phi` on
/// the part of the sample inside `[-2, 2]`.
pub fn validate_nonlinearity(n: &Nonlinearity, sample_count: usize) -> Result<NonlinearityReport> {
    if sample_count < 100 {
        return Err(Error::Config(format!("validation needs at least 100 samples, got {sample_count}")));
    }
    let mut violations = Vec::new();
    let p0 = n.phi(0.0);
    if p0.abs() > 1e-14 {
        violations.push(Violation {
            s: 0.0,
            reason: format!("phi(0) = {p0:e}"),
        });
    }
    let eta = 1e-5;
    for k in 0..sample_count {
        let s = -10.0 + 20.0 * k as f64 / (sample_count - 1) as f64;
        let d = n.phi_prime(s);
        if !(d >= n.delta1 - 1e-14 && d <= n.delta2 + 1e-14) {
            violations.push(Violation {
                s,
                reason: format!("phi'({s}) = {d} outside [{}, {}]", n.delta1, n.delta2),
            });
        }
        if s.abs() <= 2.0 {
            let fd = (n.phi(s + eta) - n.phi(s - eta)) / (2.0 * eta);
            if (fd - d).abs() > 1e-6 * d.abs().max(1.0) {
                violations.push(Violation {
                    s,
                    reason: format!("phi'({s}) = {d} but centred difference gives {fd}"),
                });
            }
        }
    }
    Ok(NonlinearityReport {
        label: n.label.clone(),
        sample_count,
        pass: violations.is_empty(),
        violations,
    })
}

/// `Phi(s)` by adaptive quadrature (absolute tolerance 1e-10) in the variable
/// `y = log xi`, where the integrand becomes `phi'(e^y)`; exactly `log s` for
/// the identity.
pub fn pressure(n: &Nonlinearity, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("pressure needs s > 0, got {s}")));
    }
    if n.is_identity() {
        return Ok(s.ln());
    }
    integrate(|y| n.phi_prime(y.exp()), 0.0, s.ln(), 1e-10)
}

const TABLE_LO: f64 = -745.0;
const TABLE_HI: f64 = 1.0;
const TABLE_STEP: f64 = 1.0 / 32.0;

/// Knot values and limited slopes of `y -> Phi(e^y)`.
struct PressureTable {
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl PressureTable {
    fn build(n: &Nonlinearity) -> Self {
        let m = ((TABLE_HI - TABLE_LO) / TABLE_STEP).round() as usize;
        let y = |k: usize| TABLE_LO + k as f64 * TABLE_STEP;
        let k0 = (-TABLE_LO / TABLE_STEP).round() as usize;
        let mut values = vec![0.0; m + 1];
        // integrate outward from y = 0 where Phi vanishes
        let piece = |a: f64, b: f64| integrate(|t| n.phi_prime(t.exp()), a, b, 1e-13).unwrap_or(f64::NAN);
        for k in k0 + 1..=m {
            values[k] = values[k - 1] + piece(y(k - 1), y(k));
        }
        for k in (0..k0).rev() {
            values[k] = values[k + 1] - piece(y(k), y(k + 1));
        }
        let mut slopes: Vec<f64> = (0..=m).map(|k| n.phi_prime(y(k).exp())).collect();
        // Fritsch–Carlson limiting keeps each piece monotone
        for k in 0..m {
            let secant = (values[k + 1] - values[k]) / TABLE_STEP;
            if secant <= 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            let a = slopes[k] / secant;
            let b = slopes[k + 1] / secant;
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slopes[k] = tau * a * secant;
                slopes[k + 1] = tau * b * secant;
            }
        }
        Self { values, slopes }
    }

    fn eval(&self, y: f64) -> Option<f64> {
        if !(TABLE_LO..=TABLE_HI).contains(&y) {
            return None;
        }
        let pos = (y - TABLE_LO) / TABLE_STEP;
        let k = (pos.floor() as usize).min(self.values.len() - 2);
        let t = pos - k as f64;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t),
            t * (1.0 - t) * (1.0 - t),
            t * t * (3.0 - 2.0 * t),
            t * t * (t - 1.0),
        );
        Some(
            h00 * self.values[k]
                + h10 * TABLE_STEP * self.slopes[k]
                + h01 * self.values[k + 1]
                + h11 * TABLE_STEP * self.slopes[k + 1],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;

    #[test]
    fn builtins_validate() {
        for n in [
            Nonlinearity::identity(),
            Nonlinearity::wavy(0.1).unwrap(),
            Nonlinearity::saturating(0.2).unwrap(),
        ] {
            let r = validate_nonlinearity(&n, 1001).unwrap();
            assert!(r.pass, "{:?}", r.violations);
        }
    }

    #[test]
    fn square_law_is_rejected() {
        let n = Nonlinearity::custom("square", |s| s * s, |s| 2.0 * s, 0.5, 2.0).unwrap();
        let r = validate_nonlinearity(&n, 200).unwrap();
        assert!(!r.pass);
        assert!(r.violations.iter().any(|v| v.s.abs() < 0.2));
        assert!(r.violations.iter().any(|v| v.s > 5.0));
        assert!(validate_nonlinearity(&n, 99).is_err());
    }

    #[test]
    fn pressure_values() {
        let id = Nonlinearity::identity();
        assert_eq!(pressure(&id, std::f64::consts::E).unwrap(), 1.0);
        let w = Nonlinearity::wavy(0.1).unwrap();
        assert_eq!(pressure(&w, 1.0).unwrap(), 0.0);
        assert!(matches!(pressure(&w, 0.0), Err(Error::Domain(_))));
        // composite Gauss-Legendre on phi'(xi)/xi over [1, 2]
        let (x, wt) = gauss_legendre(40);
        let mut oracle = 0.0;
        for p in 0..8 {
            let (a, b) = (1.0 + p as f64 / 8.0, 1.0 + (p + 1) as f64 / 8.0);
            for (xi, wi) in x.iter().zip(&wt) {
                let s = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                oracle += 0.5 * (b - a) * wi * (1.0 + 0.1 * s.cos()) / s;
            }
        }
        assert!((pressure(&w, 2.0).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn cached_pressure_tracks_quadrature() {
        let w = Nonlinearity::wavy(0.1).unwrap();
        for s in [1e-300, 1e-40, 1e-3, 0.37, 1.0, 2.0, 100.0] {
            let a = w.pressure_cached(s).unwrap();
            let b = pressure(&w, s).unwrap();
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "{s}: {a} vs {b}");
        }
    }
}
