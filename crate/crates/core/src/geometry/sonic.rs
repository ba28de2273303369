use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::numeric::{adaptive_simpson, MonotoneCubic};

/// Serializable description of a sonic curve `x = σ(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SonicSpec {
    /// `σ(y) = coefficient · y^exponent`
    Power { exponent: f64, coefficient: f64 },
    /// Monotone samples `(y_k, σ_k)` starting at the origin.
    Tabulated { y: Vec<f64>, sigma: Vec<f64> },
}

impl SonicSpec {
    pub fn parabola() -> Self {
        SonicSpec::Power { exponent: 2.0, coefficient: 1.0 }
    }
}

/// The degeneracy curve `x = σ(y)`. The system is elliptic for `x > σ(y)` and
/// hyperbolic for `x < σ(y)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SonicSpec", into = "SonicSpec")]
pub struct SonicCurve {
    spec: SonicSpec,
    table: Option<MonotoneCubic>,
}

impl PartialEq for SonicCurve {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl From<SonicCurve> for SonicSpec {
    fn from(s: SonicCurve) -> Self {
        s.spec
    }
}

impl TryFrom<SonicSpec> for SonicCurve {
    type Error = GeometryError;

    fn try_from(spec: SonicSpec) -> Result<Self, Self::Error> {
        SonicCurve::new(spec)
    }
}

impl SonicCurve {
    pub fn new(spec: SonicSpec) -> Result<Self, GeometryError> {
        match &spec {
            SonicSpec::Power { exponent, coefficient } => {
                if !(exponent.is_finite() && *exponent >= 2.0) {
                    return Err(GeometryError::InvalidSonic(format!(
                        "power exponent must be >= 2, got {exponent}"
                    )));
                }
                if !(coefficient.is_finite() && *coefficient > 0.0) {
                    return Err(GeometryError::InvalidSonic(format!(
                        "power coefficient must be > 0, got {coefficient}"
                    )));
                }
                Ok(Self { spec, table: None })
            }
            SonicSpec::Tabulated { y, sigma } => {
                if y.len() < 3 || y.len() != sigma.len() {
                    return Err(GeometryError::InvalidSonic(
                        "table needs at least 3 matching (y, sigma) samples".into(),
                    ));
                }
                if y[0] != 0.0 || sigma[0] != 0.0 {
                    return Err(GeometryError::InvalidSonic(
                        "table must start at sigma(0) = 0".into(),
                    ));
                }
                if sigma.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(GeometryError::InvalidSonic(
                        "sigma samples must be strictly increasing".into(),
                    ));
                }
                let table = MonotoneCubic::new(y.clone(), sigma.clone(), true).ok_or_else(|| {
                    GeometryError::InvalidSonic("y samples must be strictly increasing".into())
                })?;
                if let Some(&yk) = y.iter().skip(1).find(|&&yk| table.eval(yk).1 <= 0.0) {
                    return Err(GeometryError::InvalidSonic(format!(
                        "interpolated sigma' vanishes at y = {yk}"
                    )));
                }
                Ok(Self { spec, table: Some(table) })
            }
        }
    }

    pub fn power(exponent: f64, coefficient: f64) -> Result<Self, GeometryError> {
        Self::new(SonicSpec::Power { exponent, coefficient })
    }

    /// `σ(y) = y²`, the case singled out by the cold plasma literature.
    pub fn parabola() -> Self {
        Self::new(SonicSpec::parabola()).expect("parabola is valid")
    }

    /// Tabulate `f` on `[0, y_max]` with spacing `dy`.
    pub fn tabulate<F: Fn(f64) -> f64>(f: F, y_max: f64, dy: f64) -> Result<Self, GeometryError> {
        let n = (y_max / dy).round() as usize;
        let y: Vec<f64> = (0..=n).map(|k| k as f64 * dy).collect();
        let sigma = y.iter().map(|&t| f(t)).collect();
        Self::new(SonicSpec::Tabulated { y, sigma })
    }

    pub fn spec(&self) -> &SonicSpec {
        &self.spec
    }

    /// True when the curve is exactly `σ(y) = y²`.
    pub fn is_parabola(&self) -> bool {
        matches!(self.spec, SonicSpec::Power { exponent, coefficient } if exponent == 2.0 && coefficient == 1.0)
    }

    /// Largest ordinate at which σ is defined.
    pub fn y_max(&self) -> f64 {
        match &self.table {
            Some(t) => t.domain().1,
            None => f64::INFINITY,
        }
    }

    /// `(σ(y), σ′(y))` with domain checks.
    pub fn eval(&self, y: f64) -> Result<(f64, f64), GeometryError> {
        if !(y >= 0.0) {
            return Err(GeometryError::NegativeOrdinate(y));
        }
        if y > self.y_max() {
            return Err(GeometryError::OutsideTable { y, y_max: self.y_max() });
        }
        Ok(self.pair(y))
    }

    /// `(σ(y), σ′(y))` without checks. Negative `y` is clamped to the axis and
    /// tabulated curves are clamped to their table.
    #[inline]
    pub fn pair(&self, y: f64) -> (f64, f64) {
        let y = y.max(0.0);
        match (&self.spec, &self.table) {
            (SonicSpec::Power { exponent, coefficient }, _) => {
                if *exponent == 2.0 {
                    (coefficient * y * y, 2.0 * coefficient * y)
                } else {
                    let p = y.powf(exponent - 1.0);
                    (coefficient * p * y, coefficient * exponent * p)
                }
            }
            (_, Some(t)) => t.eval(y),
            _ => unreachable!("tabulated curve without table"),
        }
    }

    #[inline]
    pub fn sigma(&self, y: f64) -> f64 {
        self.pair(y).0
    }

    #[inline]
    pub fn sigma_prime(&self, y: f64) -> f64 {
        self.pair(y).1
    }

    /// `∫₀ʸ σ(t) dt`: closed form for power curves, adaptive quadrature otherwise.
    pub fn integral(&self, y: f64) -> f64 {
        let y = y.max(0.0);
        match &self.spec {
            SonicSpec::Power { exponent, coefficient } => {
                coefficient * y.powf(exponent + 1.0) / (exponent + 1.0)
            }
            SonicSpec::Tabulated { .. } => {
                adaptive_simpson(&|t| self.sigma(t), 0.0, y, 1e-14 * (1.0 + y))
            }
        }
    }
}

/// Free-function form of [`SonicCurve::eval`].
pub fn eval_sonic(sonic: &SonicCurve, y: f64) -> Result<(f64, f64), GeometryError> {
    sonic.eval(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola_values() {
        let s = SonicCurve::parabola();
        assert_eq!(eval_sonic(&s, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(eval_sonic(&s, 0.5).unwrap(), (0.25, 1.0));
    }

    #[test]
    fn negative_ordinate_is_rejected() {
        let s = SonicCurve::parabola();
        assert!(matches!(s.eval(-0.1), Err(GeometryError::NegativeOrdinate(_))));
    }

    #[test]
    fn tabulated_parabola_matches_closed_form() {
        let s = SonicCurve::tabulate(|y| y * y, 2.0, 1e-3).unwrap();
        let (v, d) = s.eval(0.5).unwrap();
        assert!((v - 0.25).abs() <= 1e-5, "{v}");
        assert!((d - 1.0).abs() <= 1e-5, "{d}");
        assert_eq!(s.eval(0.0).unwrap(), (0.0, 0.0));
        assert!(s.eval(2.5).is_err());
    }

    #[test]
    fn rejects_bad_power_parameters() {
        assert!(SonicCurve::power(1.5, 1.0).is_err());
        assert!(SonicCurve::power(2.0, 0.0).is_err());
        assert!(SonicCurve::power(3.0, 2.0).is_ok());
    }

    #[test]
    fn rejects_non_monotone_table() {
        let spec = SonicSpec::Tabulated { y: vec![0.0, 0.5, 1.0], sigma: vec![0.0, 0.3, 0.2] };
        assert!(SonicCurve::new(spec).is_err());
    }

    #[test]
    fn integral_closed_form_and_quadrature_agree() {
        let p = SonicCurve::parabola();
        let t = SonicCurve::tabulate(|y| y * y, 2.0, 1e-3).unwrap();
        assert!((p.integral(0.5) - 0.5f64.powi(3) / 3.0).abs() < 1e-15);
        assert!((t.integral(0.5) - p.integral(0.5)).abs() < 1e-8);
    }

    #[test]
    fn serde_round_trip_keeps_spec() {
        let s = SonicCurve::power(3.0, 0.5).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        assert!(js.contains("\"kind\":\"power\""));
        let back: SonicCurve = serde_json::from_str(&js).unwrap();
        assert_eq!(back, s);
    }
}
