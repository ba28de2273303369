use serde::{Deserialize, Serialize};

use super::{GeometryError, SonicCurve};
use crate::numeric::bisect;

/// Enclosing rectangle `p < x < ℓ`, `0 < y < q` with margin `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectangleSpec {
    pub p: f64,
    pub q: f64,
    pub ell: f64,
    pub delta: f64,
}

impl Default for RectangleSpec {
    fn default() -> Self {
        Self { p: -1.0, q: 2.0, ell: 1.0, delta: 0.1 }
    }
}

impl RectangleSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let Self { p, q, ell, delta } = *self;
        if ![p, q, ell, delta].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidRectangle("non-finite parameter".into()));
        }
        if !(p < 0.0 && 0.0 < ell) {
            return Err(GeometryError::InvalidRectangle(format!("need p < 0 < l, got p = {p}, l = {ell}")));
        }
        if !(q > 0.0) {
            return Err(GeometryError::InvalidRectangle(format!("need q > 0, got {q}")));
        }
        if !(delta > 0.0 && delta < ell - p) {
            return Err(GeometryError::InvalidRectangle(format!(
                "need 0 < delta < l - p = {}, got {delta}",
                ell - p
            )));
        }
        Ok(())
    }
}

/// The curve `y = ε·xᵐ` used for `C₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C1Spec {
    pub eps: f64,
    pub m: f64,
}

impl Default for C1Spec {
    fn default() -> Self {
        Self { eps: 2.0, m: 1.0 }
    }
}

impl C1Spec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(GeometryError::InvalidC1(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(self.m.is_finite() && self.m > 0.5) {
            return Err(GeometryError::InvalidC1(format!("m must exceed 1/2, got {}", self.m)));
        }
        Ok(())
    }

    #[inline]
    pub fn y(&self, x: f64) -> f64 {
        self.eps * x.powf(self.m)
    }

    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        self.eps * self.m * x.powf(self.m - 1.0)
    }
}

/// Admissible range of `ε` for the family `y = ε xᵐ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBounds {
    pub eps_min: f64,
    /// `+∞` when `K = 0` (serialized as `null`).
    pub eps_max: f64,
    pub feasible: bool,
}

impl EpsilonBounds {
    pub fn contains(&self, eps: f64) -> bool {
        self.feasible && eps >= self.eps_min && eps <= self.eps_max
    }
}

/// Sufficient bounds on `ε`: the lower one keeps the intersection with the
/// sonic curve left of `ℓ − δ`, the upper one makes `a·dy/dx + b < 0` hold on
/// the curve for the theorem-2 multiplier pair.
pub fn c1_epsilon_bounds(k: f64, m: f64, ell: f64, delta: f64) -> EpsilonBounds {
    let eps_min = (ell - delta).powf(1.0 - 2.0 * m).sqrt();
    let eps_max = if k > 0.0 {
        (ell.powf(1.0 - 2.0 * m) / (k * m)).sqrt()
    } else {
        f64::INFINITY
    };
    let params_ok = m > 0.5 && ell > delta && delta > 0.0 && (0.0..=1.0).contains(&k);
    let exponent_ok = k == 0.0 || m <= 1.0 / k;
    EpsilonBounds {
        eps_min,
        eps_max,
        feasible: params_ok && exponent_ok && eps_min <= eps_max,
    }
}

/// First crossing of `y = ε xᵐ` with `x = σ(y)` in `(0, ℓ]`.
pub fn intersect_c1_sonic(
    c1: &C1Spec,
    sonic: &SonicCurve,
    ell: f64,
) -> Result<(f64, f64), GeometryError> {
    c1.validate()?;
    let g = |x: f64| -> Result<f64, GeometryError> { Ok(x - sonic.eval(c1.y(x))?.0) };

    // geometric lead-in resolves crossings very close to the origin
    let mut xs: Vec<f64> = (12..=60).rev().map(|j| ell * 0.5f64.powi(j)).collect();
    let n = 4096;
    xs.extend((1..=n).map(|k| ell * k as f64 / n as f64));

    let mut prev: Option<(f64, f64)> = None;
    for &x in &xs {
        let gx = match g(x) {
            Ok(v) => v,
            Err(GeometryError::OutsideTable { .. }) => break,
            Err(e) => return Err(e),
        };
        if gx == 0.0 {
            return Ok((x, c1.y(x)));
        }
        if let Some((xp, gp)) = prev {
            if gp > 0.0 && gx < 0.0 {
                let x0 = bisect(g, xp, x, 1e-14 * ell)?;
                return Ok((x0, c1.y(x0)));
            }
        }
        prev = Some((x, gx));
    }
    Err(GeometryError::NoIntersection { ell })
}
