use serde::{Deserialize, Serialize};

use super::MultiplierError;
use crate::geometry::SonicCurve;

/// Multiplier family. The uniqueness variants estimate `L` instead of `L*`,
/// which amounts to replacing `K` by `1 − K` throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    #[default]
    Theorem2,
    Theorem3,
    UniquenessT2,
    UniquenessT3,
}

impl CaseKind {
    pub const ALL: [CaseKind; 4] =
        [CaseKind::Theorem2, CaseKind::Theorem3, CaseKind::UniquenessT2, CaseKind::UniquenessT3];

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Theorem2 => "theorem2",
            CaseKind::Theorem3 => "theorem3",
            CaseKind::UniquenessT2 => "uniqueness_t2",
            CaseKind::UniquenessT3 => "uniqueness_t3",
        }
    }

    fn is_uniqueness(self) -> bool {
        matches!(self, CaseKind::UniquenessT2 | CaseKind::UniquenessT3)
    }

    fn is_t3(self) -> bool {
        matches!(self, CaseKind::Theorem3 | CaseKind::UniquenessT3)
    }

    /// Coefficient that plays the role of `K` in the estimate.
    pub fn effective_k(self, k: f64) -> f64 {
        if self.is_uniqueness() {
            1.0 - k
        } else {
            k
        }
    }

    /// Admissible range of `K`.
    pub fn k_range(self) -> (f64, f64) {
        match self {
            CaseKind::Theorem2 => (0.0, 0.5),
            CaseKind::UniquenessT2 => (0.5, 1.0),
            CaseKind::Theorem3 | CaseKind::UniquenessT3 => (0.0, 1.0),
        }
    }
}

/// `(a(y), b(y))` without admissibility checks.
pub fn pair_ab(kind: CaseKind, k: f64, ell: f64, sonic: &SonicCurve, y: f64) -> (f64, f64) {
    let m = pair_with_derivatives(kind, k, ell, sonic, y);
    (m.a, m.b)
}

#[derive(Debug, Clone, Copy)]
struct PairDerivs {
    a: f64,
    a_y: f64,
    b: f64,
    b_y: f64,
}

fn pair_with_derivatives(kind: CaseKind, k: f64, ell: f64, sonic: &SonicCurve, y: f64) -> PairDerivs {
    let kappa = kind.effective_k(k);
    let (s, sp) = sonic.pair(y);
    if kind.is_t3() {
        PairDerivs {
            a: kappa * y,
            a_y: kappa,
            b: -(1.0 + s / (2.0 * ell)),
            b_y: -sp / (2.0 * ell),
        }
    } else {
        PairDerivs {
            a: kappa * (y + sonic.integral(y) / ell),
            a_y: kappa * (1.0 + s / ell),
            b: -(1.0 + s / ell),
            b_y: -sp / ell,
        }
    }
}

/// A validated multiplier case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierCase {
    pub kind: CaseKind,
    pub k: f64,
    pub ell: f64,
    pub sonic: SonicCurve,
}

/// Entries of `M = [[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MultiplierMatrix {
    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        let Self { a, b, c, d } = *self;
        let s = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
        (0.5 * (s + disc)).sqrt()
    }

    pub fn apply(&self, w1: f64, w2: f64) -> (f64, f64) {
        (self.a * w1 + self.b * w2, self.c * w1 + self.d * w2)
    }
}

/// Pointwise coefficients of the quadratic form `αw₁² + 2βw₁w₂ + γw₂²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTriple {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CoefficientTriple {
    pub fn det(&self) -> f64 {
        self.alpha * self.gamma - self.beta * self.beta
    }

    /// Smaller eigenvalue of `[[α, β], [β, γ]]`.
    pub fn lambda_min(&self) -> f64 {
        let tr = self.alpha + self.gamma;
        let diff = self.alpha - self.gamma;
        let disc = (diff * diff + 4.0 * self.beta * self.beta).sqrt();
        let hi = 0.5 * (tr + disc);
        // product of the eigenvalues avoids cancellation in tr − disc
        if hi > 0.0 {
            self.det() / hi
        } else {
            0.5 * (tr - disc)
        }
    }
}

impl MultiplierCase {
    pub fn new(kind: CaseKind, k: f64, ell: f64, sonic: SonicCurve) -> Result<Self, MultiplierError> {
        let (lo, hi) = kind.k_range();
        if !(k.is_finite() && k >= lo && k <= hi) {
            return Err(MultiplierError::KOutOfRange { case: kind.name(), k, lo, hi });
        }
        if !(ell.is_finite() && ell > 0.0) {
            return Err(MultiplierError::InvalidParameter(format!("l must be > 0, got {ell}")));
        }
        if kind.is_t3() && !sonic.is_parabola() {
            return Err(MultiplierError::RequiresParabola(kind.name()));
        }
        Ok(Self { kind, k, ell, sonic })
    }

    pub fn effective_k(&self) -> f64 {
        self.kind.effective_k(self.k)
    }

    /// `M(x, y)` with `c = −(x − σ)b` and `d = a`.
    pub fn matrix(&self, x: f64, y: f64) -> MultiplierMatrix {
        let (a, b) = pair_ab(self.kind, self.k, self.ell, &self.sonic, y);
        let c = -(x - self.sonic.sigma(y)) * b;
        MultiplierMatrix { a, b, c, d: a }
    }

    /// Closed-form coefficients after the product-rule cancellations.
    pub fn quad_coeffs(&self, x: f64, y: f64) -> CoefficientTriple {
        let kappa = self.effective_k();
        let ell = self.ell;
        if self.kind.is_t3() {
            CoefficientTriple {
                alpha: y / (2.0 * ell) * (2.0 * y * y + 2.0 * ell - x) + (0.5 - kappa) * kappa * y,
                beta: kappa * y * y / (4.0 * ell),
                gamma: y / (2.0 * ell),
            }
        } else {
            let (s, sp) = self.sonic.pair(y);
            CoefficientTriple {
                alpha: sp / (2.0 * ell) * (2.0 * s + ell - x)
                    + kappa * (0.5 - kappa) * (y + self.sonic.integral(y) / ell),
                beta: 0.0,
                gamma: sp / (2.0 * ell),
            }
        }
    }

    /// Coefficients from the general expressions
    /// `α = ½{b_y(x−σ) − bσ′} + (½−K)a`, `β = −½(a_y + Kb)`, `γ = −½b_y`.
    pub fn generic_coeffs(&self, x: f64, y: f64) -> CoefficientTriple {
        let kappa = self.effective_k();
        let p = pair_with_derivatives(self.kind, self.k, self.ell, &self.sonic, y);
        let (s, sp) = self.sonic.pair(y);
        CoefficientTriple {
            alpha: 0.5 * (p.b_y * (x - s) - p.b * sp) + (0.5 - kappa) * p.a,
            beta: -0.5 * (p.a_y + kappa * p.b),
            gamma: -0.5 * p.b_y,
        }
    }
}

/// `(a, b, c, d)` at `(x, y)`.
pub fn multiplier_eval(case: &MultiplierCase, x: f64, y: f64) -> Result<MultiplierMatrix, MultiplierError> {
    if !(y >= 0.0) {
        return Err(MultiplierError::InvalidParameter(format!("y must be >= 0, got {y}")));
    }
    Ok(case.matrix(x, y))
}

pub fn quad_coeffs(case: &MultiplierCase, x: f64, y: f64) -> CoefficientTriple {
    case.quad_coeffs(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn case(kind: CaseKind, k: f64) -> MultiplierCase {
        MultiplierCase::new(kind, k, 1.0, SonicCurve::parabola()).unwrap()
    }

    #[test]
    fn theorem2_reference_point() {
        let c = case(CaseKind::Theorem2, 0.25);
        let m = multiplier_eval(&c, 0.25, 0.5).unwrap();
        assert_relative_eq!(m.a, 0.25 * (0.5 + 0.125 / 3.0), max_relative = 1e-15);
        assert_relative_eq!(m.a, 0.13541667, epsilon = 1e-8);
        assert_eq!(m.b, -1.25);
        assert_eq!(m.c, 0.0);
        assert_eq!(m.d, m.a);
        let q = quad_coeffs(&c, 0.25, 0.5);
        assert_relative_eq!(q.alpha, 0.65885417, epsilon = 1e-8);
        assert_eq!(q.beta, 0.0);
        assert_eq!(q.gamma, 0.5);
    }

    #[test]
    fn theorem3_reference_point() {
        let c = case(CaseKind::Theorem3, 1.0);
        let m = multiplier_eval(&c, 0.25, 0.5).unwrap();
        assert_eq!((m.a, m.b, m.c, m.d), (0.5, -1.125, 0.0, 0.5));
        let q = quad_coeffs(&c, 0.25, 0.5);
        assert_eq!((q.alpha, q.beta, q.gamma), (0.3125, 0.0625, 0.25));
        assert_eq!(q.det(), 0.07421875);
    }

    #[test]
    fn origin_is_degenerate_for_every_case() {
        for kind in CaseKind::ALL {
            let k = kind.k_range().1;
            let c = case(kind, k);
            let m = c.matrix(0.0, 0.0);
            assert_eq!((m.a, m.c), (0.0, 0.0));
            let q = c.quad_coeffs(0.3, 0.0);
            assert_eq!((q.alpha, q.beta, q.gamma), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn admissibility_guards() {
        let s = SonicCurve::parabola();
        assert!(MultiplierCase::new(CaseKind::Theorem2, 0.6, 1.0, s.clone()).is_err());
        assert!(MultiplierCase::new(CaseKind::Theorem3, 1.2, 1.0, s.clone()).is_err());
        assert!(MultiplierCase::new(CaseKind::UniquenessT2, 0.4, 1.0, s.clone()).is_err());
        let cubic = SonicCurve::power(3.0, 1.0).unwrap();
        assert!(matches!(
            MultiplierCase::new(CaseKind::Theorem3, 0.5, 1.0, cubic),
            Err(MultiplierError::RequiresParabola(_))
        ));
    }

    #[test]
    fn uniqueness_variant_mirrors_theorem_with_complementary_k() {
        let u = case(CaseKind::UniquenessT2, 0.75);
        let t = case(CaseKind::Theorem2, 0.25);
        assert_eq!(u.quad_coeffs(0.1, 0.4), t.quad_coeffs(0.1, 0.4));
        assert_eq!(u.matrix(0.1, 0.4), t.matrix(0.1, 0.4));
    }

    #[test]
    fn spectral_norm_of_known_matrices() {
        let m = MultiplierMatrix { a: 3.0, b: 0.0, c: 0.0, d: -4.0 };
        assert_relative_eq!(m.spectral_norm(), 4.0, max_relative = 1e-15);
        let m = MultiplierMatrix { a: 1.0, b: 1.0, c: 0.0, d: 1.0 };
        assert_relative_eq!(m.spectral_norm(), (1.5 + 1.25f64.sqrt()).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn lambda_min_matches_closed_form() {
        let q = CoefficientTriple { alpha: 2.0, beta: 1.0, gamma: 2.0 };
        assert_relative_eq!(q.lambda_min(), 1.0, max_relative = 1e-15);
        let q = CoefficientTriple { alpha: 1e-3, beta: 0.0, gamma: 5.0 };
        assert_relative_eq!(q.lambda_min(), 1e-3, max_relative = 1e-15);
    }
}
