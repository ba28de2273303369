use std::sync::Arc;

use super::{BoundaryMode, SolverError, VectorFn};
use crate::geometry::{Point, SonicCurve};
use crate::operators::{Grid, GridField};

pub const MANUFACTURED_NAMES: [&str; 3] = ["poly1", "poly2", "gradient"];

/// Closed-form `u` with `f = Lu`.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub k: f64,
    pub u: VectorFn,
    pub f: VectorFn,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase").field("name", &self.name).field("k", &self.k).finish_non_exhaustive()
    }
}

impl ManufacturedCase {
    /// Tangential trace `u·t`.
    pub fn trace(&self, p: Point, t: Point) -> f64 {
        let (a, b) = (self.u)(p[0], p[1]);
        a * t[0] + b * t[1]
    }

    pub fn u_field(&self, grid: &Grid) -> GridField {
        GridField::from_fn(grid, |x, y| (self.u)(x, y))
    }

    pub fn f_field(&self, grid: &Grid) -> GridField {
        GridField::from_fn(grid, |x, y| (self.f)(x, y))
    }

    pub fn mode(&self) -> BoundaryMode {
        BoundaryMode::trace_match(self.u.clone())
    }
}

/// `poly1` and `gradient` share `u = (2x + y, x + 3y²) = ∇(x² + xy + y³)`.
pub fn manufactured_case(name: &str, k: f64, sonic: &SonicCurve) -> Result<ManufacturedCase, SolverError> {
    let s = sonic.clone();
    let (u, f): (VectorFn, VectorFn) = match name {
        "poly1" | "gradient" => (
            Arc::new(|x, y| (2.0 * x + y, x + 3.0 * y * y)),
            Arc::new(move |x, y| (2.0 * (x - s.sigma(y)) + k * (2.0 * x + y) + 6.0 * y, 0.0)),
        ),
        "poly2" => (
            Arc::new(|x, y| (x * x, -2.0 * x * y)),
            Arc::new(move |x, y| (2.0 * x * (x - s.sigma(y)) + k * x * x - 2.0 * x, 2.0 * y)),
        ),
        other => return Err(SolverError::UnknownCase(other.to_string())),
    };
    Ok(ManufacturedCase { name: name.to_string(), k, u, f })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly1_data() {
        let m = manufactured_case("poly1", 0.5, &SonicCurve::parabola()).unwrap();
        assert_eq!((m.f)(1.0, 0.0), (3.0, 0.0));
        for &(x, y) in &[(0.3, 0.7), (-1.0, 0.2), (0.0, 1.5)] {
            assert_eq!((m.f)(x, y).1, 0.0);
        }
        assert!(manufactured_case("poly3", 0.5, &SonicCurve::parabola()).is_err());
    }

    /// `f` against centred differences of `u`.
    #[test]
    fn data_matches_operator() {
        let sonic = SonicCurve::parabola();
        let h = 1e-4;
        for name in MANUFACTURED_NAMES {
            let m = manufactured_case(name, 0.3, &sonic).unwrap();
            for &(x, y) in &[(0.3, 0.7), (-0.6, 0.2), (0.1, 1.1)] {
                let (u1, _) = (m.u)(x, y);
                let d = |dx: f64, dy: f64| {
                    let p = (m.u)(x + dx, y + dy);
                    let q = (m.u)(x - dx, y - dy);
                    ((p.0 - q.0) / (2.0 * h), (p.1 - q.1) / (2.0 * h))
                };
                let (u1x, u2x) = d(h, 0.0);
                let (u1y, u2y) = d(0.0, h);
                let f1 = (x - y * y) * u1x + 0.3 * u1 + u2y;
                let f2 = u1y - u2x;
                let (g1, g2) = (m.f)(x, y);
                assert!((f1 - g1).abs() < 1e-7 && (f2 - g2).abs() < 1e-7, "{name} at ({x}, {y})");
            }
        }
    }
}
