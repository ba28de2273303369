use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MultiplierError;
use crate::geometry::{polygon, Domain, Point, SonicCurve, Variant};
use crate::operators::{BoxField, Grid, GridField};

/// Shape of the random bumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    /// Gaussian terms per bump.
    pub modes: usize,
    /// Width range relative to the domain diameter.
    pub width: (f64, f64),
}

impl Default for ShapeParams {
    fn default() -> Self {
        Self { modes: 3, width: (0.15, 0.4) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Bump {
    offset: f64,
    terms: Vec<(f64, f64, f64, f64)>,
}

impl Bump {
    fn random(rng: &mut ChaCha8Rng, shape: &ShapeParams, bbox: (f64, f64, f64, f64)) -> Self {
        let (x0, x1, y0, y1) = bbox;
        let diam = (x1 - x0).hypot(y1 - y0);
        let terms = (0..shape.modes)
            .map(|_| {
                let cx = rng.gen_range(x0..=x1);
                let cy = rng.gen_range(y0..=y1);
                let s = diam * rng.gen_range(shape.width.0..=shape.width.1);
                let c = rng.gen_range(-1.0..=1.0);
                (cx, cy, 1.0 / (2.0 * s * s), c)
            })
            .collect();
        Self { offset: rng.gen_range(0.5..=1.5), terms }
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        self.offset
            + self
                .terms
                .iter()
                .map(|&(cx, cy, inv, c)| c * (-((x - cx).powi(2) + (y - cy).powi(2)) * inv).exp())
                .sum::<f64>()
    }
}

/// Closed-form test field
///
/// ```text
///     w₁ = V·B₁·D·(y − y₀)²
///     w₂ = w₁·√(σ(y) − x_Γ(y)) + (x − x_Γ(y))·V·B₂·(y − y₀)²
/// ```
///
/// `V` vanishes at the origin (and on `y = 0` for the primed domain), `D`
/// vanishes on `C₁` and on the lines carrying `C₂`, and `x_Γ(y)` is the
/// abscissa of `Γ` at height `y`. On `Γ` this gives `w₁dx + w₂dy = 0`.
/// The `(y − y₀)²` factor smooths over the kink of `x_Γ` at the sonic point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFieldFn {
    b1: Bump,
    b2: Bump,
    eps: f64,
    m: f64,
    y0: f64,
    axis_factor: bool,
    c2_lines: Vec<(Point, Point)>,
    gamma_y: Vec<f64>,
    gamma_x: Vec<f64>,
    sonic: SonicCurve,
}

impl TestFieldFn {
    fn x_gamma(&self, y: f64) -> f64 {
        let ys = &self.gamma_y;
        if y <= ys[0] {
            return self.sonic.sigma(y);
        }
        let n = ys.len();
        let k = ys.partition_point(|&v| v <= y).clamp(1, n - 1);
        let t = (y - ys[k - 1]) / (ys[k] - ys[k - 1]);
        self.gamma_x[k - 1] + t * (self.gamma_x[k] - self.gamma_x[k - 1])
    }

    /// Derivative-free part shared by both components.
    fn weight(&self, x: f64, y: f64) -> f64 {
        let mut v = x * x + y * y;
        if self.axis_factor {
            v *= y * y;
        }
        v
    }

    fn level_set(&self, x: f64, y: f64) -> f64 {
        let mut d = y - self.eps * x.signum() * x.abs().powf(self.m);
        for &(a, b) in &self.c2_lines {
            let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
            let len = tx.hypot(ty);
            d *= (-ty * (x - a[0]) + tx * (y - a[1])) / len;
        }
        d
    }

    /// `√(σ − x_Γ)` above the sonic point, zero below.
    pub fn gamma_slope(&self, y: f64) -> f64 {
        if y <= self.y0 {
            0.0
        } else {
            (self.sonic.sigma(y) - self.x_gamma(y)).max(0.0).sqrt()
        }
    }

    /// `L*w` of the closed form (zero-order coefficient `1 − k`), by
    /// fourth-order differences with step `dh`.
    pub fn adjoint(&self, x: f64, y: f64, k: f64, dh: f64) -> (f64, f64) {
        let d = |ex: f64, ey: f64| {
            let e = |t: f64| self.eval(x + t * ex, y + t * ey);
            let (a, b, c, d) = (e(-2.0 * dh), e(-dh), e(dh), e(2.0 * dh));
            let s = 12.0 * dh;
            ((a.0 - 8.0 * b.0 + 8.0 * c.0 - d.0) / s, (a.1 - 8.0 * b.1 + 8.0 * c.1 - d.1) / s)
        };
        let (w1x, w2x) = d(1.0, 0.0);
        let (w1y, w2y) = d(0.0, 1.0);
        let w1 = self.eval(x, y).0;
        ((x - self.sonic.sigma(y)) * w1x + (1.0 - k) * w1 + w2y, w1y - w2x)
    }

    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        let v = self.weight(x, y);
        let w1 = v * self.b1.eval(x, y) * self.level_set(x, y) * (y - self.y0).powi(2);
        let w2 = w1 * self.gamma_slope(y) + (x - self.x_gamma(y)) * v * self.b2.eval(x, y) * (y - self.y0).powi(2);
        (w1, w2)
    }
}

/// A test field sampled on a grid together with its closed form.
#[derive(Debug, Clone)]
pub struct TestField {
    pub field: GridField,
    pub samples: BoxField,
    pub exact: TestFieldFn,
    pub seed: u64,
}

impl TestField {
    /// Bilinear trace from the grid samples.
    pub fn trace(&self, p: Point) -> (f64, f64) {
        self.samples.eval(p)
    }
}

/// Construct a member of the test space on `domain`, sampled on `grid`.
pub fn make_test_field(
    domain: &Domain,
    grid: &Grid,
    shape: &ShapeParams,
    seed: u64,
) -> Result<TestField, MultiplierError> {
    let poly = domain.polygon();
    let bbox = poly.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), p| (a.min(p[0]), b.max(p[0]), c.min(p[1]), d.max(p[1])),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c2 = &domain.boundary.c2;
    let exact = (0..8)
        .map(|_| {
            TestFieldFn {
                b1: Bump::random(&mut rng, shape, bbox),
                b2: Bump::random(&mut rng, shape, bbox),
                eps: domain.c1_spec.eps,
                m: domain.c1_spec.m,
                y0: domain.y0,
                axis_factor: matches!(domain.variant, Variant::OmegaPrime { .. }),
                c2_lines: c2.windows(2).map(|w| (w[0], w[1])).collect(),
                gamma_y: domain.boundary.gamma.iter().map(|p| p[1]).collect(),
                gamma_x: domain.boundary.gamma.iter().map(|p| p[0]).collect(),
                sonic: domain.sonic.clone(),
            }
        })
        .find(|f| {
            grid.centers().iter().any(|p| f.b1.eval(p[0], p[1]).abs() > 1e-8)
                && grid.centers().iter().any(|p| f.b2.eval(p[0], p[1]).abs() > 1e-8)
        })
        .ok_or(MultiplierError::DegenerateTestField { attempts: 8 })?;

    // trace conditions, checked on the closed form
    let h = grid.hx.min(grid.hy);
    let scale = grid
        .centers()
        .iter()
        .map(|p| exact.eval(p[0], p[1]).0.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for line in domain.data_boundary() {
        if line == domain.boundary.c1.as_slice() && domain.c1_spec.m != 1.0 {
            continue;
        }
        for p in polygon::resample(line, h) {
            let w1 = exact.eval(p[0], p[1]).0;
            if w1.abs() > 1e-12 * scale.max(1.0) {
                return Err(MultiplierError::TraceViolation(format!("w1 = {w1:e} at {p:?}")));
            }
        }
    }
    for p in &domain.boundary.gamma {
        let (w1, w2) = exact.eval(p[0], p[1]);
        let slope = exact.gamma_slope(p[1]);
        let defect = (w2 - w1 * slope).abs();
        if defect > 1e-10 * scale.max(1.0) {
            return Err(MultiplierError::TraceViolation(format!("gamma relation defect {defect:e} at {p:?}")));
        }
    }

    let samples = BoxField::sample(grid, |x, y| exact.eval(x, y));
    let field = samples.masked(grid);
    if !field.is_finite() {
        return Err(MultiplierError::TraceViolation("non-finite sample".into()));
    }
    Ok(TestField { field, samples, exact, seed })
}
