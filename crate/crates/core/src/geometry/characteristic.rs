use serde::{Deserialize, Serialize};

use super::{GeometryError, Point, SonicCurve};
use crate::numeric::rk4_step;

/// Tolerance for a start point slightly inside the elliptic region.
const RADICAND_CLAMP: f64 = 1e-10;

/// Where to stop tracing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stop {
    XReaches(f64),
    YReaches(f64),
}

/// A traced characteristic `dx/dy = −√(σ(y) − x)`.
///
/// The curve is integrated in the parameter `r = √(σ(y) − x)`, in which it is
/// smooth at the sonic start point:
///
/// ```text
///     dy/dr = 2r / (σ′(y) + r),    x = σ(y) − r²
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicTrace {
    pub points: Vec<Point>,
    pub params: Vec<f64>,
}

#[inline]
fn rhs(sonic: &SonicCurve, r: f64, y: f64) -> f64 {
    2.0 * r / (sonic.sigma_prime(y) + r)
}

/// Trace from `start` (on the sonic curve) with parameter step `step` until
/// the stop condition, guarding at `y = y_guard`.
pub fn trace_characteristic(
    sonic: &SonicCurve,
    start: Point,
    stop: Stop,
    step: f64,
    y_guard: f64,
) -> Result<CharacteristicTrace, GeometryError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(GeometryError::InvalidStep(step));
    }
    let [x0, y0] = start;
    let (s0, sp0) = sonic.eval(y0)?;
    let radicand = s0 - x0;
    if radicand < -RADICAND_CLAMP || (sp0 == 0.0 && radicand <= 0.0) {
        return Err(GeometryError::StartOffSonic { x: x0, y: y0, radicand });
    }
    let r0 = radicand.max(0.0).sqrt();
    let f = |r: f64, y: f64| rhs(sonic, r, y);
    // signed distance to the stop condition, negative once it is passed
    let remaining = |r: f64, y: f64| match stop {
        Stop::XReaches(xs) => sonic.sigma(y) - r * r - xs,
        Stop::YReaches(ys) => ys - y,
    };

    let mut points = vec![start];
    let mut params = vec![r0];
    if remaining(r0, y0) <= 0.0 {
        return Ok(CharacteristicTrace { points, params });
    }
    let mut y = y0;
    let mut k: u64 = 0;
    loop {
        let r = r0 + k as f64 * step;
        let r_next = r0 + (k + 1) as f64 * step;
        let h = r_next - r;
        let y_next = rk4_step(&f, r, y, h);
        if !y_next.is_finite() || y_next > sonic.y_max() {
            return Err(GeometryError::StopUnreachable { guard: y_guard.min(sonic.y_max()) });
        }
        if remaining(r_next, y_next) <= 0.0 {
            // shorten the last step so the stop condition holds exactly
            let phi = |t: f64| -> Result<f64, GeometryError> { Ok(remaining(r + t, rk4_step(&f, r, y, t))) };
            let t = crate::numeric::bisect(phi, 0.0, h, 1e-16 * (1.0 + r))?;
            let ye = rk4_step(&f, r, y, t);
            let re = r + t;
            let xe = match stop {
                Stop::XReaches(xs) => xs,
                Stop::YReaches(_) => sonic.sigma(ye) - re * re,
            };
            let ye = match stop {
                Stop::YReaches(ys) => ys,
                Stop::XReaches(_) => ye,
            };
            if t > 0.0 {
                points.push([xe, ye]);
                params.push(re);
            } else {
                *points.last_mut().unwrap() = [xe, ye];
            }
            return Ok(CharacteristicTrace { points, params });
        }
        if y_next > y_guard {
            return Err(GeometryError::StopUnreachable { guard: y_guard });
        }
        y = y_next;
        k += 1;
        points.push([sonic.sigma(y) - r_next * r_next, y]);
        params.push(r_next);
    }
}

/// Max over chords of `|(Δx/Δy)² − (σ(y_m) − x_m)|` at chord midpoints.
/// Second order in the step.
pub fn midpoint_slope_residual(sonic: &SonicCurve, points: &[Point]) -> f64 {
    points
        .windows(2)
        .filter(|w| w[1][1] > w[0][1])
        .map(|w| {
            let dx = w[1][0] - w[0][0];
            let dy = w[1][1] - w[0][1];
            let xm = 0.5 * (w[0][0] + w[1][0]);
            let ym = 0.5 * (w[0][1] + w[1][1]);
            ((dx / dy).powi(2) - (sonic.sigma(ym) - xm)).abs()
        })
        .fold(0.0, f64::max)
}

/// Max over segments of the Hermite–Simpson defect of the `r`-form ODE,
/// normalized by the segment length. Fourth order in the step.
pub fn hermite_simpson_residual(sonic: &SonicCurve, trace: &CharacteristicTrace) -> f64 {
    let pts = &trace.points;
    let rs = &trace.params;
    (1..pts.len())
        .filter(|&k| rs[k] > rs[k - 1])
        .map(|k| {
            let (ra, rb) = (rs[k - 1], rs[k]);
            let (ya, yb) = (pts[k - 1][1], pts[k][1]);
            let dr = rb - ra;
            let ga = rhs(sonic, ra, ya);
            let gb = rhs(sonic, rb, yb);
            let ym = 0.5 * (ya + yb) + dr * (ga - gb) / 8.0;
            let gm = rhs(sonic, 0.5 * (ra + rb), ym);
            ((yb - ya) - dr * (ga + 4.0 * gm + gb) / 6.0).abs() / dr
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parabola_trace(step: f64) -> CharacteristicTrace {
        trace_characteristic(&SonicCurve::parabola(), [0.25, 0.5], Stop::XReaches(0.0), step, 20.0)
            .unwrap()
    }

    #[test]
    fn initial_slope_is_zero() {
        let t = parabola_trace(1e-3);
        let [a, b] = [t.points[0], t.points[1]];
        let slope = (b[0] - a[0]) / (b[1] - a[1]);
        assert!(slope.abs() < 5e-3, "{slope}");
        assert_eq!(t.params[0], 0.0);
    }

    #[test]
    fn matches_fine_reference() {
        let coarse = parabola_trace(1e-3);
        let fine = parabola_trace(1e-5);
        let (ye_c, ye_f) = (coarse.points.last().unwrap()[1], fine.points.last().unwrap()[1]);
        assert!((ye_c - ye_f).abs() <= 1e-8, "{ye_c} vs {ye_f}");
        assert_eq!(coarse.points.last().unwrap()[0], 0.0);
        // coarse nodes coincide with every 100th fine node
        for (k, p) in coarse.points.iter().enumerate().take(coarse.points.len() - 1) {
            let q = fine.points[100 * k];
            assert!((p[0] - q[0]).abs() <= 1e-8 && (p[1] - q[1]).abs() <= 1e-8, "node {k}");
        }
    }

    #[test]
    fn radicand_increases_and_curve_is_monotone() {
        let s = SonicCurve::parabola();
        let t = parabola_trace(1e-3);
        let rad: Vec<f64> = t.points.iter().map(|p| s.sigma(p[1]) - p[0]).collect();
        assert!(rad.iter().all(|&v| v >= -1e-15));
        assert!(rad.windows(2).all(|w| w[1] > w[0]));
        assert!(t.points.windows(2).all(|w| w[1][0] <= w[0][0] && w[1][1] > w[0][1]));
    }

    #[test]
    fn residuals_converge_at_expected_orders() {
        let s = SonicCurve::parabola();
        let m1 = midpoint_slope_residual(&s, &parabola_trace(2e-3).points);
        let m2 = midpoint_slope_residual(&s, &parabola_trace(1e-3).points);
        let ratio = m1 / m2;
        assert!((3.0..=5.0).contains(&ratio), "midpoint ratio {ratio}");

        let h1 = hermite_simpson_residual(&s, &parabola_trace(0.0125));
        let h2 = hermite_simpson_residual(&s, &parabola_trace(0.00625));
        let ratio = h1 / h2;
        assert!((12.0..=20.0).contains(&ratio), "hermite-simpson ratio {ratio}");
        assert!(hermite_simpson_residual(&s, &parabola_trace(1e-3)) <= 1e-6);
    }

    #[test]
    fn y_stop_and_guard() {
        let s = SonicCurve::parabola();
        let t = trace_characteristic(&s, [0.25, 0.5], Stop::YReaches(0.6), 1e-3, 20.0).unwrap();
        assert_eq!(t.points.last().unwrap()[1], 0.6);
        let e = trace_characteristic(&s, [0.25, 0.5], Stop::XReaches(-100.0), 1e-2, 2.0);
        assert!(matches!(e, Err(GeometryError::StopUnreachable { .. })));
    }

    #[test]
    fn off_sonic_start_is_rejected() {
        let s = SonicCurve::parabola();
        let e = trace_characteristic(&s, [0.3, 0.5], Stop::XReaches(0.0), 1e-3, 20.0);
        assert!(matches!(e, Err(GeometryError::StartOffSonic { .. })));
    }
}
