//! Small numerical building blocks shared by the modules: compensated
//! summation, bracketed root finding, adaptive Simpson quadrature and
//! monotone cubic interpolation.

/// Neumaier (improved Kahan) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Bisection on a bracket `[lo, hi]` with `f(lo)` and `f(hi)` of opposite sign
/// (or one of them zero). Stops when the bracket is narrower than `xtol`.
pub fn bisect<F, E>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let mut flo = f(lo)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    let fhi = f(hi)?;
    if fhi == 0.0 {
        return Ok(hi);
    }
    debug_assert!(flo.signum() != fhi.signum(), "bisect: no sign change");
    for _ in 0..400 {
        if (hi - lo).abs() <= xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Monotone piecewise cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    /// `xs` strictly increasing, `ys` non-decreasing. When `zero_start_slope`
    /// is set the derivative at `xs[0]` is pinned to zero.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, zero_start_slope: bool) -> Option<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return None;
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return None;
        }
        let secant: Vec<f64> = (0..n - 1)
            .map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]))
            .collect();
        let mut ds = vec![0.0; n];
        for k in 1..n - 1 {
            let (s0, s1) = (secant[k - 1], secant[k]);
            if s0 * s1 <= 0.0 {
                ds[k] = 0.0;
            } else {
                // weighted harmonic mean
                let h0 = xs[k] - xs[k - 1];
                let h1 = xs[k + 1] - xs[k];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                ds[k] = (w1 + w2) / (w1 / s0 + w2 / s1);
            }
        }
        ds[0] = if zero_start_slope {
            0.0
        } else {
            end_slope(xs[1] - xs[0], xs.get(2).map_or(0.0, |x| x - xs[1]), secant[0], secant.get(1).copied())
        };
        ds[n - 1] = end_slope(
            xs[n - 1] - xs[n - 2],
            if n > 2 { xs[n - 2] - xs[n - 3] } else { 0.0 },
            secant[n - 2],
            if n > 2 { Some(secant[n - 3]) } else { None },
        );
        Some(Self { xs, ys, ds })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    fn locate(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(k) => k.min(self.xs.len() - 2),
            Err(k) => k.saturating_sub(1).min(self.xs.len() - 2),
        }
    }

    /// Value and first derivative at `x` (clamped to the table range).
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let k = self.locate(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (y0, y1, d0, d1) = (self.ys[k], self.ys[k + 1], self.ds[k], self.ds[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = 6.0 * t2 - 6.0 * t;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = -6.0 * t2 + 6.0 * t;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let dv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
        (v, dv)
    }
}

// three-point end slope, limited to preserve monotonicity
fn end_slope(h0: f64, h1: f64, s0: f64, s1: Option<f64>) -> f64 {
    let Some(s1) = s1 else { return s0 };
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d.signum() != s0.signum() {
        0.0
    } else if s0.signum() != s1.signum() && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

/// Classical fourth-order Runge–Kutta step for a scalar ODE `dy/dt = f(t, y)`.
#[inline]
pub fn rk4_step<F: Fn(f64, f64) -> f64>(f: &F, t: f64, y: f64, h: f64) -> f64 {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(t + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Fourth-order Runge–Kutta step for a two-component system.
#[inline]
pub fn rk4_step2<F: Fn(f64, [f64; 2]) -> [f64; 2]>(f: &F, t: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let add = |a: [f64; 2], s: f64, b: [f64; 2]| [a[0] + s * b[0], a[1] + s * b[1]];
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, add(y, 0.5 * h, k1));
    let k3 = f(t + 0.5 * h, add(y, 0.5 * h, k2));
    let k4 = f(t + h, add(y, h, k3));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-15).abs() < 1e-30);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r: Result<f64, ()> = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14);
        assert!((r.unwrap() - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn simpson_integrates_cubic_and_exp() {
        let v = adaptive_simpson(&|x: f64| x * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 4.0).abs() < 1e-12);
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-13);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn monotone_cubic_reproduces_quadratic_closely() {
        let xs: Vec<f64> = (0..=1000).map(|k| k as f64 * 1e-3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let p = MonotoneCubic::new(xs, ys, true).unwrap();
        let (v, d) = p.eval(0.5);
        assert!((v - 0.25).abs() < 1e-7);
        assert!((d - 1.0).abs() < 1e-5);
        let (v0, d0) = p.eval(0.0);
        assert_eq!((v0, d0), (0.0, 0.0));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let f = |_t: f64, y: f64| y;
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = 1.0;
            for k in 0..n {
                y = rk4_step(&f, k as f64 * h, y, h);
            }
            (y - 1f64.exp()).abs()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }
}
