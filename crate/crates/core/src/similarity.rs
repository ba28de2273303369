//! Similarity solutions `ψ = x^ν F(y²/x)` for `σ(y) = y²`.
//!
//! `F` solves
//!
//! ```text
//! (1 − μ)[ν(ν−1)F − 2(ν−1)μF′ + μ²F″] + 2F′ + 4μF″ = 0
//! ```
//!
//! which is the `K = 0` scalar reduction `(x − y²)ψₓₓ + ψᵧᵧ = 0` written in
//! `μ = y²/x`.

use serde::{Deserialize, Serialize};

use crate::geometry::SonicCurve;
use crate::operators::{weighted_inner, Grid, GridField, NormMode, OperatorError};

/// Residual tolerance enforced by [`solve_f`].
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const DEFAULT_MU_B: f64 = 200.0;
const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum SimilarityError {
    #[error("singular point of the ODE at mu = {mu}")]
    Singular { mu: f64 },
    #[error("interval [{mu_a}, {mu_b}] passes within {margin} of singular point {singular}")]
    NearSingular { mu_a: f64, mu_b: f64, singular: f64, margin: f64 },
    #[error("invalid interval [{mu_a}, {mu_b}] or step {step}")]
    InvalidInterval { mu_a: f64, mu_b: f64, step: f64 },
    #[error("ODE residual {max} exceeds {tol}")]
    Residual { max: f64, tol: f64 },
    #[error("mu = {mu} below solved range starting at {lo}")]
    OutOfRange { mu: f64, lo: f64 },
    #[error("similarity variable needs x > 0, got {x}")]
    NonPositiveX { x: f64 },
    #[error("energy weight 2y requires the parabolic sonic curve")]
    NotParabola,
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Far-field behaviour seeded at `μ_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Branch {
    /// `F ∼ μ^ν`
    #[default]
    #[serde(rename = "mu_pow_nu")]
    MuPowNu,
    /// `F ∼ μ^{ν−1}`
    #[serde(rename = "mu_pow_nu_minus_1")]
    MuPowNuMinus1,
}

impl Branch {
    pub fn exponent(self, nu: f64) -> f64 {
        let (s1, s2) = indicial_exponents(nu);
        match self {
            Branch::MuPowNu => s1,
            Branch::MuPowNuMinus1 => s2,
        }
    }
}

/// Zeros of the leading coefficient `(1 − μ)μ² + 4μ`.
pub fn singular_points() -> [f64; 3] {
    let r = 17f64.sqrt();
    [0.0, 0.5 * (1.0 + r), 0.5 * (1.0 - r)]
}

fn leading(mu: f64) -> f64 {
    (1.0 - mu) * mu * mu + 4.0 * mu
}

/// `F″` from the ODE.
pub fn hypergeo_rhs(nu: f64, mu: f64, f: f64, fp: f64) -> Result<f64, SimilarityError> {
    let a = leading(mu);
    if a.abs() < SINGULAR_TOL {
        return Err(SimilarityError::Singular { mu });
    }
    Ok(-((1.0 - mu) * (nu * (nu - 1.0) * f - 2.0 * (nu - 1.0) * mu * fp) + 2.0 * fp) / a)
}

/// Roots of `s² − (2ν−1)s + ν(ν−1)`, larger first.
pub fn indicial_exponents(nu: f64) -> (f64, f64) {
    let b = 2.0 * nu - 1.0;
    let disc = (b * b - 4.0 * nu * (nu - 1.0)).max(0.0).sqrt();
    (0.5 * (b + disc), 0.5 * (b - disc))
}

/// Dense solution on a uniform `μ` grid plus the pure-power tail beyond `μ_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySolution {
    pub nu: f64,
    pub branch: Branch,
    pub exponent: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub step: f64,
    pub mu: Vec<f64>,
    pub f: Vec<f64>,
    pub fp: Vec<f64>,
    pub fpp: Vec<f64>,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub nu: f64,
    pub branch: Branch,
    pub exponent: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub step: f64,
    pub samples: usize,
    pub max_residual: f64,
    /// `F(μ_b)` is seeded as `μ_b^s`; the other branch leaks in at `O(1/μ_b)`.
    pub normalization: String,
}

impl SimilaritySolution {
    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            nu: self.nu,
            branch: self.branch,
            exponent: self.exponent,
            mu_a: self.mu_a,
            mu_b: self.mu_b,
            step: self.step,
            samples: self.mu.len(),
            max_residual: self.max_residual,
            normalization: format!("F(mu_b) = mu_b^{}", self.exponent),
        }
    }

    /// `(F, F′)` at `μ`. Quintic Hermite between nodes, `μ^s` past `μ_b`.
    pub fn eval(&self, mu: f64) -> Result<(f64, f64), SimilarityError> {
        if !(mu >= self.mu_a) {
            return Err(SimilarityError::OutOfRange { mu, lo: self.mu_a });
        }
        let s = self.exponent;
        if mu >= self.mu_b {
            return Ok((mu.powf(s), s * mu.powf(s - 1.0)));
        }
        let n = self.mu.len() - 1;
        let k = (((mu - self.mu_a) / self.step).floor() as usize).min(n - 1);
        let h = self.mu[k + 1] - self.mu[k];
        let t = (mu - self.mu[k]) / h;
        let (t2, t3, t4, t5) = (t * t, t * t * t, t * t * t * t, t * t * t * t * t);
        let v = [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5,
            0.5 * t3 - t4 + 0.5 * t5,
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
        ];
        let d = [
            -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4,
            1.5 * t2 - 4.0 * t3 + 2.5 * t4,
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
        ];
        let c = [
            self.f[k],
            h * self.fp[k],
            h * h * self.fpp[k],
            h * h * self.fpp[k + 1],
            h * self.fp[k + 1],
            self.f[k + 1],
        ];
        let f = v.iter().zip(&c).map(|(a, b)| a * b).sum();
        let fp = d.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / h;
        Ok((f, fp))
    }

    /// CSV rows `mu,F,Fp`.
    pub fn profile_csv(&self) -> String {
        let mut s = String::from("mu,F,Fp\n");
        for k in 0..self.mu.len() {
            s.push_str(&format!("{},{},{}\n", self.mu[k], self.f[k], self.fp[k]));
        }
        s
    }
}

/// RK4 from `μ_b` down to `μ_a` without the residual check.
pub fn integrate_f(
    nu: f64,
    branch: Branch,
    interval: (f64, f64),
    step: f64,
) -> Result<SimilaritySolution, SimilarityError> {
    let (mu_a, mu_b) = interval;
    if !(mu_a.is_finite() && mu_b.is_finite() && mu_a < mu_b && step > 0.0 && step < mu_b - mu_a) {
        return Err(SimilarityError::InvalidInterval { mu_a, mu_b, step });
    }
    let margin = 10.0 * step;
    for z in singular_points() {
        if z > mu_a - margin && z < mu_b + margin {
            return Err(SimilarityError::NearSingular { mu_a, mu_b, singular: z, margin });
        }
    }
    let n = ((mu_b - mu_a) / step).ceil() as usize;
    let h = (mu_b - mu_a) / n as f64;
    let s = branch.exponent(nu);

    let rhs = |mu: f64, y: [f64; 2]| -> [f64; 2] {
        // the interval is clear of singular points, so this cannot fail
        [y[1], hypergeo_rhs(nu, mu, y[0], y[1]).unwrap_or(f64::NAN)]
    };
    let mut f = vec![0.0; n + 1];
    let mut fp = vec![0.0; n + 1];
    let mut y = [mu_b.powf(s), s * mu_b.powf(s - 1.0)];
    f[n] = y[0];
    fp[n] = y[1];
    for k in (0..n).rev() {
        let mu = mu_a + (k + 1) as f64 * h;
        y = crate::numeric::rk4_step2(&rhs, mu, y, -h);
        f[k] = y[0];
        fp[k] = y[1];
    }
    let mu: Vec<f64> = (0..=n).map(|k| mu_a + k as f64 * h).collect();
    let fpp = (0..=n).map(|k| hypergeo_rhs(nu, mu[k], f[k], fp[k])).collect::<Result<Vec<_>, _>>()?;
    let mut sol = SimilaritySolution {
        nu,
        branch,
        exponent: s,
        mu_a,
        mu_b,
        step: h,
        mu,
        f,
        fp,
        fpp,
        max_residual: 0.0,
    };
    sol.max_residual = residuals(&sol).into_iter().fold(0.0, f64::max);
    Ok(sol)
}

/// `|(F′)′ − F″(μ, F, F′)|` at interior nodes, with `(F′)′` from the
/// five-point difference of the sampled `F′`.
pub fn residuals(sol: &SimilaritySolution) -> Vec<f64> {
    let n = sol.mu.len();
    if n < 5 {
        return Vec::new();
    }
    let h = sol.step;
    (2..n - 2)
        .map(|k| {
            let p = &sol.fp;
            let d = (p[k - 2] - 8.0 * p[k - 1] + 8.0 * p[k + 1] - p[k + 2]) / (12.0 * h);
            (d - sol.fpp[k]).abs()
        })
        .collect()
}

/// [`integrate_f`] followed by the residual check against [`RESIDUAL_TOL`].
pub fn solve_f(
    nu: f64,
    branch: Branch,
    interval: (f64, f64),
    step: f64,
) -> Result<SimilaritySolution, SimilarityError> {
    let sol = integrate_f(nu, branch, interval, step)?;
    if !(sol.max_residual <= RESIDUAL_TOL) {
        return Err(SimilarityError::Residual { max: sol.max_residual, tol: RESIDUAL_TOL });
    }
    Ok(sol)
}

/// `(ψ, u₁, u₂)` with `u = ∇ψ`.
pub fn eval_similarity(sol: &SimilaritySolution, x: f64, y: f64) -> Result<(f64, f64, f64), SimilarityError> {
    if !(x > 0.0) {
        return Err(SimilarityError::NonPositiveX { x });
    }
    let mu = y * y / x;
    let (f, fp) = sol.eval(mu)?;
    let nu = sol.nu;
    let xm = x.powf(nu - 1.0);
    Ok((x * xm * f, xm * (nu * f - mu * fp), 2.0 * y * xm * fp))
}

/// Samples `(x, y, ψ, u₁, u₂)` on an `nx × ny` lattice, dropping points
/// outside the solved range.
pub fn sample_field(
    sol: &SimilaritySolution,
    xr: (f64, f64),
    yr: (f64, f64),
    nx: usize,
    ny: usize,
) -> Vec<[f64; 5]> {
    let lin = |r: (f64, f64), n: usize, k: usize| {
        if n < 2 {
            r.0
        } else {
            r.0 + (r.1 - r.0) * k as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::new();
    for j in 0..ny {
        let y = lin(yr, ny, j);
        for i in 0..nx {
            let x = lin(xr, nx, i);
            if let Ok((p, u1, u2)) = eval_similarity(sol, x, y) {
                out.push([x, y, p, u1, u2]);
            }
        }
    }
    out
}

pub fn field_csv(rows: &[[f64; 5]]) -> String {
    let mut s = String::from("x,y,psi,u1,u2\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r[0], r[1], r[2], r[3], r[4]));
    }
    s
}

/// Grid field `u = ∇ψ` at the cell centres.
pub fn grid_field(sol: &SimilaritySolution, grid: &Grid) -> Result<GridField, SimilarityError> {
    let mut u = GridField::zeros(grid.len());
    for (k, p) in grid.centers().iter().enumerate() {
        let (_, u1, u2) = eval_similarity(sol, p[0], p[1])?;
        u.u1[k] = u1;
        u.u2[k] = u2;
    }
    Ok(u)
}

/// `E_U = ‖u‖²_* = 2∫ y(u₁² + u₂²)`.
pub fn energy_u(grid: &Grid, u: &GridField, sonic: &SonicCurve) -> Result<f64, SimilarityError> {
    if !sonic.is_parabola() {
        return Err(SimilarityError::NotParabola);
    }
    Ok(weighted_inner(grid, u, u, NormMode::Star, sonic)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rhs_trivial_cases() {
        for mu in [0.5, 3.0, 10.0] {
            assert_eq!(hypergeo_rhs(0.0, mu, 1.0, 0.0).unwrap(), 0.0);
            assert_eq!(hypergeo_rhs(1.0, mu, 1.0, 0.0).unwrap(), 0.0);
        }
        let r = 0.5 * (1.0 + 17f64.sqrt());
        assert!(matches!(hypergeo_rhs(0.25, r, 1.0, 1.0), Err(SimilarityError::Singular { .. })));
        assert!(hypergeo_rhs(0.25, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn indicial_roots() {
        assert_eq!(indicial_exponents(0.25), (0.25, -0.75));
        assert_eq!(indicial_exponents(0.0), (0.0, -1.0));
        assert_eq!(indicial_exponents(1.25), (1.25, 0.25));
        for nu in [-1.3, 0.25, 0.7, 2.0] {
            let (a, b) = indicial_exponents(nu);
            for s in [a, b] {
                assert!((s * s - (2.0 * nu - 1.0) * s + nu * (nu - 1.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quintic_hermite_is_exact_on_quintics() {
        let p = |m: f64| 1.0 + m - 0.3 * m * m + 0.02 * m.powi(3) - 1e-3 * m.powi(4) + 2e-5 * m.powi(5);
        let dp = |m: f64| 1.0 - 0.6 * m + 0.06 * m * m - 4e-3 * m.powi(3) + 1e-4 * m.powi(4);
        let ddp = |m: f64| -0.6 + 0.12 * m - 12e-3 * m * m + 4e-4 * m.powi(3);
        let mu: Vec<f64> = (0..=4).map(|k| 5.0 + 2.5 * k as f64).collect();
        let sol = SimilaritySolution {
            nu: 0.25,
            branch: Branch::MuPowNu,
            exponent: 0.25,
            mu_a: 5.0,
            mu_b: 15.0,
            step: 2.5,
            f: mu.iter().map(|&m| p(m)).collect(),
            fp: mu.iter().map(|&m| dp(m)).collect(),
            fpp: mu.iter().map(|&m| ddp(m)).collect(),
            mu,
            max_residual: 0.0,
        };
        for m in [5.0, 6.1, 9.99, 12.4, 14.999] {
            let (f, fp) = sol.eval(m).unwrap();
            assert_relative_eq!(f, p(m), max_relative = 1e-12);
            assert_relative_eq!(fp, dp(m), max_relative = 1e-10);
        }
    }

    #[test]
    fn far_field_branch_is_consistent() {
        let sol = solve_f(0.25, Branch::MuPowNu, (5.0, 200.0), 0.01).unwrap();
        for (k, &m) in sol.mu.iter().enumerate().filter(|(_, &m)| m >= 100.0) {
            assert!((sol.f[k] / m.powf(0.25) - 1.0).abs() < 0.01);
        }
        assert!(sol.max_residual <= RESIDUAL_TOL);
    }

    #[test]
    fn constant_solution_at_nu_one() {
        let sol = solve_f(1.0, Branch::MuPowNuMinus1, (5.0, 200.0), 0.05).unwrap();
        assert_eq!(sol.exponent, 0.0);
        assert!(sol.max_residual <= 1e-10);
        assert!(sol.f.iter().all(|&f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn residual_is_fourth_order() {
        let r1 = integrate_f(0.25, Branch::MuPowNu, (10.0, 200.0), 0.1).unwrap().max_residual;
        let r2 = integrate_f(0.25, Branch::MuPowNu, (10.0, 200.0), 0.05).unwrap().max_residual;
        let ratio = r1 / r2;
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio} ({r1}, {r2})");
    }

    #[test]
    fn interval_must_clear_singular_points() {
        let r = 0.5 * (1.0 + 17f64.sqrt());
        assert!(matches!(
            solve_f(0.25, Branch::MuPowNu, (r + 0.05, 50.0), 0.01),
            Err(SimilarityError::NearSingular { .. })
        ));
        assert!(solve_f(0.25, Branch::MuPowNu, (r + 0.2, 50.0), 0.0025).is_ok());
        assert!(matches!(
            solve_f(0.25, Branch::MuPowNu, (0.05, 2.0), 0.01),
            Err(SimilarityError::NearSingular { .. })
        ));
    }

    #[test]
    fn closed_forms() {
        let pure = SimilaritySolution {
            nu: 0.25,
            branch: Branch::MuPowNu,
            exponent: 0.25,
            mu_a: 1e6,
            mu_b: 1e6 + 1.0,
            step: 1.0,
            mu: vec![1e6, 1e6 + 1.0],
            f: vec![0.0; 2],
            fp: vec![0.0; 2],
            fpp: vec![0.0; 2],
            max_residual: 0.0,
        };
        // far past mu_b the tail is the pure power
        let (x, y) = (1e-8, 0.7);
        let (psi, u1, u2) = eval_similarity(&pure, x, y).unwrap();
        assert_relative_eq!(psi, y.sqrt(), max_relative = 1e-12);
        assert!(u1.abs() < 1e-12);
        assert_relative_eq!(u2, 0.5 / y.sqrt(), max_relative = 1e-12);

        let one = solve_f(1.0, Branch::MuPowNuMinus1, (5.0, 50.0), 0.05).unwrap();
        let (psi, u1, u2) = eval_similarity(&one, 0.1, 1.0).unwrap();
        assert_relative_eq!(psi, 0.1, max_relative = 1e-12);
        assert_relative_eq!(u1, 1.0, max_relative = 1e-12);
        assert!(u2.abs() < 1e-12);
        assert!(matches!(eval_similarity(&one, 0.5, 1.0), Err(SimilarityError::OutOfRange { .. })));
        assert!(eval_similarity(&one, -0.5, 1.0).is_err());
    }

    fn psi_at(sol: &SimilaritySolution, x: f64, y: f64) -> f64 {
        eval_similarity(sol, x, y).unwrap().0
    }

    #[test]
    fn assembled_psi_solves_scalar_equation() {
        let sol = solve_f(0.25, Branch::MuPowNu, (5.0, 200.0), 0.01).unwrap();
        let h = 2e-3;
        let d2 = |g: &dyn Fn(f64) -> f64| {
            (-g(2.0 * h) + 16.0 * g(h) - 30.0 * g(0.0) + 16.0 * g(-h) - g(-2.0 * h)) / (12.0 * h * h)
        };
        for &(x, y) in &[(0.05, 0.8), (0.02, 0.5), (0.1, 1.0), (0.01, 0.9)] {
            let p = |dx: f64, dy: f64| psi_at(&sol, x + dx, y + dy);
            let pxx = d2(&|t| p(t, 0.0));
            let pyy = d2(&|t| p(0.0, t));
            let res = (x - y * y) * pxx + pyy;
            assert!(res.abs() <= 1e-6, "residual {res} at ({x}, {y})");

            let (_, u1, u2) = eval_similarity(&sol, x, y).unwrap();
            let d1 = |g: &dyn Fn(f64) -> f64| (g(-2.0 * h) - 8.0 * g(-h) + 8.0 * g(h) - g(2.0 * h)) / (12.0 * h);
            let fx = d1(&|t| p(t, 0.0));
            let fy = d1(&|t| p(0.0, t));
            assert!((fx - u1).abs() < 1e-5 * (1.0 + u1.abs()));
            assert!((fy - u2).abs() < 1e-5 * (1.0 + u2.abs()));
        }
    }

    fn sector(mu_a: f64, n: usize) -> Vec<crate::geometry::Point> {
        let mut poly = vec![[0.0, 0.0]];
        for k in 1..=n {
            let y = k as f64 / n as f64;
            poly.push([y * y / mu_a, y]);
        }
        poly.push([0.0, 1.0]);
        poly
    }

    #[test]
    fn energy_of_limiting_profile_is_half_area() {
        let poly = sector(5.0, 200);
        let grid = Grid::from_polygon(&poly, 48, 48).unwrap();
        let u = GridField::from_fn(&grid, |_, y| (0.0, 0.5 / y.sqrt()));
        let e = energy_u(&grid, &u, &SonicCurve::parabola()).unwrap();
        let area = crate::geometry::polygon::signed_area(&poly).abs();
        assert_relative_eq!(e, 0.5 * (area - grid.lost_area()), max_relative = 1e-12);
        assert_eq!(energy_u(&grid, &GridField::zeros(grid.len()), &SonicCurve::parabola()).unwrap(), 0.0);
        let other = SonicCurve::power(3.0, 1.0).unwrap();
        assert!(matches!(energy_u(&grid, &u, &other), Err(SimilarityError::NotParabola)));
    }

    #[test]
    fn energy_converges_near_origin() {
        let sol = solve_f(0.25, Branch::MuPowNu, (5.0, 200.0), 0.01).unwrap();
        let poly = sector(5.0, 400);
        let sonic = SonicCurve::parabola();
        let e: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| {
                let grid = Grid::from_polygon(&poly, n, n).unwrap();
                energy_u(&grid, &grid_field(&sol, &grid).unwrap(), &sonic).unwrap()
            })
            .collect();
        assert!(((e[2] - e[1]) / e[2]).abs() < 0.01, "{e:?}");
    }

    #[test]
    fn density_tends_to_half_near_axis() {
        let sol = solve_f(0.25, Branch::MuPowNu, (5.0, 200.0), 0.01).unwrap();
        // mu = y²/x stays beyond mu_b, inside the far-field tail
        for y in [1e-2, 1e-3, 1e-4] {
            let x = y * y / 1e3;
            let (_, u1, u2) = eval_similarity(&sol, x, y).unwrap();
            assert!((2.0 * y * (u1 * u1 + u2 * u2) - 0.5).abs() < 1e-6);
        }
    }
}
