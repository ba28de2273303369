//! Weighted least-squares solves for `Lu = f` with tangential data on the
//! noncharacteristic boundary.
//!
//! The objective is
//!
//! ```text
//! J(u) = ‖Lu − f‖^{*2} + λ_b Σ ωₖ (u·t − g)²
//! ```
//!
//! over the nodes of a trapezoid rule on `C₁ ∪ C₂` (and on `Γ` when the
//! manufactured trace is matched there too).

mod manufactured;
mod weak;

pub use manufactured::{manufactured_case, ManufacturedCase, MANUFACTURED_NAMES};
pub use weak::{verify_weak_identity, verify_weak_identity_with, WeakIdentityReport};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{Domain, SonicCurve};
use crate::multiplier::MultiplierError;
use crate::numeric::CompensatedSum;
use crate::operators::sparse::{Csr, CsrBuilder};
use crate::operators::{BoundaryQuadrature, FirstOrder, Grid, GridField, NormMode, OperatorError};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_PENALTY_SCALE: f64 = 10.0;

pub type VectorFn = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("unknown manufactured case {0:?}")]
    UnknownCase(String),
    #[error("penalty weight must be positive, got {0}")]
    InvalidPenalty(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("data f has non-finite costar norm")]
    InvalidData,
    #[error("non-finite value at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Multiplier(#[from] MultiplierError),
}

/// What the boundary penalty pulls `u·t` towards.
#[derive(Clone, Default)]
pub enum BoundaryMode {
    /// `u·t = 0` on `∂Ω∖Γ`.
    #[default]
    Homogeneous,
    /// `u·t = g·t` on `∂Ω∖Γ`, and on `Γ` as well when `gamma_penalty` is set.
    TraceMatch { g: VectorFn, gamma_penalty: bool },
}

impl fmt::Debug for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryMode::Homogeneous => write!(f, "Homogeneous"),
            BoundaryMode::TraceMatch { gamma_penalty, .. } => {
                f.debug_struct("TraceMatch").field("gamma_penalty", gamma_penalty).finish_non_exhaustive()
            }
        }
    }
}

impl BoundaryMode {
    pub fn trace_match(g: VectorFn) -> Self {
        BoundaryMode::TraceMatch { g, gamma_penalty: true }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundaryMode::Homogeneous => "homogeneous",
            BoundaryMode::TraceMatch { .. } => "trace_match",
        }
    }
}

/// `λ_b = 10/h`.
pub fn default_lambda(grid: &Grid) -> f64 {
    DEFAULT_PENALTY_SCALE / grid.hx.min(grid.hy)
}

/// `20·√(unknowns)`.
pub fn default_maxit(grid: &Grid) -> usize {
    (20.0 * ((2 * grid.len()) as f64).sqrt()).ceil() as usize
}

#[derive(Debug, Clone)]
pub struct LeastSquaresProblem {
    pub domain: Domain,
    pub grid: Grid,
    pub k: f64,
    pub f: GridField,
    pub lambda_b: f64,
    pub mode: BoundaryMode,
    l: Csr,
    lt: Csr,
    costar: Vec<f64>,
    quad: BoundaryQuadrature,
    trace: Csr,
    trace_t: Csr,
    g: Vec<f64>,
}

impl LeastSquaresProblem {
    pub fn new(
        domain: Domain,
        grid: Grid,
        k: f64,
        f: GridField,
        lambda_b: Option<f64>,
        mode: BoundaryMode,
    ) -> Result<Self, SolverError> {
        f.check(&grid)?;
        let lambda_b = lambda_b.unwrap_or_else(|| default_lambda(&grid));
        if !(lambda_b > 0.0 && lambda_b.is_finite()) {
            return Err(SolverError::InvalidPenalty(lambda_b));
        }
        let costar = NormMode::Costar.weights(&grid, &domain.sonic)?;
        if !crate::operators::inner_with_weights(&costar, &f, &f).is_finite() {
            return Err(SolverError::InvalidData);
        }
        let l = FirstOrder::l(&grid, k, &domain.sonic).assemble(&grid);
        let lt = l.transpose();

        let b = &domain.boundary;
        let mut lines: Vec<&[crate::geometry::Point]> = vec![&b.c1, &b.c2];
        if let BoundaryMode::TraceMatch { gamma_penalty: true, .. } = mode {
            lines.push(&b.gamma);
        }
        let quad = BoundaryQuadrature::new(&lines, grid.hx.min(grid.hy));
        let n = grid.len();
        let mut bld = CsrBuilder::new(2 * n);
        for (p, t) in quad.points.iter().zip(&quad.tangents) {
            let w = grid.interp_weights(*p);
            for &(c, v) in &w {
                bld.push(c, v * t[0]);
            }
            for &(c, v) in &w {
                bld.push(n + c, v * t[1]);
            }
            bld.end_row();
        }
        let trace = bld.finish();
        let trace_t = trace.transpose();
        let g = match &mode {
            BoundaryMode::Homogeneous => vec![0.0; quad.len()],
            BoundaryMode::TraceMatch { g, .. } => quad
                .points
                .iter()
                .zip(&quad.tangents)
                .map(|(p, t)| {
                    let (a, b) = g(p[0], p[1]);
                    a * t[0] + b * t[1]
                })
                .collect(),
        };
        Ok(Self { domain, grid, k, f, lambda_b, mode, l, lt, costar, quad, trace, trace_t, g })
    }

    pub fn sonic(&self) -> &SonicCurve {
        &self.domain.sonic
    }

    pub fn unknowns(&self) -> usize {
        2 * self.grid.len()
    }

    pub fn quadrature(&self) -> &BoundaryQuadrature {
        &self.quad
    }

    /// Tangential data `g` at the quadrature nodes.
    pub fn trace_data(&self) -> &[f64] {
        &self.g
    }

    /// Residual and penalty parts of `J`.
    pub fn objective_parts(&self, u: &GridField) -> Result<(f64, f64), SolverError> {
        u.check(&self.grid)?;
        let v = u.stacked();
        let f = self.f.stacked();
        let lu = self.l.matvec(&v);
        let n = self.grid.len();
        let mut r = CompensatedSum::new();
        for (k, (a, b)) in lu.iter().zip(&f).enumerate() {
            let d = a - b;
            r.add(self.costar[k % n] * d * d);
        }
        let tu = self.trace.matvec(&v);
        let mut p = CompensatedSum::new();
        for k in 0..tu.len() {
            let d = tu[k] - self.g[k];
            p.add(self.quad.weights[k] * d * d);
        }
        Ok((r.value(), self.lambda_b * p.value()))
    }

    /// Normal operator `LᵀW_cL + λ_b TᵀW_bT` on stacked vectors.
    pub fn normal_apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut lv = self.l.matvec(v);
        for (k, x) in lv.iter_mut().enumerate() {
            *x *= self.costar[k % n];
        }
        let mut out = self.lt.matvec(&lv);
        let mut tv = self.trace.matvec(v);
        for (k, x) in tv.iter_mut().enumerate() {
            *x *= self.lambda_b * self.quad.weights[k];
        }
        let tt = self.trace_t.matvec(&tv);
        for (o, t) in out.iter_mut().zip(&tt) {
            *o += t;
        }
        out
    }

    /// `LᵀW_c f + λ_b TᵀW_b g`.
    pub fn normal_rhs(&self) -> Vec<f64> {
        let n = self.grid.len();
        let wf: Vec<f64> = self.f.stacked().iter().enumerate().map(|(k, v)| v * self.costar[k % n]).collect();
        let mut out = self.lt.matvec(&wf);
        let wg: Vec<f64> = self.g.iter().zip(&self.quad.weights).map(|(g, w)| self.lambda_b * w * g).collect();
        for (o, t) in out.iter_mut().zip(self.trace_t.matvec(&wg)) {
            *o += t;
        }
        out
    }

    fn normal_diagonal(&self) -> Vec<f64> {
        let n = self.grid.len();
        let wc: Vec<f64> = (0..2 * n).map(|k| self.costar[k % n]).collect();
        let wb: Vec<f64> = self.quad.weights.iter().map(|w| self.lambda_b * w).collect();
        let a = self.l.weighted_column_squares(&wc);
        let b = self.trace.weighted_column_squares(&wb);
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    }
}

/// `J(u)`.
pub fn objective(u: &GridField, prob: &LeastSquaresProblem) -> Result<f64, SolverError> {
    let (r, p) = prob.objective_parts(u)?;
    Ok(r + p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub objective: f64,
    /// `J` after every iteration, starting with the initial guess.
    pub objective_history: Vec<f64>,
    /// `‖Lu − f‖^*`
    pub residual_costar: f64,
    pub boundary_penalty: f64,
    pub relative_gradient: f64,
    pub converged: bool,
}

impl SolveStats {
    pub fn monotone(&self) -> bool {
        self.objective_history.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Minimise `J` from `u = 0`.
pub fn solve_least_squares(
    prob: &LeastSquaresProblem,
    tol: f64,
    maxit: usize,
) -> Result<(GridField, SolveStats), SolverError> {
    solve_from(prob, &GridField::zeros(prob.grid.len()), tol, maxit)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = CompensatedSum::new();
    for (x, y) in a.iter().zip(b) {
        s.add(x * y);
    }
    s.value()
}

/// Jacobi-preconditioned conjugate gradients on the normal equations,
/// stopped once `‖∇J‖ ≤ tol·‖∇J(0)‖`.
pub fn solve_from(
    prob: &LeastSquaresProblem,
    x0: &GridField,
    tol: f64,
    maxit: usize,
) -> Result<(GridField, SolveStats), SolverError> {
    if !(tol > 0.0) {
        return Err(SolverError::InvalidTolerance(tol));
    }
    x0.check(&prob.grid)?;
    let b = prob.normal_rhs();
    let mut x = x0.stacked();
    let ax = prob.normal_apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let inv: Vec<f64> = prob.normal_diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect();
    let bnorm = dot(&b, &b).sqrt();
    let scale = if bnorm > 0.0 { bnorm } else { dot(&r, &r).sqrt() };

    let mut j = objective(x0, prob)?;
    let mut history = vec![j];
    let mut rel = if scale > 0.0 { dot(&r, &r).sqrt() / scale } else { 0.0 };
    let mut converged = rel <= tol;
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut it = 0;
    while !converged && it < maxit {
        let ap = prob.normal_apply(&p);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || !rz.is_finite() {
            return Err(SolverError::NonFinite { iteration: it });
        }
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for k in 0..x.len() {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        it += 1;
        // J(x + αp) = J(x) − α rᵀz for the CG step length
        j -= alpha * rz;
        history.push(j.max(0.0).min(history[history.len() - 1]));
        rel = dot(&r, &r).sqrt() / scale;
        if !rel.is_finite() {
            return Err(SolverError::NonFinite { iteration: it });
        }
        if rel <= tol {
            converged = true;
            break;
        }
        for k in 0..z.len() {
            z[k] = r[k] * inv[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..p.len() {
            p[k] = z[k] + beta * p[k];
        }
    }
    let u = GridField::from_stacked(&x);
    let (res, pen) = prob.objective_parts(&u)?;
    Ok((
        u,
        SolveStats {
            iterations: it,
            objective: res + pen,
            objective_history: history,
            residual_costar: res.sqrt(),
            boundary_penalty: pen,
            relative_gradient: rel,
            converged,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};

    fn setup(n: usize) -> (Domain, Grid) {
        let d = build_domain(&DomainSpec::default()).unwrap();
        let g = Grid::for_domain(&d, n, n).unwrap();
        (d, g)
    }

    #[test]
    fn zero_data_gives_zero_in_zero_iterations() {
        let (d, g) = setup(24);
        let n = g.len();
        let prob = LeastSquaresProblem::new(d, g, 0.5, GridField::zeros(n), None, BoundaryMode::Homogeneous).unwrap();
        let (u, st) = solve_least_squares(&prob, 1e-10, 100).unwrap();
        assert_eq!(st.iterations, 0);
        assert!(st.converged);
        assert!(u.u1.iter().chain(&u.u2).all(|&v| v == 0.0));
        assert_eq!(objective(&u, &prob).unwrap(), 0.0);
    }

    #[test]
    fn penalty_is_linear_in_lambda() {
        let (d, g) = setup(24);
        let m = manufactured_case("poly1", 0.5, &d.sonic).unwrap();
        let f = m.f_field(&g);
        let u = GridField::from_fn(&g, |x, y| (x.sin(), y * y));
        let p1 = LeastSquaresProblem::new(d.clone(), g.clone(), 0.5, f.clone(), Some(3.0), m.mode()).unwrap();
        let p2 = LeastSquaresProblem::new(d, g, 0.5, f, Some(6.0), m.mode()).unwrap();
        let (r1, b1) = p1.objective_parts(&u).unwrap();
        let j1 = objective(&u, &p1).unwrap();
        let j2 = objective(&u, &p2).unwrap();
        assert!(((j2 - j1) - b1).abs() <= 1e-12 * j2);
        assert!(r1 >= 0.0 && b1 > 0.0);
    }

    #[test]
    fn normal_operator_matches_objective_gradient() {
        let (d, g) = setup(20);
        let m = manufactured_case("poly2", 0.25, &d.sonic).unwrap();
        let f = m.f_field(&g);
        let prob = LeastSquaresProblem::new(d, g.clone(), 0.25, f, None, m.mode()).unwrap();
        // J(u) = uᵀAu − 2bᵀu + J(0)
        let u = GridField::from_fn(&g, |x, y| (x * y + 0.3, x - y));
        let v = u.stacked();
        let quad = dot(&v, &prob.normal_apply(&v)) - 2.0 * dot(&prob.normal_rhs(), &v);
        let j0 = objective(&GridField::zeros(g.len()), &prob).unwrap();
        let j = objective(&u, &prob).unwrap();
        assert!((j - (quad + j0)).abs() <= 1e-9 * j.abs().max(1.0), "{j} vs {}", quad + j0);
    }

    #[test]
    fn minimiser_beats_sampled_exact_solution() {
        let (d, g) = setup(24);
        let m = manufactured_case("poly1", 0.5, &d.sonic).unwrap();
        let prob = LeastSquaresProblem::new(d, g.clone(), 0.5, m.f_field(&g), None, m.mode()).unwrap();
        let (u, st) = solve_least_squares(&prob, 1e-12, 20000).unwrap();
        assert!(st.converged, "{st:?}");
        assert!(st.monotone());
        let je = objective(&m.u_field(&g), &prob).unwrap();
        assert!(st.objective <= je * (1.0 + 1e-9), "{} > {je}", st.objective);
        assert!(objective(&u, &prob).unwrap() <= je * (1.0 + 1e-9));
    }

    #[test]
    fn nan_data_is_rejected() {
        let (d, g) = setup(16);
        let mut f = GridField::zeros(g.len());
        f.u1[3] = f64::NAN;
        assert!(matches!(
            LeastSquaresProblem::new(d, g, 0.5, f, None, BoundaryMode::Homogeneous),
            Err(SolverError::InvalidData)
        ));
    }
}
