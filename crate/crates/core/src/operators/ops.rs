use serde::{Deserialize, Serialize};

use super::sparse::{Csr, CsrBuilder};
use super::{BoundaryQuadrature, BoxField, Grid, GridField, OperatorError};
use crate::geometry::{Domain, Point, SonicCurve};
use crate::numeric::CompensatedSum;

/// `(Au)₁ = (x − σ)∂ₓu₁ + κu₁ + ∂ᵧu₂`, `(Au)₂ = ∂ᵧu₁ − ∂ₓu₂`.
/// `L` has `κ = K`, `L*` has `κ = 1 − K`.
#[derive(Debug, Clone)]
pub struct FirstOrder {
    c: Vec<f64>,
    zero: f64,
    dxt: Csr,
    dyt: Csr,
}

impl FirstOrder {
    pub fn new(grid: &Grid, zero: f64, sonic: &SonicCurve) -> Self {
        let c = grid.centers().iter().map(|p| p[0] - sonic.sigma(p[1])).collect();
        Self { c, zero, dxt: grid.dx().transpose(), dyt: grid.dy().transpose() }
    }

    pub fn l(grid: &Grid, k: f64, sonic: &SonicCurve) -> Self {
        Self::new(grid, k, sonic)
    }

    pub fn lstar(grid: &Grid, k: f64, sonic: &SonicCurve) -> Self {
        Self::new(grid, 1.0 - k, sonic)
    }

    pub fn apply(&self, grid: &Grid, u: &GridField) -> GridField {
        let n = grid.len();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut out = GridField::zeros(n);
        grid.dx().matvec_into(&u.u1, &mut a);
        grid.dy().matvec_into(&u.u2, &mut b);
        for k in 0..n {
            out.u1[k] = self.c[k] * a[k] + self.zero * u.u1[k] + b[k];
        }
        grid.dy().matvec_into(&u.u1, &mut a);
        grid.dx().matvec_into(&u.u2, &mut b);
        for k in 0..n {
            out.u2[k] = a[k] - b[k];
        }
        out
    }

    /// Exact transpose of [`FirstOrder::apply`] in the Euclidean pairing.
    pub fn apply_transpose(&self, grid: &Grid, r: &GridField) -> GridField {
        let n = grid.len();
        let cr: Vec<f64> = self.c.iter().zip(&r.u1).map(|(c, v)| c * v).collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut out = GridField::zeros(n);
        self.dxt.matvec_into(&cr, &mut a);
        self.dyt.matvec_into(&r.u2, &mut b);
        for k in 0..n {
            out.u1[k] = a[k] + self.zero * r.u1[k] + b[k];
        }
        self.dyt.matvec_into(&r.u1, &mut a);
        self.dxt.matvec_into(&r.u2, &mut b);
        for k in 0..n {
            out.u2[k] = a[k] - b[k];
        }
        out
    }

    /// Explicit `2N × 2N` matrix acting on stacked `(u₁, u₂)`.
    pub fn assemble(&self, grid: &Grid) -> Csr {
        let n = grid.len();
        let mut bld = CsrBuilder::new(2 * n);
        let mut row: Vec<(usize, f64)> = Vec::new();
        let flush = |row: &mut Vec<(usize, f64)>, bld: &mut CsrBuilder| {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let (c, mut v) = row[k];
                k += 1;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                bld.push(c, v);
            }
            bld.end_row();
            row.clear();
        };
        for k in 0..n {
            row.extend(grid.dx().row(k).map(|(c, v)| (c, self.c[k] * v)));
            row.push((k, self.zero));
            row.extend(grid.dy().row(k).map(|(c, v)| (n + c, v)));
            flush(&mut row, &mut bld);
        }
        for k in 0..n {
            row.extend(grid.dy().row(k));
            row.extend(grid.dx().row(k).map(|(c, v)| (n + c, -v)));
            flush(&mut row, &mut bld);
        }
        bld.finish()
    }
}

pub fn apply_l(grid: &Grid, u: &GridField, k: f64, sonic: &SonicCurve) -> Result<GridField, OperatorError> {
    u.check(grid)?;
    Ok(FirstOrder::l(grid, k, sonic).apply(grid, u))
}

pub fn apply_lstar(grid: &Grid, w: &GridField, k: f64, sonic: &SonicCurve) -> Result<GridField, OperatorError> {
    w.check(grid)?;
    Ok(FirstOrder::lstar(grid, k, sonic).apply(grid, w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// weight `σ′(y)`
    Star,
    /// weight `1/σ′(y)`
    Costar,
    Plain,
}

impl NormMode {
    /// Quadrature weights including the cell areas.
    pub fn weights(self, grid: &Grid, sonic: &SonicCurve) -> Result<Vec<f64>, OperatorError> {
        grid.centers()
            .iter()
            .zip(grid.weights())
            .map(|(p, &w)| {
                let sp = sonic.sigma_prime(p[1]);
                match self {
                    NormMode::Plain => Ok(w),
                    NormMode::Star => Ok(w * sp),
                    NormMode::Costar if sp > 0.0 => Ok(w / sp),
                    NormMode::Costar => Err(OperatorError::Degenerate { y: p[1] }),
                }
            })
            .collect()
    }
}

pub fn inner_with_weights(weights: &[f64], v: &GridField, z: &GridField) -> f64 {
    let mut s = CompensatedSum::new();
    for k in 0..weights.len() {
        s.add(weights[k] * (v.u1[k] * z.u1[k] + v.u2[k] * z.u2[k]));
    }
    s.value()
}

pub fn weighted_inner(
    grid: &Grid,
    v: &GridField,
    z: &GridField,
    mode: NormMode,
    sonic: &SonicCurve,
) -> Result<f64, OperatorError> {
    v.check(grid)?;
    z.check(grid)?;
    Ok(inner_with_weights(&mode.weights(grid, sonic)?, v, z))
}

pub fn weighted_norm(grid: &Grid, v: &GridField, mode: NormMode, sonic: &SonicCurve) -> Result<f64, OperatorError> {
    Ok(weighted_inner(grid, v, v, mode, sonic)?.max(0.0).sqrt())
}

/// `(w, f) + (L*w, u)` in the plain pairing.
pub fn weak_residual(
    grid: &Grid,
    u: &GridField,
    w: &GridField,
    f: &GridField,
    k: f64,
    sonic: &SonicCurve,
) -> Result<f64, OperatorError> {
    let lw = apply_lstar(grid, w, k, sonic)?;
    Ok(weighted_inner(grid, w, f, NormMode::Plain, sonic)? + weighted_inner(grid, &lw, u, NormMode::Plain, sonic)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenGap {
    /// `(u, L*w) + (Lu, w)`
    pub volume: f64,
    /// `∮(w₁u₂ + w₂u₁)dx − ∮{(x − σ)w₁u₁ − w₂u₂}dy`
    pub boundary: f64,
    pub gap: f64,
}

/// Integration-by-parts defect for closed-form `u`, `w`.
pub fn green_identity_gap<U, W>(grid: &Grid, domain: &Domain, k: f64, u: U, w: W) -> GreenGap
where
    U: Fn(f64, f64) -> (f64, f64),
    W: Fn(f64, f64) -> (f64, f64),
{
    let sonic = &domain.sonic;
    let ub = BoxField::sample(grid, &u);
    let wb = BoxField::sample(grid, &w);
    let (uf, wf) = (ub.masked(grid), wb.masked(grid));
    let lu = FirstOrder::l(grid, k, sonic).apply(grid, &uf);
    let lw = FirstOrder::lstar(grid, k, sonic).apply(grid, &wf);
    let plain = grid.weights();
    let volume = inner_with_weights(plain, &uf, &lw) + inner_with_weights(plain, &lu, &wf);

    let mut closed: Vec<Point> = domain.polygon();
    closed.push(closed[0]);
    let q = BoundaryQuadrature::new(&[&closed], grid.hx.min(grid.hy));
    let mut fdx = Vec::with_capacity(q.len());
    let mut fdy = Vec::with_capacity(q.len());
    for &p in &q.points {
        let (u1, u2) = ub.eval(p);
        let (w1, w2) = wb.eval(p);
        fdx.push(w1 * u2 + w2 * u1);
        fdy.push((p[0] - sonic.sigma(p[1])) * w1 * u1 - w2 * u2);
    }
    let boundary = q.integrate_dxdy(&fdx).0 - q.integrate_dxdy(&fdy).1;
    GreenGap { volume, boundary, gap: (volume + boundary).abs() }
}

/// `u = −h/σ′(y)` componentwise.
pub fn riesz_recover(grid: &Grid, h: &GridField, sonic: &SonicCurve) -> Result<GridField, OperatorError> {
    h.check(grid)?;
    let mut out = GridField::zeros(grid.len());
    for (k, p) in grid.centers().iter().enumerate() {
        let sp = sonic.sigma_prime(p[1]);
        if !(sp > 0.0) {
            return Err(OperatorError::Degenerate { y: p[1] });
        }
        out.u1[k] = -h.u1[k] / sp;
        out.u2[k] = -h.u2[k] / sp;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};

    fn unit_square(n: usize) -> Grid {
        Grid::rectangle(0.0, 1.0, 0.0, 1.0, n, n).unwrap()
    }

    #[test]
    fn constants_are_annihilated() {
        let g = unit_square(8);
        let s = SonicCurve::parabola();
        let u = GridField::from_fn(&g, |_, _| (3.0, -2.0));
        let lu = apply_l(&g, &u, 0.0, &s).unwrap();
        assert!(lu.u1.iter().chain(&lu.u2).all(|v| v.abs() < 1e-12));
        let lw = apply_lstar(&g, &u, 1.0, &s).unwrap();
        assert!(lw.u1.iter().chain(&lw.u2).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn polynomial_fields_are_differentiated_exactly() {
        let g = unit_square(16);
        let s = SonicCurve::parabola();
        let k = 0.5;
        let u = GridField::from_fn(&g, |x, y| (2.0 * x + y, x + 3.0 * y * y));
        let lu = apply_l(&g, &u, k, &s).unwrap();
        for (i, p) in g.centers().iter().enumerate() {
            let (x, y) = (p[0], p[1]);
            let f1 = 2.0 * (x - y * y) + k * (2.0 * x + y) + 6.0 * y;
            assert!((lu.u1[i] - f1).abs() < 1e-10);
            assert!(lu.u2[i].abs() < 1e-10);
        }
        let u = GridField::from_fn(&g, |x, _| (x, 0.0));
        let lu = apply_l(&g, &u, k, &s).unwrap();
        for (i, p) in g.centers().iter().enumerate() {
            assert!((lu.u1[i] - (p[0] - p[1] * p[1] + k * p[0])).abs() < 1e-10);
        }
        let w = GridField::from_fn(&g, |_, y| (y, 0.0));
        let lw = apply_lstar(&g, &w, 0.0, &s).unwrap();
        for (i, p) in g.centers().iter().enumerate() {
            assert!((lw.u1[i] - p[1]).abs() < 1e-10);
            assert!((lw.u2[i] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn assembled_matrix_matches_matrix_free_apply() {
        let d = build_domain(&DomainSpec::default()).unwrap();
        let g = Grid::for_domain(&d, 20, 30).unwrap();
        let op = FirstOrder::l(&g, 0.3, &d.sonic);
        let u = GridField::from_fn(&g, |x, y| ((3.0 * x).sin() + y, x * y - y.cos()));
        let a = op.assemble(&g);
        let direct = op.apply(&g, &u).stacked();
        let via = a.matvec(&u.stacked());
        for (p, q) in direct.iter().zip(&via) {
            assert!((p - q).abs() < 1e-10);
        }
        let r = GridField::from_fn(&g, |x, y| (x - y, x + 2.0 * y));
        let t1 = op.apply_transpose(&g, &r).stacked();
        let t2 = a.transpose().matvec(&r.stacked());
        for (p, q) in t1.iter().zip(&t2) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn norm_examples_on_unit_square() {
        let s = SonicCurve::parabola();
        for n in [16, 32] {
            let g = unit_square(n);
            let v = GridField::from_fn(&g, |_, _| (1.0, 0.0));
            let star = weighted_norm(&g, &v, NormMode::Star, &s).unwrap();
            assert!((star - 1.0).abs() < 1e-12);
            let v = GridField::from_fn(&g, |_, y| (y, 0.0));
            let costar = weighted_norm(&g, &v, NormMode::Costar, &s).unwrap();
            assert!((costar - 0.5).abs() < 1e-12);
            let z = GridField::zeros(g.len());
            assert_eq!(weighted_norm(&g, &z, NormMode::Star, &s).unwrap(), 0.0);
            assert_eq!(weighted_norm(&g, &z, NormMode::Costar, &s).unwrap(), 0.0);
        }
    }

    #[test]
    fn plain_inner_of_orthogonal_components_vanishes() {
        let g = unit_square(8);
        let s = SonicCurve::parabola();
        let v = GridField::from_fn(&g, |_, _| (1.0, 0.0));
        let z = GridField::from_fn(&g, |_, _| (0.0, 1.0));
        assert_eq!(weighted_inner(&g, &v, &z, NormMode::Plain, &s).unwrap(), 0.0);
        let bad = GridField::zeros(3);
        assert!(matches!(
            weighted_inner(&g, &v, &bad, NormMode::Plain, &s),
            Err(OperatorError::GridMismatch { .. })
        ));
    }

    #[test]
    fn riesz_examples() {
        let g = unit_square(8);
        let s = SonicCurve::parabola();
        let h = GridField::from_fn(&g, |_, y| (2.0 * y, 0.0));
        let u = riesz_recover(&g, &h, &s).unwrap();
        assert!(u.u1.iter().all(|&v| (v + 1.0).abs() < 1e-15));
        assert!(u.u2.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn green_gap_vanishes_for_zero_fields() {
        let d = build_domain(&DomainSpec::default()).unwrap();
        let g = Grid::for_domain(&d, 16, 16).unwrap();
        let r = green_identity_gap(&g, &d, 0.0, |_, _| (0.0, 0.0), |_, _| (0.0, 0.0));
        assert_eq!(r.gap, 0.0);
    }
}
