use serde::{Deserialize, Serialize};

use super::{make_test_field, CaseKind, MultiplierCase, MultiplierError, ShapeParams, TestField};
use crate::geometry::{validate_domain, Domain, Point, RectangleSpec};
use crate::numeric::CompensatedSum;
use crate::operators::{BoundaryQuadrature, FirstOrder, Grid, NormMode};

/// `ε* = 1 − δ/(2q² + 17ℓ/8 − p)`, the worst case over the rectangle of the
/// constant in `0 ≤ αγ − δ(y/2ℓ)² ≤ ε αγ`.
pub fn epsilon_mult_bound(p: f64, q: f64, ell: f64, delta: f64) -> Result<f64, MultiplierError> {
    RectangleSpec { p, q, ell, delta }
        .validate()
        .map_err(|e| MultiplierError::InvalidParameter(e.to_string()))?;
    Ok(1.0 - delta / (2.0 * q * q + 17.0 * ell / 8.0 - p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseFailure {
    pub check: String,
    pub x: f64,
    pub y: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub cells: usize,
    /// Smallest margin per named check.
    pub margins: Vec<(String, f64)>,
    pub failures: Vec<PointwiseFailure>,
}

impl PointwiseReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

struct Checker {
    margins: Vec<(String, f64)>,
    failures: Vec<PointwiseFailure>,
}

impl Checker {
    /// Record `lhs ≥ rhs` with slack.
    fn ge(&mut self, name: &str, lhs: f64, rhs: f64, slack: f64, x: f64, y: f64) {
        let margin = lhs - rhs;
        match self.margins.iter_mut().find(|m| m.0 == name) {
            Some(m) => m.1 = m.1.min(margin),
            None => self.margins.push((name.to_string(), margin)),
        }
        if !(margin >= -slack) {
            self.failures.push(PointwiseFailure { check: name.to_string(), x, y, margin });
        }
    }
}

/// Pointwise lower bounds on `α`, `αγ − β²` and the `ε*` sandwich at every
/// masked cell centre.
pub fn check_pointwise_bounds(case: &MultiplierCase, domain: &Domain, grid: &Grid) -> PointwiseReport {
    let ell = case.ell;
    let delta = domain.rect.delta;
    let r = domain.rect;
    let eps_star = epsilon_mult_bound(r.p, r.q, r.ell, r.delta).unwrap_or(f64::NAN);
    let t3 = matches!(case.kind, CaseKind::Theorem3 | CaseKind::UniquenessT3);
    let mut ck = Checker { margins: Vec::new(), failures: Vec::new() };
    for p in grid.centers() {
        let (x, y) = (p[0], p[1]);
        let q = case.quad_coeffs(x, y);
        let slack = 1e-12 * (1.0 + q.alpha.abs());
        let sp = case.sonic.sigma_prime(y);
        ck.ge("lambda_min", q.lambda_min(), 0.0, slack, x, y);
        if t3 {
            let base = (y / (2.0 * ell)).powi(2);
            ck.ge("alpha_lower", q.alpha, delta * y / (2.0 * ell), slack, x, y);
            ck.ge("det_lower", q.det(), delta * base, slack, x, y);
            ck.ge("sandwich_lower", q.alpha * q.gamma - delta * base, 0.0, slack, x, y);
            ck.ge("sandwich_upper", eps_star * q.alpha * q.gamma, q.alpha * q.gamma - delta * base, slack, x, y);
        } else {
            ck.ge("alpha_lower", q.alpha, delta * sp / (2.0 * ell), slack, x, y);
            ck.ge("gamma_exact", -(q.gamma - sp / (2.0 * ell)).abs(), 0.0, slack, x, y);
            ck.ge("beta_zero", -q.beta.abs(), 0.0, 0.0, x, y);
        }
    }
    PointwiseReport { cells: grid.len(), margins: ck.margins, failures: ck.failures }
}

/// `I₂` on each boundary piece; on `Γ` split into the `a`-terms (`I₂₁`) and
/// the `b`-terms (`I₂₂`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTerms {
    pub c1: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub c2: f64,
}

impl BoundaryTerms {
    pub fn total(&self) -> f64 {
        self.c1 + self.gamma_a + self.gamma_b + self.c2
    }

    pub fn within(&self, tol: f64) -> bool {
        self.c1 >= -tol && self.c2 >= -tol && self.gamma_a.abs() <= tol && self.gamma_b.abs() <= tol
    }
}

/// `(∫ a-terms, ∫ b-terms)` of `I₂ = −∫Q dx + ∫P dy` along a polyline.
fn line_terms(case: &MultiplierCase, line: &[Point], h: f64, w: &dyn Fn(Point) -> (f64, f64)) -> (f64, f64) {
    let q = BoundaryQuadrature::new(&[line], h);
    let mut sa = CompensatedSum::new();
    let mut sb = CompensatedSum::new();
    for k in 0..q.len() {
        let p = q.points[k];
        let (w1, w2) = w(p);
        let m = case.matrix(p[0], p[1]);
        let s = p[0] - case.sonic.sigma(p[1]);
        let (tx, ty) = (q.tangents[k][0], q.tangents[k][1]);
        let ds = q.weights[k];
        let qa = m.a * w1 * w2;
        let pa = 0.5 * m.a * (s * w1 * w1 - w2 * w2);
        let qb = 0.5 * m.b * (w2 * w2 - s * w1 * w1);
        let pb = m.b * s * w1 * w2;
        sa.add(ds * (-qa * tx + pa * ty));
        sb.add(ds * (-qb * tx + pb * ty));
    }
    (sa.value(), sb.value())
}

/// Boundary terms of the multiplier identity for the trace `w`, with
/// polylines resampled at spacing `h`.
pub fn boundary_terms(
    case: &MultiplierCase,
    domain: &Domain,
    h: f64,
    w: &dyn Fn(Point) -> (f64, f64),
) -> BoundaryTerms {
    let b = &domain.boundary;
    let c1 = line_terms(case, &b.c1, h, w);
    let (gamma_a, gamma_b) = line_terms(case, &b.gamma, h, w);
    let c2 = line_terms(case, &b.c2, h, w);
    BoundaryTerms { c1: c1.0 + c1.1, gamma_a, gamma_b, c2: c2.0 + c2.1 }
}

/// Boundary terms of a sampled test field, traced by bilinear interpolation.
pub fn test_field_boundary_terms(case: &MultiplierCase, domain: &Domain, grid: &Grid, tf: &TestField) -> BoundaryTerms {
    boundary_terms(case, domain, grid.hx.min(grid.hy), &|p| tf.trace(p))
}

/// Direct quadrature of `(L*w, Mw)` next to `I₁ = ∫∫(αw₁² + 2βw₁w₂ + γw₂²)`
/// and `I₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormSplit {
    pub direct: f64,
    pub volume: f64,
    pub boundary: f64,
}

pub fn form_split(case: &MultiplierCase, domain: &Domain, grid: &Grid, tf: &TestField) -> FormSplit {
    let op = FirstOrder::lstar(grid, case.effective_k(), &case.sonic);
    let lw = op.apply(grid, &tf.field);
    let mut direct = CompensatedSum::new();
    let mut volume = CompensatedSum::new();
    for (k, (p, &wt)) in grid.centers().iter().zip(grid.weights()).enumerate() {
        let (w1, w2) = (tf.field.u1[k], tf.field.u2[k]);
        let (m1, m2) = case.matrix(p[0], p[1]).apply(w1, w2);
        direct.add(wt * (lw.u1[k] * m1 + lw.u2[k] * m2));
        let q = case.quad_coeffs(p[0], p[1]);
        volume.add(wt * (q.alpha * w1 * w1 + 2.0 * q.beta * w1 * w2 + q.gamma * w2 * w2));
    }
    FormSplit {
        direct: direct.value(),
        volume: volume.value(),
        boundary: test_field_boundary_terms(case, domain, grid, tf).total(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub case: CaseKind,
    #[serde(rename = "K")]
    pub k: f64,
    pub ell: f64,
    pub delta: f64,
    /// `inf λ_min([[α, β], [β, γ]]) / σ′` over masked cells.
    pub c1_form: f64,
    /// `sup ‖M‖₂` over masked cells.
    #[serde(rename = "C_M")]
    pub c_m: f64,
    pub k_cert: f64,
    pub eps_mult: f64,
    pub chi: f64,
    /// Closed-form lower bound on `I₁/‖w‖²_*` from the pointwise chain.
    pub analytic_bound: f64,
    pub certified: bool,
    pub boundary: BoundaryTerms,
    pub boundary_seed: u64,
    pub pointwise: PointwiseReport,
    pub failures: Vec<String>,
}

/// Sampled certification of `k‖w‖_* ≤ ‖L*w‖^*` with `k = c1_form / C_M`.
pub fn certify_lemma4(
    case: &MultiplierCase,
    domain: &Domain,
    grid: &Grid,
    seed: u64,
) -> Result<CertificationReport, MultiplierError> {
    let mut c1_form = f64::INFINITY;
    let mut c_m: f64 = 0.0;
    for p in grid.centers() {
        let sp = case.sonic.sigma_prime(p[1]);
        if sp > 0.0 {
            c1_form = c1_form.min(case.quad_coeffs(p[0], p[1]).lambda_min() / sp);
        }
        c_m = c_m.max(case.matrix(p[0], p[1]).spectral_norm());
    }
    let r = domain.rect;
    let eps_mult = epsilon_mult_bound(r.p, r.q, r.ell, r.delta)?;
    let chi = r.delta.min(1.0);
    let analytic_bound = match case.kind {
        CaseKind::Theorem2 | CaseKind::UniquenessT2 => chi / (2.0 * case.ell),
        // weight y = σ′/2
        CaseKind::Theorem3 | CaseKind::UniquenessT3 => chi * (1.0 - eps_mult.sqrt()) / (4.0 * case.ell),
    };

    let mut failures = Vec::new();
    let pair = |y: f64| {
        let m = case.matrix(0.0, y);
        (m.a, m.b)
    };
    let rep = validate_domain(domain, &pair);
    if !rep.passed() {
        failures.push(format!("domain validation failed for this multiplier (margin {})", rep.condition4_margin));
    }
    let pointwise = check_pointwise_bounds(case, domain, grid);
    if !pointwise.passed() {
        failures.push(format!("{} pointwise bound violations", pointwise.failures.len()));
    }
    if !(c1_form > 0.0) {
        failures.push(format!("c1_form = {c1_form} is not positive"));
    }
    let tf = make_test_field(domain, grid, &ShapeParams::default(), seed)?;
    let boundary = test_field_boundary_terms(case, domain, grid, &tf);
    let k_cert = c1_form / c_m;
    Ok(CertificationReport {
        case: case.kind,
        k: case.k,
        ell: case.ell,
        delta: r.delta,
        c1_form,
        c_m,
        k_cert,
        eps_mult,
        chi,
        analytic_bound,
        certified: failures.is_empty() && k_cert > 0.0,
        boundary,
        boundary_seed: seed,
        pointwise,
        failures,
    })
}

/// `‖L*w‖^* / ‖w‖_*` for a sampled test field.
pub fn coercivity_ratio(case: &MultiplierCase, grid: &Grid, tf: &TestField) -> Result<f64, MultiplierError> {
    let op = FirstOrder::lstar(grid, case.effective_k(), &case.sonic);
    let lw = op.apply(grid, &tf.field);
    let costar = NormMode::Costar.weights(grid, &case.sonic)?;
    let star = NormMode::Star.weights(grid, &case.sonic)?;
    let num = crate::operators::inner_with_weights(&costar, &lw, &lw).sqrt();
    let den = crate::operators::inner_with_weights(&star, &tf.field, &tf.field).sqrt();
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec, SonicCurve};

    #[test]
    fn epsilon_bound_examples() {
        let e = epsilon_mult_bound(-1.0, 1.0, 1.0, 0.1).unwrap();
        assert!((e - (1.0 - 0.1 / 5.125)).abs() < 1e-15);
        assert!((e - 0.980487804878).abs() < 1e-9);
        let e = epsilon_mult_bound(-1.0, 1.0, 1.0, 1.9).unwrap();
        assert!((e - 0.6292682926829268).abs() < 1e-12 && e > 0.0 && e < 1.0);
        let e = epsilon_mult_bound(-1.0, 1.0, 1.0, 1e-12).unwrap();
        assert!(e < 1.0 && 1.0 - e < 1e-12);
        assert!(epsilon_mult_bound(-1.0, 1.0, 1.0, 2.5).is_err());
    }

    #[test]
    fn theorem2_k0_certificate_beats_margin() {
        let d = build_domain(&DomainSpec::default()).unwrap();
        let g = Grid::for_domain(&d, 32, 32).unwrap();
        let case = MultiplierCase::new(CaseKind::Theorem2, 0.0, 1.0, SonicCurve::parabola()).unwrap();
        let rep = certify_lemma4(&case, &d, &g, 1).unwrap();
        assert!(rep.certified, "{:?}", rep.failures);
        assert!(rep.c1_form >= 0.05);
        assert!(rep.k_cert > 0.0);
        assert_eq!(rep.chi, 0.1);
    }

    #[test]
    fn zero_trace_gives_zero_boundary_terms() {
        let d = build_domain(&DomainSpec::default()).unwrap();
        let case = MultiplierCase::new(CaseKind::Theorem3, 1.0, 1.0, SonicCurve::parabola()).unwrap();
        let b = boundary_terms(&case, &d, 0.01, &|_| (0.0, 0.0));
        assert_eq!((b.c1, b.gamma_a, b.gamma_b, b.c2), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn c2_term_for_unit_w2_matches_closed_form() {
        let d = build_domain(&DomainSpec::default()).unwrap();
        let k = 0.25;
        let case = MultiplierCase::new(CaseKind::Theorem2, k, 1.0, SonicCurve::parabola()).unwrap();
        let b = boundary_terms(&case, &d, 1e-3, &|_| (0.0, 1.0));
        // −½∫(a dy + b dx) on the chord x = 0 from y₁ down to 0
        let y1 = d.boundary.c2[0][1];
        let exact = 0.5 * k * (y1 * y1 / 2.0 + y1.powi(4) / 12.0);
        assert!(b.c2 >= 0.0);
        assert!((b.c2 - exact).abs() < 1e-6 * exact, "{} vs {exact}", b.c2);
    }
}
