use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::polygon::{boundary_distance, contains, first_self_intersection, signed_area};
use super::{
    hermite_simpson_residual, intersect_c1_sonic, midpoint_slope_residual, trace_characteristic,
    C1Spec, CharacteristicTrace, GeometryError, Point, RectangleSpec, SonicCurve, Stop,
};
use crate::multiplier::{pair_ab, CaseKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    /// `Γ` traced to `x = 0`, closed by the chord to the origin.
    #[default]
    Omega,
    /// `Γ` traced to `x = x_λ < 0`, closed by a vertical drop `λ₁` and the
    /// axis segment `λ₂`.
    OmegaPrime { x_lambda: f64 },
}

fn default_trace_step() -> f64 {
    1e-3
}

fn default_c1_samples() -> usize {
    257
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(default = "SonicCurve::parabola")]
    pub sonic: SonicCurve,
    #[serde(default)]
    pub rect: RectangleSpec,
    #[serde(default)]
    pub c1: C1Spec,
    /// Multiplier pair used for the `C₁` sign condition.
    #[serde(default)]
    pub case: CaseKind,
    #[serde(default)]
    pub k: f64,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default = "default_trace_step")]
    pub trace_step: f64,
    #[serde(default = "default_c1_samples")]
    pub c1_samples: usize,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            sonic: SonicCurve::parabola(),
            rect: RectangleSpec::default(),
            c1: C1Spec::default(),
            case: CaseKind::Theorem2,
            k: 0.0,
            variant: Variant::Omega,
            trace_step: default_trace_step(),
            c1_samples: default_c1_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub condition4_ok: bool,
    /// `min −(a·dy/dx + b)` over samples of `C₁`.
    pub condition4_margin: f64,
    pub condition4_worst_x: f64,
    pub c2_monotone: bool,
    pub gamma_radicand_increasing: bool,
    pub gamma_midpoint_residual: f64,
    pub gamma_hermite_simpson_residual: f64,
    pub counterclockwise: bool,
    pub signed_area: f64,
    pub simple: bool,
    pub closure_gap: f64,
    pub closed: bool,
    pub sup_x: f64,
    pub sup_x_ok: bool,
    /// Choices the construction made on its own.
    pub defaults: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.condition4_ok
            && self.c2_monotone
            && self.gamma_radicand_increasing
            && self.counterclockwise
            && self.simple
            && self.closed
            && self.sup_x_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub c1: Vec<Point>,
    pub gamma: Vec<Point>,
    /// Characteristic parameter `r = √(σ − x)` at the `gamma` vertices.
    pub gamma_params: Vec<f64>,
    pub c2: Vec<Point>,
}

/// Assembled domain. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub sonic: SonicCurve,
    pub rect: RectangleSpec,
    pub c1_spec: C1Spec,
    pub case: CaseKind,
    pub k: f64,
    pub variant: Variant,
    pub x0: f64,
    pub y0: f64,
    pub boundary: Boundary,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    Elliptic,
    Hyperbolic,
    Sonic,
    Outside,
}

impl Domain {
    /// Closed counterclockwise vertex list `C₁ → Γ → C₂`.
    pub fn polygon(&self) -> Vec<Point> {
        let b = &self.boundary;
        let mut v = b.c1.clone();
        v.extend_from_slice(&b.gamma[1..]);
        if b.c2.len() > 2 {
            v.extend_from_slice(&b.c2[1..b.c2.len() - 1]);
        }
        v
    }

    /// Boundary pieces other than `Γ`, where the tangential data live.
    pub fn data_boundary(&self) -> [&[Point]; 2] {
        [&self.boundary.c1, &self.boundary.c2]
    }

    pub fn gamma_trace(&self) -> CharacteristicTrace {
        CharacteristicTrace {
            points: self.boundary.gamma.clone(),
            params: self.boundary.gamma_params.clone(),
        }
    }

    /// `(a(y), b(y))` of the multiplier pair the domain was built for.
    pub fn pair(&self) -> impl Fn(f64) -> (f64, f64) + '_ {
        move |y| pair_ab(self.case, self.k, self.rect.ell, &self.sonic, y)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let v = serde_json::to_value(self).expect("domain serializes");
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }

    /// Vertices as `segment,x,y` CSV rows.
    pub fn boundary_csv(&self) -> String {
        let mut s = String::from("segment,x,y\n");
        for (name, line) in [("c1", &self.boundary.c1), ("gamma", &self.boundary.gamma), ("c2", &self.boundary.c2)] {
            for p in line {
                s.push_str(&format!("{name},{},{}\n", p[0], p[1]));
            }
        }
        s
    }
}

fn sample_c1(c1: &C1Spec, x0: f64, n: usize) -> Vec<Point> {
    let n = n.max(2);
    // cluster towards the origin when the curve is steep there
    let p = if c1.m < 1.0 { 1.0 / c1.m } else { 1.0 };
    let mut v: Vec<Point> = (0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            let x = x0 * t.powf(p);
            [x, c1.y(x)]
        })
        .collect();
    v[0] = [0.0, 0.0];
    v
}

pub fn build_domain(spec: &DomainSpec) -> Result<Domain, GeometryError> {
    spec.rect.validate()?;
    spec.c1.validate()?;
    let rect = spec.rect;
    let sonic = spec.sonic.clone();
    let (_, y0) = intersect_c1_sonic(&spec.c1, &sonic, rect.ell)?;
    // on the sonic curve exactly, so σ − x starts at zero along Γ
    let x0 = sonic.sigma(y0);
    let c1 = {
        let mut c = sample_c1(&spec.c1, x0, spec.c1_samples);
        *c.last_mut().unwrap() = [x0, y0];
        c
    };
    let guard = 10.0 * rect.q;
    let (stop, x_end) = match spec.variant {
        Variant::Omega => (Stop::XReaches(0.0), 0.0),
        Variant::OmegaPrime { x_lambda } => {
            if !(x_lambda < 0.0 && x_lambda > rect.p) {
                return Err(GeometryError::InvalidVariant(format!(
                    "x_lambda must lie in (p, 0), got {x_lambda}"
                )));
            }
            (Stop::XReaches(x_lambda), x_lambda)
        }
    };
    let trace = trace_characteristic(&sonic, [x0, y0], stop, spec.trace_step, guard)?;
    let [_, y1] = *trace.points.last().unwrap();
    let c2 = match spec.variant {
        Variant::Omega => vec![[x_end, y1], [0.0, 0.0]],
        Variant::OmegaPrime { .. } => vec![[x_end, y1], [x_end, 0.0], [0.0, 0.0]],
    };

    let mut domain = Domain {
        sonic,
        rect,
        c1_spec: spec.c1,
        case: spec.case,
        k: spec.k,
        variant: spec.variant,
        x0,
        y0,
        boundary: Boundary { c1, gamma: trace.points, gamma_params: trace.params, c2 },
        report: ValidationReport::empty(),
    };
    let pair = |y: f64| pair_ab(spec.case, spec.k, rect.ell, &domain.sonic, y);
    let mut report = validate_domain(&domain, &pair);
    report.defaults = match spec.variant {
        Variant::Omega => vec![
            "gamma traced until x = 0".into(),
            "c2 is the straight chord from the gamma endpoint to the origin".into(),
        ],
        Variant::OmegaPrime { x_lambda } => vec![format!(
            "gamma traced until x = {x_lambda}; c2 is the vertical drop to y = 0 and the axis segment to the origin"
        )],
    };

    if !report.c2_monotone {
        let (segment, dx, dy) = c2_violation(&domain.boundary.c2).unwrap_or((0, 0.0, 0.0));
        return Err(GeometryError::C2NotMonotone { segment, dx, dy });
    }
    if let Some((first, second)) = first_self_intersection(&domain.polygon()) {
        return Err(GeometryError::SelfIntersection { first, second });
    }
    if !report.sup_x_ok {
        return Err(GeometryError::ExceedsRectangle { sup_x: report.sup_x, limit: rect.ell - rect.delta });
    }
    if !report.condition4_ok {
        return Err(GeometryError::Condition4 { x: report.condition4_worst_x, margin: report.condition4_margin });
    }
    domain.report = report;
    Ok(domain)
}

impl ValidationReport {
    fn empty() -> Self {
        Self {
            condition4_ok: false,
            condition4_margin: f64::NAN,
            condition4_worst_x: f64::NAN,
            c2_monotone: false,
            gamma_radicand_increasing: false,
            gamma_midpoint_residual: f64::NAN,
            gamma_hermite_simpson_residual: f64::NAN,
            counterclockwise: false,
            signed_area: f64::NAN,
            simple: false,
            closure_gap: f64::NAN,
            closed: false,
            sup_x: f64::NAN,
            sup_x_ok: false,
            defaults: Vec::new(),
        }
    }
}

fn c2_violation(c2: &[Point]) -> Option<(usize, f64, f64)> {
    c2.windows(2).enumerate().find_map(|(k, w)| {
        let dx = w[1][0] - w[0][0];
        let dy = w[1][1] - w[0][1];
        (dy > 0.0 || dx < 0.0).then_some((k, dx, dy))
    })
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Run every geometric check and collect margins; never fails.
pub fn validate_domain(domain: &Domain, pair: &dyn Fn(f64) -> (f64, f64)) -> ValidationReport {
    let b = &domain.boundary;
    let ell = domain.rect.ell;
    let c1 = &domain.c1_spec;

    // sign condition on C1 at vertices and chord midpoints
    let mut margin = f64::INFINITY;
    let mut worst_x = f64::NAN;
    let mut xs: Vec<f64> = Vec::with_capacity(2 * b.c1.len());
    for w in b.c1.windows(2) {
        xs.push(0.5 * (w[0][0] + w[1][0]));
        xs.push(w[1][0]);
    }
    for x in xs.into_iter().filter(|&x| x > 0.0) {
        let (a, bb) = pair(c1.y(x));
        let m = -(a * c1.slope(x) + bb);
        if m < margin {
            margin = m;
            worst_x = x;
        }
    }

    let sonic = &domain.sonic;
    let radicand: Vec<f64> = b.gamma.iter().map(|p| sonic.sigma(p[1]) - p[0]).collect();
    let gamma_ok = radicand.iter().all(|&v| v >= -1e-12 * ell)
        && radicand.windows(2).all(|w| w[1] > w[0]);

    let poly = domain.polygon();
    let area = signed_area(&poly);
    let gap = [
        dist(*b.c1.last().unwrap(), b.gamma[0]),
        dist(*b.gamma.last().unwrap(), b.c2[0]),
        dist(*b.c2.last().unwrap(), b.c1[0]),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let sup_x = poly.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let trace = domain.gamma_trace();

    ValidationReport {
        condition4_ok: margin > 0.0,
        condition4_margin: margin,
        condition4_worst_x: worst_x,
        c2_monotone: c2_violation(&b.c2).is_none(),
        gamma_radicand_increasing: gamma_ok,
        gamma_midpoint_residual: midpoint_slope_residual(sonic, &b.gamma),
        gamma_hermite_simpson_residual: if trace.params.len() == trace.points.len() {
            hermite_simpson_residual(sonic, &trace)
        } else {
            f64::NAN
        },
        counterclockwise: area > 0.0,
        signed_area: area,
        simple: first_self_intersection(&poly).is_none(),
        closure_gap: gap,
        closed: gap <= 1e-12 * ell,
        sup_x,
        sup_x_ok: sup_x <= ell - domain.rect.delta + 1e-12 * ell,
        defaults: domain.report.defaults.clone(),
    }
}

/// Type of the point with respect to the closed domain.
pub fn classify_point(domain: &Domain, x: f64, y: f64) -> PointClass {
    let ell = domain.rect.ell;
    let poly = domain.polygon();
    if !(contains(&poly, [x, y]) || boundary_distance(&poly, [x, y]) <= 1e-12 * ell) {
        return PointClass::Outside;
    }
    let s = x - domain.sonic.sigma(y);
    if s.abs() <= 1e-12 * ell {
        PointClass::Sonic
    } else if s > 0.0 {
        PointClass::Elliptic
    } else {
        PointClass::Hyperbolic
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_domain() -> Domain {
        build_domain(&DomainSpec::default()).unwrap()
    }

    #[test]
    fn default_domain_is_valid() {
        let d = default_domain();
        assert!(d.report.passed(), "{:?}", d.report);
        assert!((d.x0 - 0.25).abs() <= 1e-12);
        let c2 = &d.boundary.c2;
        assert_eq!(c2.len(), 2);
        assert_eq!(c2[0][0], 0.0);
        assert_eq!(c2[1], [0.0, 0.0]);
        assert!(c2[0][1] > d.y0);
        // a ≡ 0 and b ≤ −1 give a margin of at least one
        assert!(d.report.condition4_margin >= 1.0);
        assert!(d.report.signed_area > 0.0);
    }

    #[test]
    fn omega_prime_has_lambda_segments() {
        let spec = DomainSpec { variant: Variant::OmegaPrime { x_lambda: -0.05 }, ..Default::default() };
        let d = build_domain(&spec).unwrap();
        assert!(d.report.passed());
        let c2 = &d.boundary.c2;
        assert_eq!(c2.len(), 3);
        assert_eq!(c2[0][0], -0.05);
        assert_eq!(c2[1], [-0.05, 0.0]);
        assert_eq!(c2[2], [0.0, 0.0]);
        assert_eq!(d.boundary.gamma.last().unwrap()[0], -0.05);
    }

    #[test]
    fn degenerate_rectangle_is_rejected() {
        let spec = DomainSpec {
            rect: RectangleSpec { p: -1.0, q: 2.0, ell: 1.0, delta: 2.0 },
            ..Default::default()
        };
        assert!(matches!(build_domain(&spec), Err(GeometryError::InvalidRectangle(_))));
    }

    #[test]
    fn intersection_beyond_margin_is_rejected() {
        let spec = DomainSpec { c1: C1Spec { eps: 1.0, m: 1.0 }, ..Default::default() };
        assert!(matches!(build_domain(&spec), Err(GeometryError::ExceedsRectangle { .. })));
    }

    #[test]
    fn classification_examples() {
        let d = default_domain();
        assert_eq!(classify_point(&d, 1.0, 0.5), PointClass::Outside);
        assert_eq!(classify_point(&d, 0.15, 0.35), PointClass::Elliptic);
        assert_eq!(classify_point(&d, 0.1, 0.5), PointClass::Hyperbolic);
        assert_eq!(classify_point(&d, d.x0, d.y0), PointClass::Sonic);
        for p in &d.boundary.c1[1..d.boundary.c1.len() - 1] {
            assert_eq!(classify_point(&d, p[0], p[1]), PointClass::Elliptic);
        }
    }

    #[test]
    fn clockwise_input_fails_orientation() {
        let d = default_domain();
        let mut r = d.clone();
        let rev = |v: &Vec<Point>| v.iter().rev().copied().collect::<Vec<_>>();
        r.boundary.c1 = rev(&d.boundary.c2);
        r.boundary.gamma = rev(&d.boundary.gamma);
        r.boundary.gamma_params = d.boundary.gamma_params.iter().rev().copied().collect();
        r.boundary.c2 = rev(&d.boundary.c1);
        let rep = validate_domain(&r, &d.pair());
        assert!(!rep.counterclockwise);
        assert!(rep.signed_area < 0.0);
    }

    #[test]
    fn csv_and_json_exports() {
        let d = default_domain();
        let csv = d.boundary_csv();
        assert!(csv.starts_with("segment,x,y\n"));
        let js = serde_json::to_value(&d).unwrap();
        assert!(js["boundary"]["gamma"].is_array());
        assert_eq!(js["x0"].as_f64().unwrap(), d.x0);
        let back: Domain = serde_json::from_value(js).unwrap();
        assert_eq!(back, d);
        assert_eq!(d.digest().len(), 64);
    }
}
