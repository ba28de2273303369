use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Config;
use crate::geometry::{build_domain, Domain};
use crate::multiplier::{
    certify_lemma4, coercivity_ratio, make_test_field, test_field_boundary_terms, MultiplierCase, ShapeParams,
    TestField,
};
use crate::operators::{green_identity_gap, riesz_recover, weighted_norm, Grid, GridField, NormMode};
use crate::similarity::{integrate_f, RESIDUAL_TOL};
use crate::solver::{manufactured_case, solve_least_squares, verify_weak_identity, LeastSquaresProblem};

/// `C` in the `C·h²` bounds on the boundary terms.
pub const VERIFY_BOUNDARY_C: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Measured quantity; `null` when the check could not run.
    pub value: Option<f64>,
    pub threshold: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

fn result(name: &str, passed: bool, value: f64, threshold: impl Into<String>, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: passed && value.is_finite(),
        value: value.is_finite().then_some(value),
        threshold: threshold.into(),
        detail,
    }
}

fn failed(name: &str, threshold: &str, err: impl std::fmt::Display) -> CheckResult {
    CheckResult { name: name.into(), passed: false, value: None, threshold: threshold.into(), detail: err.to_string() }
}

fn polynomial_u(x: f64, y: f64) -> (f64, f64) {
    (x * x + y, x * y - y * y)
}

fn polynomial_w(x: f64, y: f64) -> (f64, f64) {
    (y * y - x, x * y + x * x)
}

/// Green identity, certification, coercivity, boundary terms, weak-identity
/// defects, similarity residual, characteristic residual and the Riesz map,
/// all deterministic in the config.
pub fn run_checks(cfg: &Config, log: impl Fn(&str)) -> Verdict {
    let mut checks = Vec::new();
    log("building domain");
    match build_domain(&cfg.domain_spec()) {
        Ok(domain) => domain_checks(cfg, &domain, &log, &mut checks),
        Err(e) => {
            for (name, thr) in [
                ("characteristic", "<= 1e-6"),
                ("green_identity", "ratio in [3, 5]"),
                ("certification", "certified"),
                ("coercivity", ">= 1"),
                ("boundary_terms", "<= 1"),
                ("weak_identity", "ratio in [3, 5]"),
                ("riesz", "<= 1e-13"),
            ] {
                checks.push(failed(name, thr, &e));
            }
        }
    }
    log("similarity");
    let s = cfg.similarity;
    checks.push(match integrate_f(s.nu, s.branch, (s.mu_a, s.mu_b), s.step) {
        Ok(sol) => result(
            "similarity",
            sol.max_residual <= RESIDUAL_TOL,
            sol.max_residual,
            format!("<= {RESIDUAL_TOL:e}"),
            format!("nu = {}, mu in [{}, {}], step {}", s.nu, s.mu_a, s.mu_b, s.step),
        ),
        Err(e) => failed("similarity", "<= 1e-8", e),
    });
    Verdict { passed: checks.iter().all(|c| c.passed), checks }
}

fn domain_checks(cfg: &Config, domain: &Domain, log: &dyn Fn(&str), checks: &mut Vec<CheckResult>) {
    let rep = &domain.report;
    checks.push(result(
        "characteristic",
        rep.gamma_hermite_simpson_residual <= 1e-6 && rep.gamma_radicand_increasing,
        rep.gamma_hermite_simpson_residual,
        "<= 1e-6 and sigma - x increasing",
        format!("sigma - x increasing along gamma: {}", rep.gamma_radicand_increasing),
    ));

    let g = cfg.grid;
    let grids = (Grid::for_domain(domain, g.nx, g.ny), Grid::for_domain(domain, 2 * g.nx, 2 * g.ny));
    let (grid, fine) = match grids {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            checks.push(failed("green_identity", "ratio in [3, 5]", e));
            return;
        }
    };

    log("green identity");
    let gaps = [&grid, &fine].map(|gr| green_identity_gap(gr, domain, cfg.k, polynomial_u, polynomial_w).gap);
    let ratio = gaps[0] / gaps[1];
    checks.push(result(
        "green_identity",
        (3.0..=5.0).contains(&ratio),
        ratio,
        "ratio in [3, 5]",
        format!("gap {:e} on {}x{}, {:e} on {}x{}", gaps[0], g.nx, g.ny, gaps[1], 2 * g.nx, 2 * g.ny),
    ));

    log("certification");
    let case = match MultiplierCase::new(cfg.case, cfg.k, domain.rect.ell, domain.sonic.clone()) {
        Ok(c) => c,
        Err(e) => {
            checks.push(failed("certification", "certified", e));
            return;
        }
    };
    let cert = match certify_lemma4(&case, domain, &grid, cfg.seed) {
        Ok(c) => c,
        Err(e) => {
            checks.push(failed("certification", "certified", e));
            return;
        }
    };
    checks.push(result(
        "certification",
        cert.certified,
        cert.k_cert,
        "certified with k_cert > 0",
        if cert.failures.is_empty() { format!("{} K = {}", case.kind.name(), cfg.k) } else { cert.failures.join("; ") },
    ));

    let fields: Result<Vec<TestField>, _> = (0..cfg.verify.fields as u64)
        .map(|i| make_test_field(domain, &grid, &ShapeParams::default(), cfg.seed.wrapping_add(i)))
        .collect();
    let fields = match fields {
        Ok(f) => f,
        Err(e) => {
            checks.push(failed("coercivity", ">= 1", e));
            return;
        }
    };
    let h = grid.h();
    let floor = cert.k_cert * (1.0 - 10.0 * h);
    let margin = fields
        .iter()
        .map(|tf| coercivity_ratio(&case, &grid, tf).map(|r| r / floor))
        .try_fold(f64::INFINITY, |m, r| r.map(|r| m.min(r)));
    checks.push(match margin {
        Ok(m) => result(
            "coercivity",
            m >= 1.0,
            m,
            ">= 1",
            format!("min ratio / (k_cert (1 - 10h)) over {} fields", fields.len()),
        ),
        Err(e) => failed("coercivity", ">= 1", e),
    });

    let tol = VERIFY_BOUNDARY_C * h * h;
    let worst = fields
        .iter()
        .map(|tf| {
            let bt = test_field_boundary_terms(&case, domain, &grid, tf);
            let sign = (-bt.c1).max(-bt.c2).max(0.0);
            sign.max(bt.gamma_a.abs()).max(bt.gamma_b.abs()) / tol
        })
        .fold(0.0, f64::max);
    checks.push(result(
        "boundary_terms",
        worst <= 1.0,
        worst,
        "<= 1",
        format!("max of -I2|C1, -I2|C2, |I21|, |I22| in units of C h^2 = {tol:e}"),
    ));

    log("weak identity");
    checks.push(weak_identity_check(cfg, domain));

    log("riesz");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gap: f64 = 0.0;
    for _ in 0..20 {
        let mut hf = GridField::zeros(grid.len());
        for v in hf.u1.iter_mut().chain(hf.u2.iter_mut()) {
            *v = rng.gen_range(-1.0..=1.0);
        }
        let norms = riesz_recover(&grid, &hf, &domain.sonic).and_then(|u| {
            Ok((
                weighted_norm(&grid, &u, NormMode::Star, &domain.sonic)?,
                weighted_norm(&grid, &hf, NormMode::Costar, &domain.sonic)?,
            ))
        });
        match norms {
            Ok((a, b)) => gap = gap.max((a - b).abs() / b),
            Err(e) => {
                checks.push(failed("riesz", "<= 1e-13", e));
                return;
            }
        }
    }
    checks.push(result("riesz", gap <= 1e-13, gap, "<= 1e-13", "relative isometry gap over 20 fields".into()));
}

fn weak_identity_check(cfg: &Config, domain: &Domain) -> CheckResult {
    let name = "weak_identity";
    let thr = "ratio in [3, 5]";
    let k = cfg.verify.solver_k;
    let n = cfg.verify.solver_grid;
    let mut defects = Vec::new();
    for m in [n, 2 * n] {
        let run = || -> Result<(f64, bool), String> {
            let grid = Grid::for_domain(domain, m, m).map_err(|e| e.to_string())?;
            let mc = manufactured_case("poly1", k, &domain.sonic).map_err(|e| e.to_string())?;
            let prob = LeastSquaresProblem::new(domain.clone(), grid.clone(), k, mc.f_field(&grid), None, mc.mode())
                .map_err(|e| e.to_string())?;
            let (u, stats) = solve_least_squares(&prob, 1e-12, 50_000).map_err(|e| e.to_string())?;
            let rep = verify_weak_identity(&u, &prob, cfg.verify.fields.max(1), cfg.seed).map_err(|e| e.to_string())?;
            Ok((rep.max_defect, stats.converged))
        };
        match run() {
            Ok((d, true)) => defects.push(d),
            Ok((_, false)) => return failed(name, thr, format!("solver did not converge on {m}x{m}")),
            Err(e) => return failed(name, thr, e),
        }
    }
    let ratio = defects[0] / defects[1];
    result(
        name,
        (3.0..=5.0).contains(&ratio),
        ratio,
        thr,
        format!("poly1, K = {k}: max defect {:e} on {n}x{n}, {:e} on {m}x{m}", defects[0], defects[1], m = 2 * n),
    )
}
