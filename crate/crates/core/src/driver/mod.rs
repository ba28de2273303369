//! Command-line orchestration: config loading, the five subcommands and their
//! artifacts. Every artifact carries the config hash.

mod config;
mod verify;

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

pub use config::{
    load_config, parse_config, Config, DataKind, DataSpec, GridSize, LoadedConfig, SampleWindow, SimilarityConfig,
    VerifyConfig, CONFIG_VERSION,
};
pub use verify::{run_checks, CheckResult, Verdict, VERIFY_BOUNDARY_C};

use crate::geometry::{build_domain, Domain};
use crate::multiplier::{
    certify_lemma4, coercivity_ratio, make_test_field, MultiplierCase, MultiplierError, ShapeParams,
};
use crate::operators::{weighted_norm, Grid, GridField, NormMode};
use crate::similarity::{field_csv, indicial_exponents, integrate_f, sample_field, RESIDUAL_TOL};
use crate::solver::{
    default_maxit, manufactured_case, solve_least_squares, BoundaryMode, LeastSquaresProblem, SolverError,
    DEFAULT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Domain,
    Certify,
    Similarity,
    Solve,
    Verify,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Domain => "domain",
            Subcommand::Certify => "certify",
            Subcommand::Similarity => "similarity",
            Subcommand::Solve => "solve",
            Subcommand::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub config: PathBuf,
    pub out: PathBuf,
    /// Overrides the config `seed`.
    pub seed: Option<u64>,
    pub verbosity: u8,
}

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error("{}:{line}:{column}: {message}", path.display())]
    ConfigParse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("data file {}: {message}", path.display())]
    Data { path: PathBuf, message: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Numerical(String),
}

/// Finished run: `Valid` maps to exit 0, `Invalid` to exit 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Valid,
    Invalid,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Valid
        } else {
            Outcome::Invalid
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Valid => 0,
            Outcome::Invalid => 2,
        }
    }
}

/// Exit code: 0 success, 2 validation failure, 1 hard error.
pub fn run(rc: &RunConfig) -> i32 {
    match execute(rc) {
        Ok(outcome) => {
            if outcome == Outcome::Invalid {
                eprintln!("{}: validation failed; reports written to {}", rc.subcommand.name(), rc.out.display());
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(rc: &RunConfig) -> Result<Outcome, DriverError> {
    let loaded = load_config(&rc.config, rc.seed)?;
    if let DataKind::Csv(p) = &loaded.config.f.kind {
        let path = loaded.resolve(p);
        if !path.is_file() {
            return Err(DriverError::Data { path, message: "file not found".into() });
        }
    }
    std::fs::create_dir_all(&rc.out).map_err(|source| DriverError::Io { path: rc.out.clone(), source })?;
    let ctx = Context { rc, loaded: &loaded };
    ctx.log(&format!("config hash {}", loaded.hash));
    match rc.subcommand {
        Subcommand::Domain => ctx.domain(),
        Subcommand::Certify => ctx.certify(),
        Subcommand::Similarity => ctx.similarity(),
        Subcommand::Solve => ctx.solve(),
        Subcommand::Verify => ctx.verify(),
    }
}

struct Context<'a> {
    rc: &'a RunConfig,
    loaded: &'a LoadedConfig,
}

impl Context<'_> {
    fn cfg(&self) -> &Config {
        &self.loaded.config
    }

    fn log(&self, msg: &str) {
        if self.rc.verbosity > 0 {
            eprintln!("[{}] {msg}", self.rc.subcommand.name());
        }
    }

    fn meta(&self) -> Value {
        json!({
            "config_hash": self.loaded.hash,
            "config_version": CONFIG_VERSION,
            "subcommand": self.rc.subcommand.name(),
            "seed": self.cfg().seed,
            "crate_version": env!("CARGO_PKG_VERSION"),
        })
    }

    fn csv_header(&self) -> String {
        format!(
            "config_hash={} subcommand={} seed={}",
            self.loaded.hash,
            self.rc.subcommand.name(),
            self.cfg().seed
        )
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), DriverError> {
        let path = self.rc.out.join(name);
        self.log(&format!("writing {}", path.display()));
        std::fs::write(&path, contents).map_err(|source| DriverError::Io { path, source })
    }

    fn write_json(&self, name: &str, body: Value) -> Result<(), DriverError> {
        let mut doc = serde_json::Map::new();
        doc.insert("meta".into(), self.meta());
        match body {
            Value::Object(m) => doc.extend(m),
            other => {
                doc.insert("result".into(), other);
            }
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("report serializes");
        s.push('\n');
        self.write(name, &s)
    }

    fn write_csv(&self, name: &str, body: &str) -> Result<(), DriverError> {
        self.write(name, &format!("# {}\n{body}", self.csv_header()))
    }

    fn invalid(&self, name: &str, error: impl std::fmt::Display) -> Result<Outcome, DriverError> {
        self.write_json(name, json!({ "status": "invalid", "error": error.to_string() }))?;
        Ok(Outcome::Invalid)
    }

    fn build_domain(&self) -> Result<Domain, String> {
        build_domain(&self.cfg().domain_spec()).map_err(|e| e.to_string())
    }

    fn grid(&self, domain: &Domain) -> Result<Grid, String> {
        let g = self.cfg().grid;
        Grid::for_domain(domain, g.nx, g.ny).map_err(|e| e.to_string())
    }

    fn domain(&self) -> Result<Outcome, DriverError> {
        let domain = match self.build_domain() {
            Ok(d) => d,
            Err(e) => return self.invalid("domain.json", e),
        };
        let b = &domain.boundary;
        self.write_json(
            "domain.json",
            json!({
                "status": "ok",
                "digest": domain.digest(),
                "sonic": domain.sonic,
                "rect": domain.rect,
                "c1": domain.c1_spec,
                "case": domain.case,
                "K": domain.k,
                "variant": domain.variant,
                "x0": domain.x0,
                "y0": domain.y0,
                "vertices": { "c1": b.c1.len(), "gamma": b.gamma.len(), "c2": b.c2.len() },
                "report": domain.report,
            }),
        )?;
        self.write_csv("boundary.csv", &domain.boundary_csv())?;
        Ok(Outcome::from_pass(domain.report.passed()))
    }

    fn certify(&self) -> Result<Outcome, DriverError> {
        let cfg = self.cfg();
        let case = match MultiplierCase::new(cfg.case, cfg.k, cfg.domain.rect.ell, cfg.domain.sonic.clone()) {
            Ok(c) => c,
            Err(e) => return self.invalid("certificate.json", e),
        };
        let domain = match self.build_domain() {
            Ok(d) => d,
            Err(e) => return self.invalid("certificate.json", e),
        };
        let grid = match self.grid(&domain) {
            Ok(g) => g,
            Err(e) => return self.invalid("certificate.json", e),
        };
        let report = match certify_lemma4(&case, &domain, &grid, cfg.seed) {
            Ok(r) => r,
            Err(e) => return self.invalid("certificate.json", e),
        };
        let h = grid.h();
        let ratios = (0..cfg.verify.fields as u64)
            .map(|i| {
                let tf = make_test_field(&domain, &grid, &ShapeParams::default(), cfg.seed.wrapping_add(i))?;
                coercivity_ratio(&case, &grid, &tf)
            })
            .collect::<Result<Vec<f64>, MultiplierError>>()
            .map_err(|e| DriverError::Numerical(e.to_string()))?;
        let floor = report.k_cert * (1.0 - 10.0 * h);
        let ratios_ok = ratios.iter().all(|&r| r >= floor);
        let pass = report.certified && ratios_ok;
        self.write_json(
            "certificate.json",
            json!({
                "status": if pass { "certified" } else { "not_certified" },
                "grid": grid.meta(),
                "report": report,
                "coercivity": { "ratios": ratios, "floor": floor, "passed": ratios_ok },
            }),
        )?;
        Ok(Outcome::from_pass(pass))
    }

    fn similarity(&self) -> Result<Outcome, DriverError> {
        let s = self.cfg().similarity;
        let sol = match integrate_f(s.nu, s.branch, (s.mu_a, s.mu_b), s.step) {
            Ok(sol) => sol,
            Err(e) => return self.invalid("similarity.json", e),
        };
        let pass = sol.max_residual <= RESIDUAL_TOL;
        let w = s.sample;
        let rows = sample_field(&sol, w.x, w.y, w.nx, w.ny);
        self.write_csv("profile.csv", &sol.profile_csv())?;
        self.write_csv("field.csv", &field_csv(&rows))?;
        let (s1, s2) = indicial_exponents(s.nu);
        self.write_json(
            "similarity.json",
            json!({
                "status": if pass { "ok" } else { "residual_too_large" },
                "summary": sol.summary(),
                "indicial_exponents": [s1, s2],
                "residual_tol": RESIDUAL_TOL,
                "field_samples": rows.len(),
            }),
        )?;
        Ok(Outcome::from_pass(pass))
    }

    fn solve(&self) -> Result<Outcome, DriverError> {
        let cfg = self.cfg();
        let domain = match self.build_domain() {
            Ok(d) => d,
            Err(e) => return self.invalid("stats.json", e),
        };
        let grid = match self.grid(&domain) {
            Ok(g) => g,
            Err(e) => return self.invalid("stats.json", e),
        };
        let (f, mode, exact) = match &cfg.f.kind {
            DataKind::Zero => (GridField::zeros(grid.len()), BoundaryMode::Homogeneous, None),
            DataKind::Manufactured(name) => {
                let m = match manufactured_case(name, cfg.k, &domain.sonic) {
                    Ok(m) => m,
                    Err(e) => return self.invalid("stats.json", e),
                };
                (m.f_field(&grid), m.mode(), Some(m.u_field(&grid)))
            }
            DataKind::Csv(p) => (read_data_csv(&self.loaded.resolve(p), &grid)?, BoundaryMode::Homogeneous, None),
        };
        let mode_name = mode.name();
        let prob = match LeastSquaresProblem::new(domain.clone(), grid.clone(), cfg.k, f, cfg.lambda_b, mode) {
            Ok(p) => p,
            Err(e) => return self.invalid("stats.json", e),
        };
        let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
        let maxit = cfg.maxit.unwrap_or_else(|| default_maxit(&grid));
        let (u, stats) = match solve_least_squares(&prob, tol, maxit) {
            Ok(r) => r,
            Err(e @ SolverError::NonFinite { .. }) => return Err(e.into()),
            Err(e) => return self.invalid("stats.json", e),
        };
        self.log(&format!("{} iterations, converged: {}", stats.iterations, stats.converged));
        let error_star = match &exact {
            Some(ue) => Some(
                weighted_norm(&grid, &u.sub(ue), NormMode::Star, &domain.sonic)
                    .map_err(|e| DriverError::Numerical(e.to_string()))?,
            ),
            None => None,
        };
        self.write_csv("solution.csv", &u.to_csv(&grid, None))?;
        self.write_json(
            "stats.json",
            json!({
                "status": if stats.converged { "converged" } else { "not_converged" },
                "K": cfg.k,
                "f": cfg.f.kind.to_string(),
                "boundary_mode": mode_name,
                "lambda_b": prob.lambda_b,
                "tol": tol,
                "maxit": maxit,
                "grid": grid.meta(),
                "domain_digest": domain.digest(),
                "error_star": error_star,
                "stats": stats,
            }),
        )?;
        Ok(Outcome::from_pass(stats.converged))
    }

    fn verify(&self) -> Result<Outcome, DriverError> {
        let verdict = run_checks(self.cfg(), |m| self.log(m));
        let pass = verdict.passed;
        self.write_json("verdict.json", to_value(&verdict))?;
        Ok(Outcome::from_pass(pass))
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

/// Reads `i,j,f1,f2` rows (extra columns ignored, `#` comments skipped);
/// every masked cell must appear exactly once.
fn read_data_csv(path: &Path, grid: &Grid) -> Result<GridField, DriverError> {
    let err = |message: String| DriverError::Data { path: path.to_path_buf(), message };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| err(format!("missing column {name}")));
    let (ci, cj, c1, c2) = (col("i")?, col("j")?, col("f1")?, col("f2")?);
    let mut f = GridField::zeros(grid.len());
    let mut seen = vec![false; grid.len()];
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let bad = |c: usize| err(format!("row {}: cannot parse {:?}", row + 1, field(c)));
        let i: isize = field(ci).parse().map_err(|_| bad(ci))?;
        let j: isize = field(cj).parse().map_err(|_| bad(cj))?;
        let v1: f64 = field(c1).parse().map_err(|_| bad(c1))?;
        let v2: f64 = field(c2).parse().map_err(|_| bad(c2))?;
        let k = grid.cell_index(i, j).ok_or_else(|| err(format!("row {}: cell ({i}, {j}) is not in the mask", row + 1)))?;
        if std::mem::replace(&mut seen[k], true) {
            return Err(err(format!("row {}: cell ({i}, {j}) repeated", row + 1)));
        }
        f.u1[k] = v1;
        f.u2[k] = v2;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        let (i, j) = grid.cells()[k];
        return Err(err(format!("no value for cell ({i}, {j})")));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    #[test]
    fn data_csv_round_trip() {
        let domain = build_domain(&DomainSpec::default()).unwrap();
        let grid = Grid::for_domain(&domain, 12, 12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let f = GridField::from_fn(&grid, |x, y| (x + 2.0 * y, x * y));
        let mut s = String::from("# data\ni,j,f1,f2\n");
        for (k, &(i, j)) in grid.cells().iter().enumerate() {
            s.push_str(&format!("{i},{j},{},{}\n", f.u1[k], f.u2[k]));
        }
        std::fs::write(&path, &s).unwrap();
        assert_eq!(read_data_csv(&path, &grid).unwrap(), f);

        let short: String = s.lines().take(5).map(|l| format!("{l}\n")).collect();
        std::fs::write(&path, short).unwrap();
        assert!(matches!(read_data_csv(&path, &grid), Err(DriverError::Data { .. })));
    }
}
