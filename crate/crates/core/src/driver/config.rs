use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DriverError;
use crate::geometry::DomainSpec;
use crate::multiplier::CaseKind;
use crate::similarity::{Branch, DEFAULT_MU_B};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSize {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSize {
    fn default() -> Self {
        Self { nx: 64, ny: 64 }
    }
}

/// Right-hand side source: `zero`, `manufactured:<name>` or `csv:<path>`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DataKind {
    #[default]
    Zero,
    Manufactured(String),
    Csv(PathBuf),
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataKind::Zero => write!(f, "zero"),
            DataKind::Manufactured(name) => write!(f, "manufactured:{name}"),
            DataKind::Csv(path) => write!(f, "csv:{}", path.display()),
        }
    }
}

impl TryFrom<String> for DataKind {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        match s.split_once(':') {
            None if s == "zero" => Ok(DataKind::Zero),
            Some(("manufactured", name)) if !name.is_empty() => Ok(DataKind::Manufactured(name.to_string())),
            Some(("csv", path)) if !path.is_empty() => Ok(DataKind::Csv(PathBuf::from(path))),
            _ => Err(format!("unknown data kind {s:?}; expected zero, manufactured:<name> or csv:<path>")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub kind: DataKind,
}

impl Serialize for DataKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DataKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        DataKind::try_from(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleWindow {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Default for SampleWindow {
    fn default() -> Self {
        Self { x: (0.005, 0.2), y: (0.05, 1.0), nx: 40, ny: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimilarityConfig {
    pub nu: f64,
    pub branch: Branch,
    pub mu_a: f64,
    pub mu_b: f64,
    pub step: f64,
    pub sample: SampleWindow,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self { nu: 0.25, branch: Branch::MuPowNu, mu_a: 5.0, mu_b: DEFAULT_MU_B, step: 0.01, sample: SampleWindow::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Constructed test fields per check.
    pub fields: usize,
    /// `K` of the manufactured solve behind the weak-identity check.
    #[serde(rename = "solver_K")]
    pub solver_k: f64,
    /// Coarse grid of the weak-identity refinement pair.
    pub solver_grid: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { fields: 5, solver_k: 0.5, solver_grid: 32 }
    }
}

/// Parsed configuration file. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Geometry; its `case` and `k` are replaced by the top-level values.
    #[serde(default)]
    pub domain: DomainSpec,
    #[serde(default)]
    pub case: CaseKind,
    #[serde(rename = "K", default)]
    pub k: f64,
    #[serde(default)]
    pub grid: GridSize,
    #[serde(default)]
    pub f: DataSpec,
    #[serde(default)]
    pub lambda_b: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub maxit: Option<usize>,
    #[serde(default)]
    pub similarity: SimilarityConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

impl Config {
    /// Domain spec with the top-level case and `K`.
    pub fn domain_spec(&self) -> DomainSpec {
        DomainSpec { case: self.case, k: self.k, ..self.domain.clone() }
    }
}

/// A parsed config, its directory (for relative data paths) and the hash of
/// the effective settings.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub base_dir: PathBuf,
    pub hash: String,
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Parse `text`, apply a seed override and hash the canonical form
/// (sorted keys, compact) with SHA-256.
pub fn parse_config(text: &str, origin: &Path, seed: Option<u64>) -> Result<(Config, String), DriverError> {
    let parse_err = |e: serde_json::Error| DriverError::ConfigParse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| DriverError::ConfigInvalid("top level must be a JSON object".into()))?;
    if !obj.contains_key("version") {
        return Err(DriverError::ConfigInvalid("missing mandatory field `version`".into()));
    }
    if let Some(s) = seed {
        obj.insert("seed".into(), s.into());
    }
    // line/column refer to the file, so deserialize from the text again
    let mut config: Config = serde_json::from_str(text).map_err(parse_err)?;
    if config.version != CONFIG_VERSION {
        return Err(DriverError::ConfigInvalid(format!(
            "unsupported config version {} (expected {CONFIG_VERSION})",
            config.version
        )));
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    let hash = hex::encode(Sha256::digest(value.to_string().as_bytes()));
    Ok((config, hash))
}

pub fn load_config(path: &Path, seed: Option<u64>) -> Result<LoadedConfig, DriverError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| DriverError::Io { path: path.to_path_buf(), source })?;
    let (config, hash) = parse_config(&text, path, seed)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, base_dir, hash })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<(Config, String), DriverError> {
        parse_config(text, Path::new("cfg.json"), None)
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let (c, _) = parse(r#"{"version": 1}"#).unwrap();
        assert_eq!(c.grid, GridSize { nx: 64, ny: 64 });
        assert_eq!(c.f.kind, DataKind::Zero);
        assert_eq!(c.domain, DomainSpec::default());
    }

    #[test]
    fn version_is_mandatory() {
        assert!(matches!(parse(r#"{"seed": 3}"#), Err(DriverError::ConfigInvalid(_))));
        assert!(matches!(parse(r#"{"version": 2}"#), Err(DriverError::ConfigInvalid(_))));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse("{\n  \"version\": 1,\n  \"K\": ,\n}").unwrap_err();
        match err {
            DriverError::ConfigParse { line, column, .. } => assert_eq!((line, column), (3, 8)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse(r#"{"version": 1, "kk": 0}"#), Err(DriverError::ConfigParse { .. })));
    }

    #[test]
    fn data_kinds() {
        let (c, _) = parse(r#"{"version": 1, "f": {"kind": "manufactured:poly1"}}"#).unwrap();
        assert_eq!(c.f.kind, DataKind::Manufactured("poly1".into()));
        let (c, _) = parse(r#"{"version": 1, "f": {"kind": "csv:data/f.csv"}}"#).unwrap();
        assert_eq!(c.f.kind, DataKind::Csv("data/f.csv".into()));
        assert!(parse(r#"{"version": 1, "f": {"kind": "table"}}"#).is_err());
    }

    #[test]
    fn hash_ignores_formatting_and_tracks_seed() {
        let (_, a) = parse(r#"{"version": 1, "K": 0.5}"#).unwrap();
        let (_, b) = parse("{\"K\":0.5,\n \"version\":1}").unwrap();
        assert_eq!(a, b);
        let (c, h) = parse_config(r#"{"version": 1, "K": 0.5}"#, Path::new("x"), Some(9)).unwrap();
        assert_eq!(c.seed, 9);
        assert_ne!(a, h);
    }
}
