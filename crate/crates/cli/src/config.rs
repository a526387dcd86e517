//! Run configuration: a flat `key = value` file with flag overrides.
//!
//! Every key has a flag of the same name (`oracle_depth` is `--oracle-depth`).

use crate::CliError;
use renorm_core::model::{derive_params, BlowupPrefix, ModelParams};
use renorm_core::propagator::Renormalizer;
use renorm_core::renorm_map::OrbitConfig;
use renorm_core::spectral::{ClassifyConfig, IdsMethod, RootSearch};
use renorm_core::string_oracle::Boundary;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Keys accepted by [`RunConfig::set`].
pub const KEYS: &[&str] = &[
    "alpha",
    "alphas",
    "base_depth",
    "blowup",
    "boundary",
    "checks",
    "escape_radius",
    "format",
    "grid",
    "ids_method",
    "inject_delta_error",
    "jobs",
    "level",
    "max_iter",
    "norm_levels",
    "oracle_depth",
    "out",
    "plane_x",
    "plane_y",
    "points",
    "seed",
    "timing",
    "tol",
    "window",
];

/// Largest total string depth; `2^24` masses.
pub const MAX_DEPTH: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    /// Sweep for `dichotomy`.
    pub alphas: Vec<f64>,
    pub blowup: BlowupPrefix,
    pub level: usize,
    pub window: (f64, f64),
    /// Relative tolerance for roots and eigenvalues.
    pub tol: f64,
    pub max_iter: usize,
    pub escape_radius: f64,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: usize,
    pub seed: u64,
    /// String depth inside each copy of `I` for oracle operators.
    pub oracle_depth: usize,
    pub boundary: Boundary,
    /// Number of lambda samples for `ids`.
    pub points: usize,
    /// Points per axis for `plane`.
    pub grid: usize,
    pub plane_x: (f64, f64),
    pub plane_y: (f64, f64),
    /// Levels of the norm ladder in `dichotomy`.
    pub norm_levels: usize,
    /// String depth of the glued base piece.
    pub base_depth: usize,
    pub ids_method: IdsMethod,
    /// Check ids for `verify`; empty runs all.
    pub checks: Vec<String>,
    pub timing: bool,
    /// Test hook: relative error put on delta inside the semiconjugacy check.
    pub inject_delta_error: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 0.5,
            alphas: vec![0.25, 1.0 / 3.0, 0.45, 0.55, 2.0 / 3.0, 0.75],
            blowup: BlowupPrefix::ones(0),
            level: 0,
            window: (-100.0, 0.0),
            tol: 1e-13,
            max_iter: 200,
            escape_radius: 1e8,
            out: None,
            format: None,
            jobs: 1,
            seed: 0x5eed,
            oracle_depth: 12,
            boundary: Boundary::Neumann,
            points: 64,
            grid: 65,
            plane_x: (-4.0, 4.0),
            plane_y: (-4.0, 4.0),
            norm_levels: 6,
            base_depth: 10,
            ids_method: IdsMethod::OracleInertia,
            checks: Vec::new(),
            timing: false,
            inject_delta_error: None,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Decimal or `p/q`.
pub fn parse_real(s: &str) -> Result<f64, CliError> {
    let s = s.trim();
    let bad = || usage(format!("not a number: {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            Ok(p / q)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| usage(format!("expected \"a,b\", got {s:?}")))?;
    Ok((parse_real(a)?, parse_real(b)?))
}

fn parse_count(s: &str) -> Result<usize, CliError> {
    s.trim()
        .parse()
        .map_err(|_| usage(format!("not a nonnegative integer: {s:?}")))
}

fn parse_bool(s: &str) -> Result<bool, CliError> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(usage(format!("not a boolean: {other:?}"))),
    }
}

fn show_real(x: f64) -> String {
    format!("{x:?}")
}

fn show_pair(p: (f64, f64)) -> String {
    format!("{},{}", show_real(p.0), show_real(p.1))
}

fn boundary_key(b: Boundary) -> &'static str {
    match b {
        Boundary::Neumann => "neumann",
        Boundary::Dirichlet => "dirichlet",
    }
}

fn ids_key(m: IdsMethod) -> &'static str {
    match m {
        IdsMethod::OracleInertia => "oracle",
        IdsMethod::LabelCount => "labels",
    }
}

impl RunConfig {
    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "alpha" => self.alpha = parse_real(v)?,
            "alphas" => {
                self.alphas = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(parse_real)
                    .collect::<Result<_, _>>()?
            }
            "base_depth" => self.base_depth = parse_count(v)?,
            "blowup" => self.blowup = v.parse().map_err(|e| usage(format!("blowup: {e}")))?,
            "boundary" => {
                self.boundary = match v {
                    "neumann" => Boundary::Neumann,
                    "dirichlet" => Boundary::Dirichlet,
                    other => return Err(usage(format!("unknown boundary {other:?}"))),
                }
            }
            "checks" => {
                self.checks = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "escape_radius" => self.escape_radius = parse_real(v)?,
            "format" => {
                self.format = Some(match v {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    other => return Err(usage(format!("unknown format {other:?}"))),
                })
            }
            "grid" => self.grid = parse_count(v)?,
            "ids_method" => {
                self.ids_method = match v {
                    "oracle" => IdsMethod::OracleInertia,
                    "labels" => IdsMethod::LabelCount,
                    other => return Err(usage(format!("unknown ids method {other:?}"))),
                }
            }
            "inject_delta_error" => self.inject_delta_error = Some(parse_real(v)?),
            "jobs" => self.jobs = parse_count(v)?,
            "level" => self.level = parse_count(v)?,
            "max_iter" => self.max_iter = parse_count(v)?,
            "norm_levels" => self.norm_levels = parse_count(v)?,
            "oracle_depth" => self.oracle_depth = parse_count(v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "plane_x" => self.plane_x = parse_pair(v)?,
            "plane_y" => self.plane_y = parse_pair(v)?,
            "points" => self.points = parse_count(v)?,
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| usage(format!("seed must be an unsigned integer, got {v:?}")))?
            }
            "timing" => self.timing = parse_bool(v)?,
            "tol" => self.tol = parse_real(v)?,
            "window" => self.window = parse_pair(v)?,
            other => return Err(usage(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        derive_params(self.alpha)?;
        for &a in &self.alphas {
            derive_params(a)?;
        }
        let (a, b) = self.window;
        if !(a.is_finite() && b.is_finite() && a <= b && b <= 0.0) {
            return Err(usage(format!("window [{a}, {b}] must satisfy a <= b <= 0")));
        }
        for (name, (lo, hi)) in [("plane_x", self.plane_x), ("plane_y", self.plane_y)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(usage(format!("{name} needs lo < hi")));
            }
        }
        if self.level + self.oracle_depth > MAX_DEPTH {
            return Err(usage(format!(
                "level + oracle_depth must not exceed {MAX_DEPTH}"
            )));
        }
        if self.norm_levels + self.base_depth > MAX_DEPTH || self.base_depth == 0 {
            return Err(usage("base_depth must be positive and norm_levels + base_depth small"));
        }
        if self.jobs == 0 || self.points == 0 || self.grid < 2 || self.max_iter == 0 {
            return Err(usage("jobs, points, max_iter must be positive and grid at least 2"));
        }
        if !(self.tol > 0.0 && self.tol < 1e-2) || !(self.escape_radius > 1.0) {
            return Err(usage("tol must lie in (0, 1e-2) and escape_radius above 1"));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        Ok(derive_params(self.alpha)?)
    }

    pub fn renormalizer(&self) -> Result<Renormalizer, CliError> {
        Ok(Renormalizer::new(self.params()?)?)
    }

    pub fn orbit(&self) -> OrbitConfig {
        OrbitConfig {
            max_iter: self.max_iter,
            escape_radius: self.escape_radius,
            ..OrbitConfig::default()
        }
    }

    pub fn classify_config(&self) -> ClassifyConfig {
        ClassifyConfig {
            orbit: self.orbit(),
            ..ClassifyConfig::default()
        }
    }

    pub fn root_search(&self) -> RootSearch {
        RootSearch {
            rel_tol: self.tol.max(4.0 * f64::EPSILON),
            ..RootSearch::default()
        }
    }

    /// Inputs that determine the output, in key order. Parallelism, the
    /// output path and timing are left out.
    pub fn canonical(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("alpha", show_real(self.alpha));
        put(
            "alphas",
            self.alphas.iter().map(|a| show_real(*a)).collect::<Vec<_>>().join(","),
        );
        put("base_depth", self.base_depth.to_string());
        put("blowup", self.blowup.to_string());
        put("boundary", boundary_key(self.boundary).to_string());
        put("checks", self.checks.join(","));
        put("escape_radius", show_real(self.escape_radius));
        put("grid", self.grid.to_string());
        put("ids_method", ids_key(self.ids_method).to_string());
        if let Some(e) = self.inject_delta_error {
            put("inject_delta_error", show_real(e));
        }
        put("level", self.level.to_string());
        put("max_iter", self.max_iter.to_string());
        put("norm_levels", self.norm_levels.to_string());
        put("oracle_depth", self.oracle_depth.to_string());
        put("plane_x", show_pair(self.plane_x));
        put("plane_y", show_pair(self.plane_y));
        put("points", self.points.to_string());
        put("seed", self.seed.to_string());
        put("tol", show_real(self.tol));
        put("window", show_pair(self.window));
        m
    }

    /// SHA-256 of the canonical `key=value` lines.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.canonical() {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_flags() {
        let mut c = RunConfig::default();
        c.apply_text("alpha = 1/3 # comment\nwindow=-50,0\n\nblowup = 12:tail=1\n").unwrap();
        assert!((c.alpha - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(c.window, (-50.0, 0.0));
        assert_eq!(c.blowup.len(), 2);
        c.set("oracle-depth", "9").unwrap();
        assert_eq!(c.oracle_depth, 9);
        assert!(c.set("nope", "1").is_err());
        assert!(c.apply_text("alpha 3").is_err());
        c.validate().unwrap();
        c.window = (0.0, -1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_parallelism() {
        let mut a = RunConfig::default();
        let h = a.hash();
        a.jobs = 8;
        a.timing = true;
        assert_eq!(a.hash(), h);
        a.seed = 1;
        assert_ne!(a.hash(), h);
        for k in KEYS {
            assert!(!k.contains('-'));
        }
    }
}
