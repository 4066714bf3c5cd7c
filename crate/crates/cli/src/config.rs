//! Run configuration: `key = value` files, flag overrides, validation and hashing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gevrey_core::exactnum::{to_f64, PRECISION_BITS};
use gevrey_core::solver::SolverConfig;
use gevrey_core::Q;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const CONFIG_ENV: &str = "GEVREY_FORGE_CONFIG";

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RunConfig {
    pub n: u32,
    pub m: u32,
    pub lmax: u32,
    pub precision_bits: u32,
    pub r: f64,
    pub r1: f64,
    pub rho_max: f64,
    pub panel: f64,
    pub weak_tol: f64,
    pub quad_tol: f64,
    pub fit_tol: f64,
    pub trace_points: usize,
    pub kmax: u32,
    pub imax: u32,
    pub out: PathBuf,
    /// worker threads, 0 for all available
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        RunConfig {
            n: 0,
            m: 1,
            lmax: s.ell_max,
            precision_bits: PRECISION_BITS,
            r: s.r,
            r1: s.r1,
            rho_max: s.rho_max,
            panel: s.panel,
            weak_tol: 1e-6,
            quad_tol: 1e-12,
            fit_tol: 0.05,
            trace_points: 200,
            kmax: 8,
            imax: 6,
            out: PathBuf::from("gevrey-out"),
            threads: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: String, line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("field `{field}`: {msg}")]
    Field { field: String, msg: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn field(name: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: name.into(), msg: msg.into() }
}

/// Exact rational `p/q`, an integer, or a decimal literal.
pub fn parse_rational(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: num_bigint::BigInt = a.trim().parse().ok()?;
        let b: num_bigint::BigInt = b.trim().parse().ok()?;
        if num_traits::Zero::is_zero(&b) {
            return None;
        }
        return Some(Q::new(a, b));
    }
    if let Ok(i) = s.parse::<num_bigint::BigInt>() {
        return Some(Q::from_integer(i));
    }
    let v: f64 = s.parse().ok()?;
    Q::from_float(v)
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    parse_rational(v).map(|q| to_f64(&q)).ok_or_else(|| field(key, format!("`{v}` is not a number")))
}

fn parse_uint(key: &str, v: &str) -> Result<u64, ConfigError> {
    let q = parse_rational(v).ok_or_else(|| field(key, format!("`{v}` is not a number")))?;
    if !q.is_integer() || q < Q::from_integer(0.into()) {
        return Err(field(key, format!("`{v}` is not a non-negative integer")));
    }
    num_traits::ToPrimitive::to_u64(&q.to_integer()).ok_or_else(|| field(key, "out of range"))
}

fn narrow(key: &str, v: u64) -> Result<u32, ConfigError> {
    u32::try_from(v).map_err(|_| field(key, "out of range"))
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_file(text: &str, path: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { path: path.into(), line: i + 1 })?;
        let k = k.trim().replace('-', "_");
        if k.is_empty() {
            return Err(ConfigError::Syntax { path: path.into(), line: i + 1 });
        }
        out.insert(k, v.trim().to_string());
    }
    Ok(out)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "n" => self.n = narrow(key, parse_uint(key, v)?)?,
            "m" => self.m = narrow(key, parse_uint(key, v)?)?,
            "lmax" | "ell_max" => self.lmax = narrow(key, parse_uint(key, v)?)?,
            "precision_bits" | "precision" => self.precision_bits = narrow(key, parse_uint(key, v)?)?,
            "r" => self.r = parse_f64(key, v)?,
            "r1" => self.r1 = parse_f64(key, v)?,
            "rho_max" => self.rho_max = parse_f64(key, v)?,
            "panel" => self.panel = parse_f64(key, v)?,
            "weak_tol" => self.weak_tol = parse_f64(key, v)?,
            "quad_tol" => self.quad_tol = parse_f64(key, v)?,
            "fit_tol" => self.fit_tol = parse_f64(key, v)?,
            "trace_points" => self.trace_points = parse_uint(key, v)? as usize,
            "kmax" => self.kmax = narrow(key, parse_uint(key, v)?)?,
            "imax" => self.imax = narrow(key, parse_uint(key, v)?)?,
            "threads" => self.threads = parse_uint(key, v)? as usize,
            "out" => self.out = PathBuf::from(v),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Defaults, then the file (explicit path or the environment variable), then overrides.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        if let Some(p) = path.map(Path::to_path_buf).or(env_path) {
            let shown = p.display().to_string();
            let text = std::fs::read_to_string(&p).map_err(|source| ConfigError::Io { path: shown.clone(), source })?;
            for (k, v) in parse_file(&text, &shown)? {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.m == 0 {
            return Err(field("m", "must be at least 1"));
        }
        if self.m > 6 {
            return Err(field("m", "values above 6 are not supported"));
        }
        if self.n > 6 {
            return Err(field("n", "values above 6 are not supported"));
        }
        if self.lmax > 12 {
            return Err(field("lmax", "values above 12 are not supported"));
        }
        if self.precision_bits != PRECISION_BITS {
            return Err(field("precision_bits", format!("only {PRECISION_BITS} (binary64) is available")));
        }
        for (k, v) in [("weak_tol", self.weak_tol), ("quad_tol", self.quad_tol), ("fit_tol", self.fit_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(field(k, "must lie in (0, 1)"));
            }
        }
        if self.trace_points < 16 {
            return Err(field("trace_points", "need at least 16"));
        }
        self.solver().validate().map_err(|e| field("solver", e.to_string()))
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig { ell_max: self.lmax, r: self.r, r1: self.r1, rho_max: self.rho_max, panel: self.panel }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let body = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(&body))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("3/4"), Some(Q::new(3.into(), 4.into())));
        assert_eq!(parse_rational(" -2 "), Some(Q::from_integer((-2).into())));
        assert_eq!(parse_rational("0.5"), Some(Q::new(1.into(), 2.into())));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
    }

    #[test]
    fn file_and_overrides() {
        let kv = parse_file("# comment\nn = 1\nm=2 # trailing\n\nrho-max = 320/2\n", "t").unwrap();
        let mut c = RunConfig::default();
        for (k, v) in &kv {
            c.set(k, v).unwrap();
        }
        assert_eq!((c.n, c.m, c.rho_max), (1, 2, 160.0));
        assert!(parse_file("n 1", "t").is_err());
        assert!(c.set("lmax", "5/2").is_err());
        assert!(matches!(c.set("bogus", "1"), Err(ConfigError::UnknownKey(_))));
    }

    #[test]
    fn validation_and_hash() {
        let c = RunConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.hash(), RunConfig::default().hash());
        let bad = RunConfig { r1: 5.0, ..RunConfig::default() };
        assert!(bad.validate().is_err());
        let bad = RunConfig { precision_bits: 128, ..RunConfig::default() };
        assert!(matches!(bad.validate(), Err(ConfigError::Field { ref field, .. }) if field == "precision_bits"));
        assert_ne!(RunConfig { n: 1, ..RunConfig::default() }.hash(), c.hash());
    }
}
