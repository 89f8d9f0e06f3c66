//! Study configuration: `key = value` lines with dotted keys, e.g.
//!
//! ```text
//! grid.fine_nx = 16
//! mcmc.beta = 0.85
//! paths.output_dir = "out"
//! output.snapshots = [40, 5000, 10000]
//! ```
//!
//! Values use TOML scalar syntax. Every key is optional; missing keys take
//! the defaults below and unknown keys are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use toml::Value;

use crate::error::ConfigError;

/// Environment variable overriding `paths.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "PERMCOND_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub fine_nx: usize,
    pub fine_ny: usize,
    pub coarse_nx: usize,
    pub coarse_ny: usize,
    pub sigma2: f64,
    pub lx: f64,
    pub ly: f64,
    pub n_terms: Option<usize>,
    pub energy_threshold: Option<f64>,
    pub beta: f64,
    pub sigma_f2: f64,
    pub sigma_c2: f64,
    pub chains: usize,
    pub iterations: usize,
    /// Defaults to a tenth of `iterations`.
    pub burn_in: Option<usize>,
    pub conditioned: bool,
    pub single_component: bool,
    pub store_projected: bool,
    pub two_stage: bool,
    pub explicit_prior_ratio: bool,
    pub seed: u64,
    pub measurements: PathBuf,
    pub reference_field: PathBuf,
    pub output_dir: PathBuf,
    pub checkpoint_every: usize,
    pub snapshots: Vec<usize>,
    pub verbosity: String,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            fine_nx: 16,
            fine_ny: 16,
            coarse_nx: 8,
            coarse_ny: 8,
            sigma2: 1.0,
            lx: 0.4,
            ly: 0.8,
            n_terms: Some(20),
            energy_threshold: None,
            beta: 0.85,
            sigma_f2: 1e-4,
            sigma_c2: 5e-3,
            chains: 4,
            iterations: 100_000,
            burn_in: None,
            conditioned: true,
            single_component: true,
            store_projected: false,
            two_stage: true,
            explicit_prior_ratio: false,
            seed: 1,
            measurements: PathBuf::from("data/measurements.csv"),
            reference_field: PathBuf::from("data/reference_logperm.csv"),
            output_dir: PathBuf::from("out"),
            checkpoint_every: 250,
            snapshots: vec![40, 5000, 10000],
            verbosity: "info".into(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "grid.fine_nx",
    "grid.fine_ny",
    "grid.coarse_nx",
    "grid.coarse_ny",
    "kernel.sigma2",
    "kernel.lx",
    "kernel.ly",
    "kle.n_terms",
    "kle.energy_threshold",
    "mcmc.beta",
    "mcmc.sigma_f2",
    "mcmc.sigma_c2",
    "mcmc.chains",
    "mcmc.iterations",
    "mcmc.burn_in",
    "mcmc.conditioned",
    "mcmc.single_component",
    "mcmc.store_projected",
    "mcmc.two_stage",
    "mcmc.explicit_prior_ratio",
    "seed",
    "paths.measurements",
    "paths.reference_field",
    "paths.output_dir",
    "diagnostics.checkpoint_every",
    "output.snapshots",
    "output.verbosity",
];

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn type_err(key: &str, expected: &str) -> ConfigError {
    ConfigError::Type {
        key: key.into(),
        expected: expected.into(),
    }
}

fn range_err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        key: key.into(),
        msg: msg.into(),
    }
}

fn as_count(key: &str, v: &Value) -> Result<usize, ConfigError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        Value::Integer(_) => Err(range_err(key, "must be non-negative")),
        _ => Err(type_err(key, "a non-negative integer")),
    }
}

fn as_real(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(type_err(key, "a number")),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool, ConfigError> {
    v.as_bool().ok_or_else(|| type_err(key, "true or false"))
}

fn as_string(key: &str, v: &Value) -> Result<String, ConfigError> {
    v.as_str().map(str::to_owned).ok_or_else(|| type_err(key, "a quoted string"))
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(range_err(key, format!("must be positive and finite, got {v}")))
    }
}

impl StudyConfig {
    /// Parses config text; `origin` is used in syntax errors only.
    pub fn parse_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax {
            path: origin.to_path_buf(),
            msg: e.message().to_string(),
        })?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        if let Some(unknown) = flat.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(unknown.clone()));
        }

        let mut c = StudyConfig::default();
        let mut n_terms_set = false;
        for (key, v) in &flat {
            let k = key.as_str();
            match k {
                "grid.fine_nx" => c.fine_nx = as_count(k, v)?,
                "grid.fine_ny" => c.fine_ny = as_count(k, v)?,
                "grid.coarse_nx" => c.coarse_nx = as_count(k, v)?,
                "grid.coarse_ny" => c.coarse_ny = as_count(k, v)?,
                "kernel.sigma2" => c.sigma2 = positive(k, as_real(k, v)?)?,
                "kernel.lx" => c.lx = positive(k, as_real(k, v)?)?,
                "kernel.ly" => c.ly = positive(k, as_real(k, v)?)?,
                "kle.n_terms" => {
                    c.n_terms = Some(as_count(k, v)?);
                    n_terms_set = true;
                }
                "kle.energy_threshold" => {
                    let e = as_real(k, v)?;
                    if !(e > 0.0 && e <= 1.0) {
                        return Err(range_err(k, format!("must lie in (0, 1], got {e}")));
                    }
                    c.energy_threshold = Some(e);
                }
                "mcmc.beta" => {
                    let b = as_real(k, v)?;
                    if !(0.0..=1.0).contains(&b) {
                        return Err(range_err(k, format!("must lie in [0, 1], got {b}")));
                    }
                    c.beta = b;
                }
                "mcmc.sigma_f2" => c.sigma_f2 = positive(k, as_real(k, v)?)?,
                "mcmc.sigma_c2" => c.sigma_c2 = positive(k, as_real(k, v)?)?,
                "mcmc.chains" => c.chains = as_count(k, v)?,
                "mcmc.iterations" => c.iterations = as_count(k, v)?,
                "mcmc.burn_in" => c.burn_in = Some(as_count(k, v)?),
                "mcmc.conditioned" => c.conditioned = as_bool(k, v)?,
                "mcmc.single_component" => c.single_component = as_bool(k, v)?,
                "mcmc.store_projected" => c.store_projected = as_bool(k, v)?,
                "mcmc.two_stage" => c.two_stage = as_bool(k, v)?,
                "mcmc.explicit_prior_ratio" => c.explicit_prior_ratio = as_bool(k, v)?,
                "seed" => {
                    c.seed = match v {
                        Value::Integer(i) if *i >= 0 => *i as u64,
                        _ => return Err(type_err(k, "a non-negative integer")),
                    }
                }
                "paths.measurements" => c.measurements = as_string(k, v)?.into(),
                "paths.reference_field" => c.reference_field = as_string(k, v)?.into(),
                "paths.output_dir" => c.output_dir = as_string(k, v)?.into(),
                "diagnostics.checkpoint_every" => c.checkpoint_every = as_count(k, v)?,
                "output.snapshots" => {
                    let arr = v.as_array().ok_or_else(|| type_err(k, "a list of iteration numbers"))?;
                    c.snapshots = arr.iter().map(|x| as_count(k, x)).collect::<Result<_, _>>()?;
                }
                "output.verbosity" => c.verbosity = as_string(k, v)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }
        if c.energy_threshold.is_some() {
            if n_terms_set {
                return Err(range_err("kle.energy_threshold", "set either kle.n_terms or kle.energy_threshold, not both"));
            }
            c.n_terms = None;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn parse_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text, path)
    }

    /// Cross-key checks.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (k, v) in [
            ("grid.fine_nx", self.fine_nx),
            ("grid.fine_ny", self.fine_ny),
            ("grid.coarse_nx", self.coarse_nx),
            ("grid.coarse_ny", self.coarse_ny),
            ("mcmc.chains", self.chains),
            ("mcmc.iterations", self.iterations),
            ("diagnostics.checkpoint_every", self.checkpoint_every),
        ] {
            if v == 0 {
                return Err(range_err(k, "must be at least 1"));
            }
        }
        if self.fine_nx % self.coarse_nx != 0 {
            return Err(range_err("grid.coarse_nx", format!("must divide grid.fine_nx = {}", self.fine_nx)));
        }
        if self.fine_ny % self.coarse_ny != 0 {
            return Err(range_err("grid.coarse_ny", format!("must divide grid.fine_ny = {}", self.fine_ny)));
        }
        if let Some(n) = self.n_terms {
            if n == 0 || n > self.fine_nx * self.fine_ny {
                return Err(range_err("kle.n_terms", format!("must lie in 1..={}", self.fine_nx * self.fine_ny)));
            }
        }
        if self.burn_in() >= self.iterations {
            return Err(range_err("mcmc.burn_in", format!("must be below mcmc.iterations = {}", self.iterations)));
        }
        if !["error", "warn", "info", "debug", "trace", "off"].contains(&self.verbosity.as_str()) {
            return Err(range_err("output.verbosity", "one of off, error, warn, info, debug, trace"));
        }
        Ok(())
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations / 10)
    }

    /// `paths.output_dir`, unless the environment overrides it.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }
}
