//! Run configuration read from TOML.
//!
//! Every section rejects unknown keys, and errors carry the dotted key path
//! of the offending entry. See `docs/config.md` for the full key table.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::DEFAULT_HORIZON;
use crate::experiments::{preset, suite_tier};
use crate::model::{ModelParams, DEFAULT_EPSILON_FRACTION};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("config error at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_suites")]
    pub suites: Vec<String>,
    pub model: ModelConfig,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub estimation: EstimationConfig,
}

fn default_seed() -> u64 {
    1
}
fn default_workers() -> usize {
    1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("swdiff-out")
}
fn default_suites() -> Vec<String> {
    vec!["conditions".into()]
}

/// `m1` is either a number or the word `"search"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum M1Setting {
    Fixed(f64),
    Keyword(String),
}

impl M1Setting {
    pub fn fixed(&self) -> Option<f64> {
        match self {
            M1Setting::Fixed(v) => Some(*v),
            M1Setting::Keyword(_) => None,
        }
    }
}

/// A named preset, a fully custom canonical-family model, or a preset with
/// individual keys overridden.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub preset: Option<String>,
    pub d: Option<usize>,
    pub lambda_minus: Option<f64>,
    pub lambda_plus: Option<f64>,
    pub kappa_minus: Option<f64>,
    pub kappa_plus: Option<f64>,
    pub m: Option<f64>,
    pub m1: Option<M1Setting>,
}

/// Model keys after preset lookup and overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedModel {
    pub name: String,
    pub d: usize,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub kappa_minus: f64,
    pub kappa_plus: f64,
    pub m: f64,
    pub m1: Option<f64>,
}

impl ResolvedModel {
    /// Parameters of the canonical family; `m1` falls back to `2M` until a
    /// search result replaces it.
    pub fn params(&self) -> ModelParams {
        ModelParams {
            d: self.d,
            lambda_minus: self.lambda_minus,
            lambda_plus: self.lambda_plus,
            r_minus: self.kappa_minus,
            r_plus: self.kappa_plus,
            big_r_minus: self.kappa_minus,
            big_r_plus: self.kappa_plus,
            m: self.m,
            m1: self.m1.unwrap_or(2.0 * self.m),
        }
    }
}

impl ModelConfig {
    pub fn resolve(&self) -> Result<ResolvedModel, ConfigError> {
        let base = match &self.preset {
            Some(name) => Some(preset(name).ok_or_else(|| ConfigError::new("model.preset", format!("unknown preset `{name}`")))?),
            None => None,
        };
        let need = |v: Option<f64>, from: Option<f64>, key: &str| {
            v.or(from)
                .ok_or_else(|| ConfigError::new(format!("model.{key}"), "required when no preset is named"))
        };
        let d = self
            .d
            .or(base.as_ref().map(|p| p.d))
            .ok_or_else(|| ConfigError::new("model.d", "required when no preset is named"))?;
        let m1 = match &self.m1 {
            Some(M1Setting::Fixed(v)) => Some(*v),
            Some(M1Setting::Keyword(k)) if k == "search" => None,
            Some(M1Setting::Keyword(k)) => {
                return Err(ConfigError::new("model.m1", format!("expected a number or \"search\", got \"{k}\"")))
            }
            None => None,
        };
        let resolved = ResolvedModel {
            name: self.preset.clone().unwrap_or_else(|| "custom".into()),
            d,
            lambda_minus: need(self.lambda_minus, base.as_ref().map(|p| p.lambda_minus), "lambda_minus")?,
            lambda_plus: need(self.lambda_plus, base.as_ref().map(|p| p.lambda_plus), "lambda_plus")?,
            kappa_minus: need(self.kappa_minus, base.as_ref().map(|p| p.kappa_minus), "kappa_minus")?,
            kappa_plus: need(self.kappa_plus, base.as_ref().map(|p| p.kappa_plus), "kappa_plus")?,
            m: need(self.m, base.as_ref().map(|p| p.m), "m")?,
            m1,
        };
        if let Err(e) = resolved.params().validate() {
            let key = match &e {
                crate::model::ModelError::InvalidParameter { name, .. } => match *name {
                    "R_minus" | "r_minus" => "kappa_minus",
                    "R_plus" | "r_plus" => "kappa_plus",
                    "M" => "m",
                    "M1" => "m1",
                    other => other,
                },
                _ => "",
            };
            return Err(ConfigError::new(format!("model.{key}"), e.to_string()));
        }
        Ok(resolved)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    /// Defaults to `1e-3 * min(1/lambda_-, 1/lambda_+)`.
    pub dt: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}

impl Default for EngineSection {
    fn default() -> Self {
        EngineSection {
            dt: None,
            horizon: DEFAULT_HORIZON,
        }
    }
}

/// Replica counts, grids and tolerances. Radius grids are multiples of `M1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationConfig {
    pub confidence: f64,
    pub epsilon_fraction: f64,
    pub replicas: usize,
    pub hitting_replicas: usize,
    pub dt_halving_replicas: usize,
    pub coefficient_replicas: usize,
    pub drift_replicas: usize,
    pub m1_search_replicas: usize,
    pub m1_max_doublings: u32,
    pub holding_samples: usize,
    pub cycle_samples: usize,
    pub brownian_replicas: usize,
    pub sweep_tuples: usize,
    pub audit_samples: usize,
    pub audit_max_ratio: f64,
    pub drift_multipliers: Vec<f64>,
    pub coefficient_multipliers: Vec<f64>,
    pub growth_multipliers: Vec<f64>,
    pub start_regimes: Vec<u8>,
    pub moment_times: Vec<f64>,
    pub coefficient_tolerance: f64,
    pub quadratic_exponent_tolerance: f64,
    pub sixth_exponent_tolerance: f64,
    pub conjectured_exponent: f64,
    pub max_censored_fraction: f64,
    pub bootstrap_resamples: usize,
    pub tv_times: Vec<f64>,
    pub tv_reference_time: f64,
    pub tv_bins: usize,
    pub tv_start_multiplier: f64,
    pub tv_replicas: usize,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            confidence: 0.99,
            epsilon_fraction: DEFAULT_EPSILON_FRACTION,
            replicas: 10_000,
            hitting_replicas: 1_000,
            dt_halving_replicas: 4_000,
            coefficient_replicas: 50_000,
            drift_replicas: 50_000,
            m1_search_replicas: 4_000,
            m1_max_doublings: 10,
            holding_samples: 1_000_000,
            cycle_samples: 1_000_000,
            brownian_replicas: 100_000,
            sweep_tuples: 10_000,
            audit_samples: 10_000,
            audit_max_ratio: 1e3,
            drift_multipliers: vec![2.0, 5.0, 10.0],
            coefficient_multipliers: vec![2.0, 3.0, 4.0, 6.0],
            growth_multipliers: vec![2.0, 4.0, 8.0, 16.0],
            start_regimes: vec![0, 1],
            moment_times: vec![0.1, 0.5, 1.0, 2.0],
            coefficient_tolerance: 0.15,
            quadratic_exponent_tolerance: 0.3,
            sixth_exponent_tolerance: 0.5,
            conjectured_exponent: 4.0,
            max_censored_fraction: 1e-3,
            bootstrap_resamples: 1_000,
            tv_times: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            tv_reference_time: 64.0,
            tv_bins: 64,
            tv_start_multiplier: 4.0,
            tv_replicas: 20_000,
        }
    }
}

impl RunConfig {
    /// Parses and validates TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ConfigError::new(if path == "." { String::new() } else { path }, inner.message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.workers == 0 {
            return Err(ConfigError::new("workers", "must be at least 1"));
        }
        for (i, s) in self.suites.iter().enumerate() {
            if suite_tier(s).is_none() {
                return Err(ConfigError::new(format!("suites[{i}]"), format!("unknown suite `{s}`")));
            }
        }
        let model = self.model.resolve()?;
        let dt = self.engine.dt.unwrap_or_else(|| crate::engine::default_dt(&model.params()));
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ConfigError::new("engine.dt", format!("must be positive, got {dt}")));
        }
        if !(self.engine.horizon >= dt) {
            return Err(ConfigError::new("engine.horizon", "must be at least dt"));
        }
        self.estimation.validate()
    }

    pub fn resolved_model(&self) -> Result<ResolvedModel, ConfigError> {
        self.model.resolve()
    }

    pub fn dt(&self) -> f64 {
        match (self.engine.dt, self.model.resolve()) {
            (Some(dt), _) => dt,
            (None, Ok(m)) => crate::engine::default_dt(&m.params()),
            (None, Err(_)) => 1e-3,
        }
    }

    /// SHA-256 of the canonical JSON form, excluding `seed`, `workers`,
    /// `output_dir` and `suites`, none of which change any single check.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(obj) = v.as_object_mut() {
            for k in ["seed", "workers", "output_dir", "suites"] {
                obj.remove(k);
            }
            if let Some(engine) = obj.get_mut("engine").and_then(|e| e.as_object_mut()) {
                engine.insert("dt".into(), serde_json::json!(self.dt()));
            }
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let key = |k: &str| format!("estimation.{k}");
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(ConfigError::new(key("confidence"), format!("must lie in (0, 1), got {}", self.confidence)));
        }
        if !(self.epsilon_fraction > 0.0 && self.epsilon_fraction < 1.0) {
            return Err(ConfigError::new(key("epsilon_fraction"), "must lie in (0, 1)"));
        }
        for (name, n) in [
            ("replicas", self.replicas),
            ("hitting_replicas", self.hitting_replicas),
            ("dt_halving_replicas", self.dt_halving_replicas),
            ("coefficient_replicas", self.coefficient_replicas),
            ("drift_replicas", self.drift_replicas),
            ("m1_search_replicas", self.m1_search_replicas),
            ("holding_samples", self.holding_samples),
            ("cycle_samples", self.cycle_samples),
            ("brownian_replicas", self.brownian_replicas),
            ("tv_replicas", self.tv_replicas),
        ] {
            if n < crate::estimators::MIN_REPLICAS {
                return Err(ConfigError::new(key(name), format!("must be at least {}", crate::estimators::MIN_REPLICAS)));
            }
        }
        if self.sweep_tuples == 0 || self.audit_samples == 0 {
            return Err(ConfigError::new(key("sweep_tuples"), "sample counts must be positive"));
        }
        if self.audit_max_ratio < 1.0 {
            return Err(ConfigError::new(key("audit_max_ratio"), "must be at least 1"));
        }
        for (name, grid, min_len) in [
            ("drift_multipliers", &self.drift_multipliers, 1),
            ("coefficient_multipliers", &self.coefficient_multipliers, 3),
            ("growth_multipliers", &self.growth_multipliers, 3),
        ] {
            if grid.len() < min_len {
                return Err(ConfigError::new(key(name), format!("needs at least {min_len} entries")));
            }
            if grid.iter().any(|&g| !(g > 1.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ConfigError::new(key(name), "entries must exceed 1 and increase strictly"));
            }
        }
        if self.start_regimes.is_empty() || self.start_regimes.iter().any(|&z| z > 1) {
            return Err(ConfigError::new(key("start_regimes"), "entries must be 0 or 1"));
        }
        if self.moment_times.is_empty() || self.moment_times.iter().any(|&t| !(t > 0.0)) {
            return Err(ConfigError::new(key("moment_times"), "entries must be positive"));
        }
        if self.tv_times.is_empty() || self.tv_times.windows(2).any(|w| w[1] <= w[0]) || self.tv_times[0] < 0.0 {
            return Err(ConfigError::new(key("tv_times"), "must be non-negative and strictly increasing"));
        }
        if self.tv_times.iter().any(|&t| t >= self.tv_reference_time) {
            return Err(ConfigError::new(key("tv_reference_time"), "must exceed every entry of tv_times"));
        }
        if self.tv_bins == 0 {
            return Err(ConfigError::new(key("tv_bins"), "must be positive"));
        }
        for (name, v) in [
            ("coefficient_tolerance", self.coefficient_tolerance),
            ("quadratic_exponent_tolerance", self.quadratic_exponent_tolerance),
            ("sixth_exponent_tolerance", self.sixth_exponent_tolerance),
            ("max_censored_fraction", self.max_censored_fraction),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::new(key(name), "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, crate::Error> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(path.display().to_string(), format!("cannot read file: {e}")))?;
    Ok(RunConfig::from_toml_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "schema_version = 1\nsuites = [\"conditions\"]\n[model]\npreset = \"canonical-1d\"\n";

    #[test]
    fn minimal_preset_fills_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.workers, 1);
        assert_eq!(cfg.estimation, EstimationConfig::default());
        assert_eq!(cfg.engine.horizon, DEFAULT_HORIZON);
        assert!((cfg.dt() - 1e-4).abs() < 1e-18);
        let m = cfg.resolved_model().unwrap();
        assert_eq!((m.d, m.kappa_minus, m.m1), (1, 4.0, None));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml_str(&format!("{MINIMAL}colour = 3\n")).unwrap_err();
        assert!(err.path.contains("model"), "{err}");
        assert!(err.message.contains("colour"), "{err}");
        let err = RunConfig::from_toml_str(&format!("{MINIMAL}[estimation]\nreplica = 3\n")).unwrap_err();
        assert!(err.message.contains("replica"), "{err}");
    }

    #[test]
    fn zero_intensity_names_condition() {
        let err = RunConfig::from_toml_str(&format!("{MINIMAL}lambda_minus = 0.0\n")).unwrap_err();
        assert_eq!(err.path, "model.lambda_minus");
        assert!(err.message.contains("condition al"), "{err}");
    }

    #[test]
    fn custom_model_needs_every_key() {
        let text = "schema_version = 1\n[model]\nd = 2\nlambda_minus = 1.0\nlambda_plus = 3.0\nkappa_minus = 5.0\nkappa_plus = 0.2\n";
        let err = RunConfig::from_toml_str(text).unwrap_err();
        assert_eq!(err.path, "model.m");
        let cfg = RunConfig::from_toml_str(&format!("{text}m = 1.0\nm1 = 6.0\n")).unwrap();
        assert_eq!(cfg.resolved_model().unwrap().m1, Some(6.0));
    }

    #[test]
    fn rejects_bad_values_with_paths() {
        for (extra, path) in [
            ("[estimation]\nconfidence = 1.5\n", "estimation.confidence"),
            ("[estimation]\nreplicas = 10\n", "estimation.replicas"),
            ("[engine]\ndt = -1.0\n", "engine.dt"),
            ("[model]\npreset = \"canonical-1d\"\nm1 = \"later\"\n", "model.m1"),
        ] {
            let text = if extra.starts_with("[model]") {
                format!("schema_version = 1\n{extra}")
            } else {
                format!("{MINIMAL}{extra}")
            };
            assert_eq!(RunConfig::from_toml_str(&text).unwrap_err().path, path, "{extra}");
        }
        let err = RunConfig::from_toml_str("schema_version = 1\nsuites = [\"nope\"]\n[model]\npreset = \"canonical-1d\"\n").unwrap_err();
        assert_eq!(err.path, "suites[0]");
        let err = RunConfig::from_toml_str("schema_version = 2\n[model]\npreset = \"canonical-1d\"\n").unwrap_err();
        assert_eq!(err.path, "schema_version");
    }

    #[test]
    fn hash_ignores_operational_keys() {
        let a = RunConfig::from_toml_str(MINIMAL).unwrap();
        let mut b = a.clone();
        b.workers = 8;
        b.seed = 99;
        b.output_dir = "elsewhere".into();
        assert_eq!(a.config_hash(), b.config_hash());
        b.estimation.replicas = 500;
        assert_ne!(a.config_hash(), b.config_hash());
    }
}
