//! Experiment configuration files.
//!
//! A configuration is a JSON object. `walk` and `scenery` accept either a
//! preset name or a structured model; every other key is listed on
//! [`FileConfig`]. Unknown keys are rejected, and every error carries the key
//! path it refers to.
//!
//! ```json
//! {"walk": "rademacher", "scenery": "iid_gaussian", "n_grid": [1024], "replicas": 1, "seed": 7}
//! ```

use std::fmt;
use std::path::Path;

use rwrs_core::experiments::{ExperimentConfig, ExperimentError, DEFAULT_DELTA, DEFAULT_EPSILON, DEFAULT_LAMBDA, DEFAULT_REPLICAS};
use rwrs_core::scenery::{Innovation, MaCoeffs, Profile, SceneryError, SceneryModel};
use rwrs_core::walk::{WalkError, WalkModel};
use serde::{Deserialize, Serialize};

use crate::rules::Rule;

pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_MAX_LAG: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted key path, empty for whole-file problems.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "`{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Subcommand a configuration is declared for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Slln,
    Theorem3,
    ScalingAlpha,
    ScalingOccupancy,
    Subseq,
    Varbound,
    Covbound,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Slln => "slln",
            Mode::Theorem3 => "theorem3",
            Mode::ScalingAlpha => "scaling-alpha",
            Mode::ScalingOccupancy => "scaling-occupancy",
            Mode::Subseq => "subseq",
            Mode::Varbound => "varbound",
            Mode::Covbound => "covbound",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WalkSpec {
    Preset(String),
    Model(WalkModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenerySpec {
    Preset(String),
    Model(SceneryModel),
}

/// Walk presets: `rademacher`, `lazy_rademacher` (holding probability 1/2),
/// `fgn` (Hurst 0.75).
pub fn walk_preset(name: &str) -> Option<WalkModel> {
    use rwrs_core::walk::IncrementDist;
    match name {
        "rademacher" => Some(WalkModel::rademacher()),
        "lazy_rademacher" => Some(WalkModel::IidLattice {
            increments: IncrementDist::LazyRademacher { p_stay: 0.5 },
        }),
        "fgn" => Some(WalkModel::fgn(0.75)),
        _ => None,
    }
}

/// Scenery presets: `iid_gaussian`, `iid_rademacher`, `ma_periodic`
/// (geometric MA with ratio 1/2 and mean `cos(2 pi i / 7)`), `pareto`
/// (centered Pareto with tail index 1.5), `degenerate` (`xi = 1`).
pub fn scenery_preset(name: &str) -> Option<SceneryModel> {
    match name {
        "iid_gaussian" => Some(SceneryModel::iid(Innovation::Gaussian)),
        "iid_rademacher" => Some(SceneryModel::iid(Innovation::Rademacher)),
        "ma_periodic" => Some(
            SceneryModel::causal_ma(Innovation::Gaussian, MaCoeffs::Geometric { rho: 0.5 }).with_mu(Profile::Periodic {
                base: 0.0,
                amplitude: 1.0,
                period: 7,
            }),
        ),
        "pareto" => Some(SceneryModel::pareto(1.5)),
        "degenerate" => Some(SceneryModel::iid(Innovation::Degenerate { value: 1.0 })),
        _ => None,
    }
}

fn default_replicas() -> usize {
    DEFAULT_REPLICAS
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

/// On-disk configuration schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub walk: WalkSpec,
    pub scenery: ScenerySpec,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub expect_divergent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Covariance lags, default `1..=20`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<Vec<usize>>,
    /// Covariance Monte Carlo sample size, default 10000.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<Rule>,
    /// `(n, value)` pairs replacing the simulation in the scaling subcommands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_points: Option<Vec<(f64, f64)>>,
}

/// A validated configuration with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct LabConfig {
    pub experiment: ExperimentConfig,
    pub mode: Option<Mode>,
    pub lags: Vec<usize>,
    pub samples: usize,
    pub rules: Vec<Rule>,
    pub synthetic_points: Option<Vec<(f64, f64)>>,
}

impl LabConfig {
    /// Structured form: presets are expanded and every default is explicit,
    /// so that the output parses back to an equal configuration.
    pub fn to_file_config(&self) -> FileConfig {
        let e = &self.experiment;
        FileConfig {
            walk: WalkSpec::Model(e.walk.clone()),
            scenery: ScenerySpec::Model(e.scenery.clone()),
            n_grid: e.n_grid.clone(),
            replicas: e.replicas,
            seed: e.base_seed,
            lambda: e.lambda,
            delta: e.delta,
            tau: e.tau,
            epsilon: e.epsilon,
            expect_divergent: e.expect_divergent,
            mode: self.mode,
            lags: Some(self.lags.clone()),
            samples: Some(self.samples),
            rules: self.rules.clone(),
            synthetic_points: self.synthetic_points.clone(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.experiment.base_seed = seed;
        self
    }
}

fn experiment_error(err: ExperimentError) -> ConfigError {
    match err {
        ExperimentError::InvalidConfig { key, reason } => ConfigError::at(key, reason),
        ExperimentError::Walk(e) => walk_error(e),
        ExperimentError::Scenery(e) => scenery_error(e),
        other => ConfigError::at("", other.to_string()),
    }
}

fn walk_error(err: WalkError) -> ConfigError {
    let path = match err {
        WalkError::HurstOutOfRange(_) => "walk.hurst",
        _ => "walk",
    };
    ConfigError::at(path, err.to_string())
}

fn scenery_error(err: SceneryError) -> ConfigError {
    let path = match err {
        SceneryError::TailIndexTooSmall(_) => "scenery.innovation.tail_index".to_string(),
        SceneryError::InvalidCoefficients(_) => "scenery.ma".to_string(),
        SceneryError::NonPositiveSigma(_) => "scenery.sigma".to_string(),
        SceneryError::UnboundedProfile(name) => format!("scenery.{name}"),
        _ => "scenery".to_string(),
    };
    ConfigError::at(path, err.to_string())
}

impl FileConfig {
    pub fn resolve(self) -> Result<LabConfig, ConfigError> {
        let walk = match self.walk {
            WalkSpec::Preset(name) => walk_preset(&name)
                .ok_or_else(|| ConfigError::at("walk", format!("unknown walk preset `{name}`")))?,
            WalkSpec::Model(m) => m,
        };
        let scenery = match self.scenery {
            ScenerySpec::Preset(name) => scenery_preset(&name)
                .ok_or_else(|| ConfigError::at("scenery", format!("unknown scenery preset `{name}`")))?,
            ScenerySpec::Model(m) => m,
        };
        if self.tau.is_some() && self.mode != Some(Mode::Theorem3) {
            return Err(ConfigError::at("tau", "tau is only meaningful with mode \"theorem3\""));
        }
        let experiment = ExperimentConfig {
            walk,
            scenery,
            n_grid: self.n_grid,
            replicas: self.replicas,
            base_seed: self.seed,
            lambda: self.lambda,
            tau: self.tau,
            delta: self.delta,
            epsilon: self.epsilon,
            expect_divergent: self.expect_divergent,
        };
        experiment.validate().map_err(experiment_error)?;
        let lags = self.lags.unwrap_or_else(|| (1..=DEFAULT_MAX_LAG).collect());
        if lags.is_empty() || lags.contains(&0) {
            return Err(ConfigError::at("lags", "lags must be a nonempty list of positive integers"));
        }
        let samples = self.samples.unwrap_or(DEFAULT_SAMPLES);
        if let Some(points) = &self.synthetic_points {
            if points.len() < 2 || points.iter().any(|&(n, v)| !(n > 0.0) || !(v > 0.0)) {
                return Err(ConfigError::at(
                    "synthetic_points",
                    "need at least two points with positive coordinates",
                ));
            }
        }
        Ok(LabConfig {
            experiment,
            mode: self.mode,
            lags,
            samples,
            rules: self.rules,
            synthetic_points: self.synthetic_points,
        })
    }
}

/// Parses a configuration from JSON text. A run manifest is accepted too: its
/// `resolved_config` entry is used.
pub fn parse_config_str(text: &str) -> Result<LabConfig, ConfigError> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ConfigError::at("", format!("malformed JSON: {e}")))?;
    if let Some(resolved) = value.get_mut("resolved_config") {
        value = resolved.take();
    }
    let file: FileConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::at(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })?;
    file.resolve()
}

pub fn parse_config(path: &Path) -> Result<LabConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::at("", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}
