//! Replicated simulations and finite-n diagnostics.
//!
//! Each replica draws one walk of length `max(n_grid)` and one independent
//! scenery, then reads every statistic off the path prefixes at the grid
//! points. A replica depends only on `(config, replica index)`: walk seeds and
//! scenery seeds are derived from disjoint streams, and replicas run in
//! parallel on the ambient rayon pool with results reassembled in replica
//! order.

mod kernel;
mod proof;
mod scaling;
mod slln;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dependence::DependenceError;
use crate::localtime::LocalTimeError;
use crate::scenery::{SceneryError, SceneryModel};
use crate::stats::LinearFit;
use crate::walk::{WalkError, WalkModel};

pub use kernel::{scenery_half_width, simulate, Checkpoint, KernelOptions, Normalization, Simulation, Trace};
pub use proof::{
    geometric_subsequence, subsequence_diagnostic, variance_bound_check, BcTerm, SubsequenceReport,
    VarianceBoundReport, VarianceBoundRow, SUBSEQUENCE_FIT_MIN_K,
};
pub use scaling::{alpha_scaling_with, scaling_alpha, scaling_occupancy, Calibration, ScalingPoint, ScalingReport};
pub use slln::{run_slln, run_theorem3, TruncationLevel, THEOREM3_TAUS};

pub const DEFAULT_LAMBDA: f64 = 1.5;
pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_REPLICAS: usize = 200;
pub const DEFAULT_EPSILON: f64 = 0.1;
/// Slack multiplying the iterated-logarithm envelope in `lil_ok`.
pub const LIL_SLACK: f64 = 1.25;

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("invalid configuration at `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error("replica {replica} visits site {site} outside the scenery window [-{half_width}, {half_width}]")]
    WindowOverflow { replica: usize, site: i64, half_width: i64 },
    #[error("tau = {tau} <= 3/4: fluctuations of order n^(3/4) make Z_n / n^tau diverge; set expect_divergent to run anyway")]
    TauTooSmall { tau: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Scenery(#[from] SceneryError),
    #[error(transparent)]
    LocalTime(#[from] LocalTimeError),
    #[error(transparent)]
    Dependence(#[from] DependenceError),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub walk: WalkModel,
    pub scenery: SceneryModel,
    /// Strictly increasing sample sizes.
    pub n_grid: Vec<usize>,
    pub replicas: usize,
    pub base_seed: u64,
    /// Geometric subsequence ratio, `> 1`.
    pub lambda: f64,
    /// Normalization exponent for the identically distributed runs.
    pub tau: Option<f64>,
    /// Window exponent slack: local times vanish beyond `n^(e + delta)`.
    pub delta: f64,
    /// Deviation level in the Chebyshev summands.
    pub epsilon: f64,
    /// Allows `tau <= 3/4`, which is expected to diverge.
    pub expect_divergent: bool,
}

impl ExperimentConfig {
    pub fn new(walk: WalkModel, scenery: SceneryModel, n_grid: Vec<usize>) -> Self {
        ExperimentConfig {
            walk,
            scenery,
            n_grid,
            replicas: DEFAULT_REPLICAS,
            base_seed: 0,
            lambda: DEFAULT_LAMBDA,
            tau: None,
            delta: DEFAULT_DELTA,
            epsilon: DEFAULT_EPSILON,
            expect_divergent: false,
        }
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |key, reason: &str| {
            Err(ExperimentError::InvalidConfig {
                key,
                reason: reason.to_string(),
            })
        };
        if self.n_grid.is_empty() {
            return invalid("n_grid", "must contain at least one sample size");
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return invalid("n_grid", "must be strictly increasing");
        }
        if self.n_grid[0] == 0 {
            return invalid("n_grid", "sample sizes must be at least 1");
        }
        if self.replicas == 0 {
            return invalid("replicas", "must be at least 1");
        }
        if !(self.lambda > 1.0) || !self.lambda.is_finite() {
            return invalid("lambda", "must satisfy lambda > 1");
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return invalid("delta", "must satisfy delta > 0");
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return invalid("epsilon", "must satisfy epsilon > 0");
        }
        if let Some(tau) = self.tau {
            if !tau.is_finite() || tau <= 0.0 {
                return invalid("tau", "must be a positive real");
            }
        }
        self.walk.validate()?;
        self.scenery.validate()?;
        Ok(())
    }

    pub fn max_n(&self) -> usize {
        *self.n_grid.last().expect("validated grid is nonempty")
    }
}

/// One `(n, replica)` observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub n: usize,
    pub replica: usize,
    pub z: f64,
    /// `Z_n - sum_i N_n(i) E xi_i`.
    pub z_centered: f64,
    /// `Z_centered / n`, or `Z_n / n^tau` for identically distributed runs.
    pub z_norm: f64,
    pub alpha0: u64,
    pub sum_n2: u64,
    pub max_abs_s: i64,
    pub window_ok: bool,
    pub lil_ok: bool,
}

/// Cross-replica aggregates at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub n: usize,
    pub replicas: usize,
    pub mean_z: f64,
    pub var_z: f64,
    pub mean_centered: f64,
    pub se_centered: f64,
    pub median_abs_norm: f64,
    pub q90_abs_norm: f64,
    /// 90th percentile of `|Z_n| / n`.
    pub q90_abs_z_over_n: f64,
    pub mean_alpha0: f64,
    pub lil_exceed_fraction: f64,
    pub window_fail_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedFit {
    pub name: String,
    #[serde(flatten)]
    pub fit: LinearFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    #[serde(skip)]
    pub rows: Vec<Row>,
    pub levels: Vec<LevelSummary>,
    pub slopes: Vec<NamedFit>,
    pub truncation: Vec<TruncationLevel>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn slope(&self, name: &str) -> Option<&LinearFit> {
        self.slopes.iter().find(|s| s.name == name).map(|s| &s.fit)
    }

    /// Medians of `|z_norm|` strictly decrease along the grid.
    pub fn median_strictly_decreasing(&self) -> bool {
        self.levels
            .windows(2)
            .all(|w| w[1].median_abs_norm < w[0].median_abs_norm)
    }

    /// 90th percentiles of `|z_norm|` strictly decrease along the grid.
    pub fn q90_strictly_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].q90_abs_norm < w[0].q90_abs_norm)
    }

    /// Mean of the centered statistic within 3 standard errors of 0 at every
    /// level.
    pub fn centered_mean_within_3se(&self) -> bool {
        self.levels
            .iter()
            .all(|l| l.mean_centered.abs() <= 3.0 * l.se_centered)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenery::Innovation;

    fn base() -> ExperimentConfig {
        ExperimentConfig::new(
            WalkModel::rademacher(),
            SceneryModel::iid(Innovation::Gaussian),
            vec![16, 64],
        )
    }

    #[test]
    fn validation_names_keys() {
        assert!(base().validate().is_ok());
        let err = |c: ExperimentConfig| match c.validate() {
            Err(ExperimentError::InvalidConfig { key, .. }) => key,
            other => panic!("{other:?}"),
        };
        assert_eq!(err(base().with_lambda(0.9)), "lambda");
        assert_eq!(err(base().with_replicas(0)), "replicas");
        let mut c = base();
        c.n_grid = vec![64, 16];
        assert_eq!(err(c), "n_grid");
        let mut c = base();
        c.delta = 0.0;
        assert_eq!(err(c), "delta");
        let mut c = base();
        c.scenery = SceneryModel::pareto(0.9);
        assert!(matches!(c.validate(), Err(ExperimentError::Scenery(_))));
    }
}
