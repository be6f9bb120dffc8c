//! Theta-coefficient bounds for the shipped scenery models.
//!
//! For `xi_i = mu_i + sigma_i sum_k a_k eps_{i-k}`, the part of `xi_{p+j}` that
//! is measurable with respect to the past `sigma(eps_l, l <= p)` is
//! `sigma_{p+j} sum_{k >= j} a_k eps_{p+j-k}`, which gives the causal-shift
//! bound
//!
//! ```text
//! theta_{1,q}(j) <= sup_i sigma_i * ||eps - E eps||_q * sum_{k >= j} |a_k|
//! ```
//!
//! with `q = 2` for the L2 coefficient and `q = 1` for the L1 coefficient.
//! The covariance check compares Monte Carlo covariances against
//! `sqrt(Var xi_i) * theta_{1,2}(j)`.

use serde::Serialize;
use thiserror::Error;

use crate::rng::{derive, Stream};
use crate::scenery::{gen_scenery, scenery_mean, MaCoeffs, SceneryError, SceneryKind, SceneryModel, SiteWindow};

#[derive(Debug, Error, PartialEq)]
pub enum DependenceError {
    #[error("theta bound requires a causal moving-average scenery, got {0:?}")]
    NotMovingAverage(SceneryKind),
    #[error("lag must be at least 1")]
    ZeroLag,
    #[error("at least {min} samples required, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error(transparent)]
    Scenery(#[from] SceneryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaOrder {
    /// L2 coefficient `theta_{1,2}`.
    Theta12,
    /// L1 coefficient `theta_{1,1}`.
    Theta11,
}

impl ThetaOrder {
    fn norm_index(self) -> u8 {
        match self {
            ThetaOrder::Theta12 => 2,
            ThetaOrder::Theta11 => 1,
        }
    }
}

/// Lag-indexed upper bound on a theta coefficient. Non-increasing in the lag.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaBound {
    pub model: SceneryModel,
    pub order: ThetaOrder,
    scale: f64,
    coeffs: MaCoeffs,
}

impl ThetaBound {
    /// Bound for any shipped model; i.i.d. sceneries have `a = [1]`.
    pub fn new(model: &SceneryModel, order: ThetaOrder) -> Self {
        let scale = model.sigma.sup_abs() * model.innovation.centered_norm(order.norm_index());
        ThetaBound {
            model: model.clone(),
            order,
            scale,
            coeffs: model.coefficient_rule(),
        }
    }

    pub fn at(&self, lag: usize) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        self.scale * self.coeffs.tail_abs(lag)
    }
}

/// `theta_{1,q}(j)` bound of a causal moving-average scenery, `j >= 1`.
pub fn theta_bound_ma(model: &SceneryModel, order: ThetaOrder, lag: usize) -> Result<f64, DependenceError> {
    if model.kind != SceneryKind::CausalMa {
        return Err(DependenceError::NotMovingAverage(model.kind));
    }
    if lag == 0 {
        return Err(DependenceError::ZeroLag);
    }
    model.validate()?;
    Ok(ThetaBound::new(model, order).at(lag))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summability {
    /// `sum_{l <= j} bound(l)` for `j = 0, 1, ...`.
    pub partial_sums: Vec<f64>,
    pub converged: bool,
}

impl Summability {
    /// Last partial sum when converged.
    pub fn limit(&self) -> Option<f64> {
        if self.converged {
            self.partial_sums.last().copied()
        } else {
            None
        }
    }
}

/// Accumulates `bound(0) + bound(1) + ...` until an increment drops below
/// `tolerance`, or `lag_cap` terms have been added without that happening.
pub fn summability_check(bound: &ThetaBound, tolerance: f64, lag_cap: usize) -> Summability {
    let mut partial_sums = Vec::new();
    let mut acc = 0.0;
    for lag in 0..lag_cap {
        let term = bound.at(lag);
        if !term.is_finite() {
            return Summability {
                partial_sums,
                converged: false,
            };
        }
        acc += term;
        partial_sums.push(acc);
        if term < tolerance {
            return Summability {
                partial_sums,
                converged: true,
            };
        }
    }
    Summability {
        partial_sums,
        converged: false,
    }
}

/// Lipschitz transform applied to the centered scenery before measuring
/// covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `max(0, xi - E xi)`.
    PositivePart,
    /// `max(0, E xi - xi)`.
    NegativePart,
}

impl Transform {
    fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::PositivePart => x.max(0.0),
            Transform::NegativePart => (-x).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceCheckOptions {
    pub lags: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    /// Left endpoints `i` of the probed pairs `(i, i + j)`.
    pub probes: Vec<i64>,
    pub transform: Transform,
    /// Truncation level for sceneries without a second moment; the check then
    /// uses `zeta = xi 1{xi < level}` and the L1 bound.
    pub truncation: f64,
}

impl Default for CovarianceCheckOptions {
    fn default() -> Self {
        CovarianceCheckOptions {
            lags: (1..=20).collect(),
            samples: 10_000,
            seed: 0,
            probes: vec![0],
            transform: Transform::Identity,
            truncation: 1024.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceRow {
    pub lag: usize,
    /// Probe with the largest `|Cov|`.
    pub site: i64,
    pub empirical: f64,
    pub std_error: f64,
    pub bound: f64,
    pub order: ThetaOrder,
    /// `|Cov| <= bound + 3 SE`.
    pub within: bool,
}

/// Minimum Monte Carlo sample size for the covariance check.
pub const MIN_COVARIANCE_SAMPLES: usize = 10_000;

/// Covariance check with default probes and the identity transform.
pub fn covariance_bound_check(
    model: &SceneryModel,
    lags: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<CovarianceRow>, DependenceError> {
    covariance_bound_check_with(
        model,
        &CovarianceCheckOptions {
            lags: lags.to_vec(),
            samples,
            seed,
            ..Default::default()
        },
    )
}

/// Monte Carlo `|Cov(f(xi_i), f(xi_{i+j}))|` against
/// `sqrt(Var f(xi_i)) * theta_{1,2}(j)`; for infinite-variance sceneries the
/// truncated variables are compared against `E|zeta - E zeta| * theta_{1,1}(j)`.
pub fn covariance_bound_check_with(
    model: &SceneryModel,
    opts: &CovarianceCheckOptions,
) -> Result<Vec<CovarianceRow>, DependenceError> {
    if opts.samples < MIN_COVARIANCE_SAMPLES {
        return Err(DependenceError::TooFewSamples {
            min: MIN_COVARIANCE_SAMPLES,
            got: opts.samples,
        });
    }
    model.validate()?;
    let heavy = !model.innovation.variance().is_finite();
    let order = if heavy { ThetaOrder::Theta11 } else { ThetaOrder::Theta12 };
    let theta = ThetaBound::new(model, order);

    let max_lag = opts.lags.iter().copied().max().unwrap_or(0) as i64;
    let lo = *opts.probes.iter().min().unwrap_or(&0);
    let hi = *opts.probes.iter().max().unwrap_or(&0) + max_lag;
    let window = SiteWindow::new(lo, hi);
    let width = window.len();

    // samples x width matrix of transformed, centered values
    let mut data = Vec::with_capacity(opts.samples * width);
    for s in 0..opts.samples {
        let sc = gen_scenery(model, window, derive(opts.seed, Stream::Sample, s as u64))?;
        for (i, v) in sc.iter() {
            let x = if heavy {
                if v < opts.truncation {
                    v
                } else {
                    0.0
                }
            } else {
                v - scenery_mean(model, i)
            };
            data.push(if heavy { x } else { opts.transform.apply(x) });
        }
    }
    let n = opts.samples as f64;
    let column = |k: usize| data.iter().skip(k).step_by(width).copied();
    let means: Vec<f64> = (0..width).map(|k| column(k).sum::<f64>() / n).collect();

    // scale factor multiplying theta: sqrt(Var) (L2) or E|x - Ex| (L1)
    let scale_at = |k: usize| -> f64 {
        if heavy {
            column(k).map(|x| (x - means[k]).abs()).sum::<f64>() / n
        } else if opts.transform == Transform::Identity {
            model.variance_at(lo + k as i64).sqrt()
        } else {
            (column(k).map(|x| (x - means[k]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        }
    };

    let mut rows = Vec::with_capacity(opts.lags.len());
    for &lag in &opts.lags {
        let mut best: Option<(i64, f64, f64)> = None;
        let mut bound = 0.0f64;
        for &p in &opts.probes {
            let a = (p - lo) as usize;
            let b = a + lag;
            let prods: Vec<f64> = column(a)
                .zip(column(b))
                .map(|(x, y)| (x - means[a]) * (y - means[b]))
                .collect();
            let (cov, var) = crate::stats::mean_var(&prods);
            let se = (var / n).sqrt();
            bound = bound.max(scale_at(a) * theta.at(lag));
            if best.is_none_or(|(_, c, _)| cov.abs() > c.abs()) {
                best = Some((p, cov, se));
            }
        }
        let (site, empirical, std_error) = best.unwrap_or((0, 0.0, 0.0));
        rows.push(CovarianceRow {
            lag,
            site,
            empirical,
            std_error,
            bound,
            order,
            within: empirical.abs() <= bound + 3.0 * std_error,
        });
    }
    Ok(rows)
}
