use rayon::prelude::*;
use serde::Serialize;

use super::kernel::{simulate, KernelOptions, Normalization};
use super::{ExperimentConfig, ExperimentError, Result, Row};
use crate::localtime::{local_time, self_intersection};
use crate::stats::{loglog_fit, mean_var, LinearFit};
use crate::walk::{WalkModel, WalkPath};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n: usize,
    /// Monte Carlo `E alpha(n, 0) = E sum_i N_n(i)^2`.
    pub mean: f64,
    pub std_error: f64,
    /// Monte Carlo `E alpha(n, 0)^2`.
    pub mean_sq: f64,
}

/// Constant of `E alpha(n,0) <= C n^e` fitted at the smallest grid point and
/// frozen; `ratios[k]` is the realized `E alpha / (C n^e)` at grid point `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub exponent: f64,
    pub constant: f64,
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    #[serde(skip)]
    pub rows: Vec<Row>,
    pub points: Vec<ScalingPoint>,
    /// Slope of `log E alpha(n,0)` against `log n`.
    pub fit: Option<LinearFit>,
    /// Slope of `log E alpha(n,0)^2` against `log n`.
    pub p2_fit: Option<LinearFit>,
    /// Exponent the slope is compared against.
    pub target: f64,
    pub calibration: Option<Calibration>,
}

fn points_from(n_grid: &[usize], samples: impl Fn(usize) -> Vec<f64>) -> Vec<ScalingPoint> {
    n_grid
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let xs = samples(j);
            let (mean, var) = mean_var(&xs);
            let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
            ScalingPoint {
                n,
                mean,
                std_error: (var / xs.len() as f64).sqrt(),
                mean_sq: mean_var(&sq).0,
            }
        })
        .collect()
}

fn report(rows: Vec<Row>, points: Vec<ScalingPoint>, target: f64) -> ScalingReport {
    let fit = loglog_fit(&points.iter().map(|p| (p.n as f64, p.mean)).collect::<Vec<_>>());
    let p2_fit = loglog_fit(&points.iter().map(|p| (p.n as f64, p.mean_sq)).collect::<Vec<_>>());
    let calibration = points.first().filter(|p| p.mean > 0.0).map(|first| {
        let constant = first.mean / (first.n as f64).powf(target);
        Calibration {
            exponent: target,
            constant,
            ratios: points
                .iter()
                .map(|p| p.mean / (constant * (p.n as f64).powf(target)))
                .collect(),
        }
    });
    ScalingReport {
        rows,
        points,
        fit,
        p2_fit,
        target,
        calibration,
    }
}

fn scaling(config: &ExperimentConfig, target: f64) -> Result<ScalingReport> {
    let sim = simulate(config, &config.n_grid, KernelOptions::default())?;
    let rows = sim.rows(config, Normalization::CenteredOverN);
    let points = points_from(&config.n_grid, |j| sim.column(j, |c| c.alpha0 as f64));
    Ok(report(rows, points, target))
}

/// Growth of `E alpha(n, 0)` for a lattice walk, compared with `n^{3/2}`;
/// the second-moment slope is compared with 3.
pub fn scaling_alpha(config: &ExperimentConfig) -> Result<ScalingReport> {
    if !matches!(config.walk, WalkModel::IidLattice { .. }) {
        return Err(ExperimentError::Unsupported("scaling-alpha requires an i.i.d. lattice walk".into()));
    }
    scaling(config, 1.5)
}

/// Growth of `sum_i E N_n(i)^2` for an fGn walk, compared with `n^{2 - H}`.
pub fn scaling_occupancy(config: &ExperimentConfig) -> Result<ScalingReport> {
    let WalkModel::FgnGaussian { hurst } = config.walk else {
        return Err(ExperimentError::Unsupported(
            "scaling-occupancy requires a fractional Gaussian walk".into(),
        ));
    };
    scaling(config, 2.0 - hurst)
}

/// Self-intersection scaling for an arbitrary path generator
/// `path(n, replica)`, without a scenery.
pub fn alpha_scaling_with<F>(n_grid: &[usize], replicas: usize, target: f64, path: F) -> ScalingReport
where
    F: Fn(usize, usize) -> WalkPath + Sync,
{
    let points = points_from(n_grid, |j| {
        let n = n_grid[j];
        (0..replicas)
            .into_par_iter()
            .map(|r| self_intersection(&local_time(&path(n, r)).expect("paths are nonempty")) as f64)
            .collect()
    });
    report(Vec::new(), points, target)
}
