use serde::Serialize;

use super::kernel::{simulate, summarize, KernelOptions, Normalization};
use super::{ExperimentConfig, ExperimentError, ExperimentReport, NamedFit, Result};
use crate::stats::{loglog_fit, median, quantile};

/// Normalization exponents reported by [`run_theorem3`].
pub const THEOREM3_TAUS: [f64; 2] = [0.8, 1.0];

/// Strong-law diagnostic for `(Z_n - E Z_n) / n`.
///
/// Centering is conditional on the path: `Z_n - sum_i N_n(i) E xi_i`, whose
/// mean given the path is exactly zero because walk and scenery are
/// independent. The report carries the log-log slope of the median
/// `|Z_centered| / n` against `n` (expected near `-1/4` for lattice walks,
/// whose fluctuations are of order `n^{3/4}`).
pub fn run_slln(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let sim = simulate(config, &config.n_grid, KernelOptions::default())?;
    let rows = sim.rows(config, Normalization::CenteredOverN);
    let levels = summarize(&rows);

    let mut slopes = Vec::new();
    let pts: Vec<(f64, f64)> = levels.iter().map(|l| (l.n as f64, l.median_abs_norm)).collect();
    if let Some(fit) = loglog_fit(&pts) {
        slopes.push(NamedFit {
            name: "median_abs_centered_over_n".into(),
            fit,
        });
    }
    let mut warnings = Vec::new();
    if config.walk.range_exponent() <= 0.5 && matches!(config.walk, crate::walk::WalkModel::FgnGaussian { .. }) {
        warnings.push("hurst <= 1/2: Gaussian-walk results are an extrapolation".into());
    }
    Ok(ExperimentReport {
        rows,
        levels,
        slopes,
        truncation: Vec::new(),
        warnings,
    })
}

/// Truncation bookkeeping at one sample size `n`, with `zeta_i = xi_i 1{xi_i < n}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationLevel {
    pub n: usize,
    /// Mean over replicas of `#{i visited : xi_i >= n}`.
    pub mean_mismatch: f64,
    /// `P(xi_0 >= n)` from the closed-form tail, when available.
    pub tail_prob: Option<f64>,
    /// Expected mean mismatch given the simulated paths:
    /// `mean_r(R_r) * P(xi_0 >= n)` with `R_r` the number of distinct visited
    /// sites of replica `r`.
    pub predicted: Option<f64>,
    /// Binomial standard error of `mean_mismatch` around `predicted`.
    pub std_error: Option<f64>,
    pub within_3se: Option<bool>,
    /// Window bound `(2 floor(n^{1/2 + delta}) + 1) * P(xi_0 >= n)`.
    pub window_bound: Option<f64>,
    pub median_abs_truncated_norm: f64,
    pub q90_abs_truncated_norm: f64,
}

/// Diagnostic for `Z_n / n^tau` with an identically distributed scenery of
/// finite mean, plus the truncation scheme `zeta_i = xi_i 1{xi_i < n}`.
///
/// `z_norm` is `Z_n / n^tau` with the configured `tau` (default 0.8); the
/// levels also report `|Z_n| / n`. Because `Z_n` grows like `n E xi_0`, the
/// centered column is `Z_n - (n + 1) E xi_0`.
pub fn run_theorem3(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let tau = config.tau.unwrap_or(THEOREM3_TAUS[0]);
    let mut warnings = Vec::new();
    if tau <= 0.75 {
        if !config.expect_divergent {
            return Err(ExperimentError::TauTooSmall { tau });
        }
        warnings.push(format!(
            "tau = {tau} <= 3/4: Z_n / n^tau is expected to diverge (fluctuations of order n^(3/4))"
        ));
    }
    if !config.scenery.identically_distributed() {
        return Err(ExperimentError::Unsupported(
            "identically distributed scenery required (constant mu and sigma profiles)".into(),
        ));
    }
    if config.scenery.mu.at(0) + config.scenery.innovation.mean() != 0.0 && tau < 1.0 {
        warnings.push("E xi_0 != 0 with tau < 1: z_norm grows like n^(1 - tau); compare z_centered instead".into());
    }

    let sim = simulate(
        config,
        &config.n_grid,
        KernelOptions {
            site_moments: false,
            truncation: true,
        },
    )?;
    let rows = sim.rows(config, Normalization::OverNTau(tau));
    let levels = summarize(&rows);

    let mut slopes = Vec::new();
    let pts: Vec<(f64, f64)> = levels.iter().map(|l| (l.n as f64, l.q90_abs_norm)).collect();
    if let Some(fit) = loglog_fit(&pts) {
        slopes.push(NamedFit {
            name: "q90_abs_z_over_n_tau".into(),
            fit,
        });
    }
    let pts: Vec<(f64, f64)> = levels.iter().map(|l| (l.n as f64, l.q90_abs_z_over_n)).collect();
    if let Some(fit) = loglog_fit(&pts) {
        slopes.push(NamedFit {
            name: "q90_abs_z_over_n".into(),
            fit,
        });
    }

    let replicas = config.replicas as f64;
    let truncation = sim
        .checkpoints
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let mismatch = sim.column(j, |c| c.mismatch as f64);
            let distinct = sim.column(j, |c| c.distinct as f64);
            let truncated = sim.column(j, |c| ((c.z - c.truncated_excess) / (n as f64).powf(tau)).abs());
            let mean_mismatch = mismatch.iter().sum::<f64>() / replicas;
            let tail_prob = config.scenery.tail_prob(0, n as f64);
            let (predicted, std_error, within_3se, window_bound) = match tail_prob {
                Some(p) => {
                    let total: f64 = distinct.iter().sum();
                    let predicted = total * p / replicas;
                    let se = (total * p * (1.0 - p)).sqrt() / replicas;
                    let window = 2.0 * (n as f64).powf(config.walk.range_exponent() + config.delta).floor() + 1.0;
                    (
                        Some(predicted),
                        Some(se),
                        Some((mean_mismatch - predicted).abs() <= 3.0 * se),
                        Some(window * p),
                    )
                }
                None => (None, None, None, None),
            };
            TruncationLevel {
                n,
                mean_mismatch,
                tail_prob,
                predicted,
                std_error,
                within_3se,
                window_bound,
                median_abs_truncated_norm: median(&truncated),
                q90_abs_truncated_norm: quantile(&truncated, 0.9),
            }
        })
        .collect();

    Ok(ExperimentReport {
        rows,
        levels,
        slopes,
        truncation,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenery::{Innovation, MaCoeffs, Profile, SceneryModel};
    use crate::walk::WalkModel;

    #[test]
    fn degenerate_scenery_centers_to_zero() {
        let c = ExperimentConfig::new(
            WalkModel::rademacher(),
            SceneryModel::iid(Innovation::Degenerate { value: 2.5 }),
            vec![10, 100, 1000],
        )
        .with_replicas(10);
        let r = run_slln(&c).unwrap();
        assert!(r.rows.iter().all(|row| row.z_centered == 0.0 && row.z_norm == 0.0));
        assert!(r.rows.iter().all(|row| row.z == 2.5 * (row.n + 1) as f64));
        assert!(r.centered_mean_within_3se());
    }

    #[test]
    fn constant_scenery_over_n() {
        let c = ExperimentConfig::new(
            WalkModel::rademacher(),
            SceneryModel::iid(Innovation::Degenerate { value: 1.0 }),
            vec![8, 64, 512],
        )
        .with_replicas(5)
        .with_tau(1.0);
        let r = run_theorem3(&c).unwrap();
        for row in &r.rows {
            assert_eq!(row.z_norm, (row.n + 1) as f64 / row.n as f64);
        }
        for t in &r.truncation {
            // xi = 1 < n at every level
            assert_eq!(t.mean_mismatch, 0.0);
            assert_eq!(t.tail_prob, Some(0.0));
        }
    }

    #[test]
    fn small_tau_needs_opt_in() {
        let mut c = ExperimentConfig::new(WalkModel::rademacher(), SceneryModel::pareto(1.5), vec![16, 64])
            .with_replicas(4)
            .with_tau(0.7);
        assert_eq!(run_theorem3(&c), Err(ExperimentError::TauTooSmall { tau: 0.7 }));
        c.expect_divergent = true;
        let r = run_theorem3(&c).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn theorem3_rejects_non_identical_sceneries() {
        let c = ExperimentConfig::new(
            WalkModel::rademacher(),
            SceneryModel::causal_ma(Innovation::Gaussian, MaCoeffs::Geometric { rho: 0.5 }).with_mu(
                Profile::Periodic {
                    base: 0.0,
                    amplitude: 1.0,
                    period: 7,
                },
            ),
            vec![16],
        );
        assert!(matches!(run_theorem3(&c), Err(ExperimentError::Unsupported(_))));
    }

    #[test]
    fn truncated_statistic_accounts_for_every_large_value() {
        // With a level below every value, all visited sites mismatch and the
        // truncated statistic vanishes.
        let c = ExperimentConfig::new(
            WalkModel::rademacher(),
            SceneryModel::iid(Innovation::Degenerate { value: 50.0 }),
            vec![10, 20],
        )
        .with_replicas(6)
        .with_tau(1.0);
        let r = run_theorem3(&c).unwrap();
        for t in &r.truncation {
            assert_eq!(t.median_abs_truncated_norm, 0.0);
            assert!(t.mean_mismatch >= 1.0);
            assert_eq!(t.predicted, Some(t.mean_mismatch));
            assert_eq!(t.within_3se, Some(true));
        }
    }
}
