use serde::Serialize;

use super::kernel::{simulate, KernelOptions, Normalization};
use super::{ExperimentConfig, ExperimentError, Result, Row};
use crate::dependence::{summability_check, ThetaBound, ThetaOrder};
use crate::scenery::SceneryKind;
use crate::stats::{mean_var, ols, variance_std_error, LinearFit};

/// Subsequence terms with `k_n` below this are excluded from the decay fit.
pub const SUBSEQUENCE_FIT_MIN_K: usize = 100;

const THETA_SUM_TOLERANCE: f64 = 1e-12;
const THETA_SUM_LAG_CAP: usize = 1_000_000;

/// Distinct `(n, k_n = floor(lambda^n))` for `n >= 1` with `k_n <= budget`.
pub fn geometric_subsequence(lambda: f64, budget: usize) -> Result<Vec<(u32, usize)>> {
    if !(lambda > 1.0) || !lambda.is_finite() {
        return Err(ExperimentError::InvalidConfig {
            key: "lambda",
            reason: "must satisfy lambda > 1".into(),
        });
    }
    let mut out: Vec<(u32, usize)> = Vec::new();
    for index in 1u32.. {
        let k = lambda.powi(index as i32).floor();
        if k > budget as f64 {
            break;
        }
        let k = k as usize;
        if out.last().is_none_or(|&(_, prev)| prev < k) {
            out.push((index, k));
        }
    }
    Ok(out)
}

/// One Chebyshev summand `Var(Z_{k_n}) / (epsilon^2 k_n^2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BcTerm {
    pub index: u32,
    pub k: usize,
    pub var_z: f64,
    pub summand: f64,
    pub partial_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsequenceReport {
    #[serde(skip)]
    pub rows: Vec<Row>,
    pub lambda: f64,
    pub epsilon: f64,
    pub terms: Vec<BcTerm>,
    /// Fit of `log summand` against the subsequence index over terms with
    /// `k_n >= SUBSEQUENCE_FIT_MIN_K`.
    pub decay_fit: Option<LinearFit>,
    /// `exp(decay slope)`: the observed ratio of consecutive summands.
    pub decay_ratio: Option<f64>,
    /// `lambda^{-(2 - v)}` with `v` the variance growth exponent (3/2 for
    /// lattice walks, `2 - H` for fGn walks).
    pub expected_ratio: f64,
}

/// Borel-Cantelli sums along `k_n = floor(lambda^n)` up to `max(n_grid)`.
pub fn subsequence_diagnostic(config: &ExperimentConfig, epsilon: f64) -> Result<SubsequenceReport> {
    config.validate()?;
    if !(epsilon > 0.0) {
        return Err(ExperimentError::InvalidConfig {
            key: "epsilon",
            reason: "must satisfy epsilon > 0".into(),
        });
    }
    let seq = geometric_subsequence(config.lambda, config.max_n())?;
    let ks: Vec<usize> = seq.iter().map(|&(_, k)| k).collect();
    let sim = simulate(config, &ks, KernelOptions::default())?;
    let rows = sim.rows(config, Normalization::CenteredOverN);

    let mut partial = 0.0;
    let terms: Vec<BcTerm> = seq
        .iter()
        .enumerate()
        .map(|(j, &(index, k))| {
            let (_, var_z) = mean_var(&sim.column(j, |c| c.z));
            let summand = var_z / (epsilon * epsilon * (k * k) as f64);
            partial += summand;
            BcTerm {
                index,
                k,
                var_z,
                summand,
                partial_sum: partial,
            }
        })
        .collect();

    let tail: Vec<&BcTerm> = terms
        .iter()
        .filter(|t| t.k >= SUBSEQUENCE_FIT_MIN_K && t.summand > 0.0)
        .collect();
    let xs: Vec<f64> = tail.iter().map(|t| t.index as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|t| t.summand.ln()).collect();
    let decay_fit = ols(&xs, &ys);
    let decay_ratio = decay_fit.as_ref().map(|f| f.slope.exp());
    let variance_exponent = 2.0 - config.walk.range_exponent();
    Ok(SubsequenceReport {
        rows,
        lambda: config.lambda,
        epsilon,
        terms,
        decay_fit,
        decay_ratio,
        expected_ratio: config.lambda.powf(variance_exponent - 2.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceBoundRow {
    pub n: usize,
    pub var_z: f64,
    pub var_z_se: f64,
    /// Monte Carlo `sum_i Var(N_n(i))`.
    pub sum_var_local_time: f64,
    /// `(sup Var xi + sqrt(sup Var xi) sum_l theta_{1,2}(l)) * sum_i Var N_n(i)`.
    pub rhs: f64,
    /// `var_z / (C rhs)` with `C` frozen at the first grid point.
    pub ratio: Option<f64>,
    pub ratio_se: Option<f64>,
    /// `ratio <= 1 + 3 SE`, or `var_z <= rhs` when no constant can be fitted.
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceBoundReport {
    #[serde(skip)]
    pub rows: Vec<Row>,
    pub sup_variance: f64,
    pub theta_sum: f64,
    /// Calibrated constant, `None` when the first right-hand side vanishes.
    pub constant: Option<f64>,
    pub levels: Vec<VarianceBoundRow>,
}

impl VarianceBoundReport {
    pub fn all_within(&self) -> bool {
        self.levels.iter().all(|l| l.within)
    }
}

/// Monte Carlo `Var(Z_n)` against the variance bound built from the scenery's
/// analytic constants and the Monte Carlo local-time variances.
pub fn variance_bound_check(config: &ExperimentConfig) -> Result<VarianceBoundReport> {
    config.validate()?;
    if config.scenery.kind == SceneryKind::HeavyTailIdent || !config.scenery.innovation.variance().is_finite() {
        return Err(ExperimentError::Unsupported(
            "variance bound needs a finite-variance i.i.d. or moving-average scenery".into(),
        ));
    }
    let sup_variance = config.scenery.sup_variance();
    let theta = summability_check(
        &ThetaBound::new(&config.scenery, ThetaOrder::Theta12),
        THETA_SUM_TOLERANCE,
        THETA_SUM_LAG_CAP,
    );
    let theta_sum = theta.limit().ok_or_else(|| {
        ExperimentError::Unsupported("theta_{1,2} bounds are not summable within the lag cap".into())
    })?;
    let scenery_const = sup_variance + sup_variance.sqrt() * theta_sum;

    let sim = simulate(
        config,
        &config.n_grid,
        KernelOptions {
            site_moments: true,
            truncation: false,
        },
    )?;
    let moments = sim.moments.as_ref().expect("site moments requested");
    let rows = sim.rows(config, Normalization::CenteredOverN);

    let raw: Vec<(usize, f64, f64, f64, f64)> = config
        .n_grid
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let z = sim.column(j, |c| c.z);
            let (_, var_z) = mean_var(&z);
            let var_z_se = variance_std_error(&z);
            let sum_var = moments.sum_of_variances(j, config.replicas);
            (n, var_z, var_z_se, sum_var, scenery_const * sum_var)
        })
        .collect();

    let (_, v0, se0, _, rhs0) = raw[0];
    let constant = (rhs0 > 0.0).then(|| v0 / rhs0);
    let levels = raw
        .iter()
        .map(|&(n, var_z, var_z_se, sum_var, rhs)| {
            let (ratio, ratio_se, within) = match constant {
                Some(c) if c > 0.0 && rhs > 0.0 => {
                    let ratio = var_z / (c * rhs);
                    let rel = ((var_z_se / var_z).powi(2) + (se0 / v0).powi(2)).sqrt();
                    let se = ratio * rel;
                    (Some(ratio), Some(se), ratio <= 1.0 + 3.0 * se)
                }
                _ => (None, None, var_z <= rhs),
            };
            VarianceBoundRow {
                n,
                var_z,
                var_z_se,
                sum_var_local_time: sum_var,
                rhs,
                ratio,
                ratio_se,
                within,
            }
        })
        .collect();

    Ok(VarianceBoundReport {
        rows,
        sup_variance,
        theta_sum,
        constant,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenery::{Innovation, SceneryModel};
    use crate::walk::WalkModel;

    #[test]
    fn subsequence_indices() {
        let s = geometric_subsequence(2.0, 100).unwrap();
        assert!(s.contains(&(3, 8)));
        assert_eq!(s.last(), Some(&(6, 64)));
        let s = geometric_subsequence(1.5, 10).unwrap();
        // floor(1.5^n): 1, 2, 3, 5, 7
        assert_eq!(s, vec![(1, 1), (2, 2), (3, 3), (4, 5), (5, 7)]);
        let s = geometric_subsequence(1.1, 3).unwrap();
        // 1.1, 1.21, 1.33, 1.46, 1.61, 1.77, 1.95, 2.14, ...: duplicates dropped
        assert_eq!(s[0], (1, 1));
        assert_eq!(s[1], (8, 2));
        assert!(geometric_subsequence(1.0, 10).is_err());
        assert!(geometric_subsequence(0.5, 10).is_err());
    }

    #[test]
    fn degenerate_scenery_has_zero_summands() {
        let c = ExperimentConfig::new(
            WalkModel::rademacher(),
            SceneryModel::iid(Innovation::Degenerate { value: 3.0 }),
            vec![1000],
        )
        .with_replicas(10);
        let r = subsequence_diagnostic(&c, 0.1).unwrap();
        assert!(r.terms.iter().all(|t| t.summand == 0.0));
        assert!(r.decay_ratio.is_none());
        assert!(subsequence_diagnostic(&c, 0.0).is_err());
    }

    #[test]
    fn degenerate_variance_bound_holds_trivially() {
        let c = ExperimentConfig::new(
            WalkModel::rademacher(),
            SceneryModel::iid(Innovation::Degenerate { value: 3.0 }),
            vec![64, 256],
        )
        .with_replicas(20);
        let r = variance_bound_check(&c).unwrap();
        assert!(r.constant.is_none());
        for l in &r.levels {
            assert_eq!(l.var_z, 0.0);
            assert_eq!(l.rhs, 0.0);
            assert!(l.within);
        }
    }

    #[test]
    fn heavy_tail_is_rejected() {
        let c = ExperimentConfig::new(WalkModel::rademacher(), SceneryModel::pareto(1.5), vec![64]);
        assert!(matches!(variance_bound_check(&c), Err(ExperimentError::Unsupported(_))));
    }

    #[test]
    fn local_time_variance_sum_matches_direct_estimate() {
        let c = ExperimentConfig::new(WalkModel::rademacher(), SceneryModel::iid(Innovation::Gaussian), vec![50])
            .with_replicas(30)
            .with_seed(4);
        let r = variance_bound_check(&c).unwrap();
        // recompute sum_i Var N(i) from explicit paths
        use crate::localtime::local_time;
        use crate::rng::{derive, Stream};
        use crate::walk::gen_iid_walk;
        let profiles: Vec<_> = (0..30u64)
            .map(|rep| local_time(&gen_iid_walk(&c.walk, 50, derive(4, Stream::Walk, rep)).unwrap()).unwrap())
            .collect();
        let mut total = 0.0;
        for site in -50..=50 {
            let xs: Vec<f64> = profiles.iter().map(|p| p.get(site) as f64).collect();
            total += mean_var(&xs).1;
        }
        assert!((r.levels[0].sum_var_local_time - total).abs() < 1e-9 * total);
        assert_eq!(r.theta_sum, 1.0);
        assert_eq!(r.sup_variance, 1.0);
    }
}
