use rayon::prelude::*;

use super::{ExperimentConfig, ExperimentError, LevelSummary, Result, Row, LIL_SLACK};
use crate::rng::{derive, Stream};
use crate::scenery::{gen_scenery, SiteWindow};
use crate::stats::{mean_var, median, quantile, std_error};
use crate::walk::{WalkModel, WalkSource};

/// Half-width `M` of the scenery window `[-M, M]`: twice the iterated-logarithm
/// envelope at `n`, rounded up, plus one.
pub fn scenery_half_width(walk: &WalkModel, n: usize) -> i64 {
    (2.0 * walk.lil_envelope(n)).ceil() as i64 + 1
}

/// How the `z_norm` column is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// `Z_centered / n`.
    CenteredOverN,
    /// `Z_n / n^tau`.
    OverNTau(f64),
}

impl Normalization {
    fn apply(self, n: usize, z: f64, z_centered: f64) -> f64 {
        match self {
            Normalization::CenteredOverN => z_centered / n as f64,
            Normalization::OverNTau(tau) => z / (n as f64).powf(tau),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelOptions {
    /// Accumulate per-site sums of `N` and `N^2` across replicas.
    pub site_moments: bool,
    /// Track sites whose value reaches the truncation level `n`.
    pub truncation: bool,
}

/// Statistics of one replica at one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub n: usize,
    pub z: f64,
    pub z_centered: f64,
    pub alpha0: u64,
    pub max_abs: i64,
    pub distinct: usize,
    /// `#{i visited : xi_i >= n}` (truncation runs only).
    pub mismatch: u64,
    /// `sum_{i visited, xi_i >= n} N_n(i) xi_i`, so that the truncated
    /// statistic is `z - truncated_excess`.
    pub truncated_excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub replica: usize,
    pub checkpoints: Vec<Checkpoint>,
}

/// Integer sums over replicas of `N_n(i)` and `N_n(i)^2`, per checkpoint and
/// window site. Integer accumulation keeps the totals independent of how
/// replicas are split across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteMoments {
    pub sum: Vec<Vec<u64>>,
    pub sum_sq: Vec<Vec<u64>>,
}

impl SiteMoments {
    fn zeros(checkpoints: usize, width: usize) -> Self {
        SiteMoments {
            sum: vec![vec![0; width]; checkpoints],
            sum_sq: vec![vec![0; width]; checkpoints],
        }
    }

    fn merge(mut self, other: SiteMoments) -> Self {
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.sum_sq.iter_mut().zip(other.sum_sq) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self
    }

    /// `sum_i Var(N_n(i))` with the unbiased variance estimator.
    pub fn sum_of_variances(&self, checkpoint: usize, replicas: usize) -> f64 {
        let r = replicas as f64;
        if replicas < 2 {
            return 0.0;
        }
        self.sum[checkpoint]
            .iter()
            .zip(&self.sum_sq[checkpoint])
            .map(|(&s, &s2)| {
                let mean = s as f64 / r;
                (s2 as f64 / r - mean * mean) * r / (r - 1.0)
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub checkpoints: Vec<usize>,
    pub half_width: i64,
    /// Sorted by replica index.
    pub traces: Vec<Trace>,
    pub moments: Option<SiteMoments>,
}

struct Acc {
    traces: Vec<Trace>,
    moments: Option<SiteMoments>,
}

/// Runs every replica of `config`, recording statistics at each of the
/// strictly increasing `checkpoints`.
pub fn simulate(config: &ExperimentConfig, checkpoints: &[usize], opts: KernelOptions) -> Result<Simulation> {
    config.validate()?;
    if checkpoints.is_empty() || !checkpoints.windows(2).all(|w| w[0] < w[1]) {
        return Err(ExperimentError::InvalidConfig {
            key: "n_grid",
            reason: "checkpoints must be nonempty and strictly increasing".into(),
        });
    }
    let n_max = *checkpoints.last().unwrap();
    let source = WalkSource::new(&config.walk, n_max)?;
    let half_width = scenery_half_width(&config.walk, n_max);
    let window = SiteWindow::symmetric(half_width);
    let width = window.len();
    let empty = || Acc {
        traces: Vec::new(),
        moments: opts.site_moments.then(|| SiteMoments::zeros(checkpoints.len(), width)),
    };

    let acc = (0..config.replicas)
        .into_par_iter()
        .try_fold(empty, |mut acc, replica| {
            let trace = run_replica(config, &source, window, checkpoints, opts, replica, acc.moments.as_mut())?;
            acc.traces.push(trace);
            Ok::<_, ExperimentError>(acc)
        })
        .try_reduce(empty, |mut a, b| {
            a.traces.extend(b.traces);
            a.moments = match (a.moments, b.moments) {
                (Some(x), Some(y)) => Some(x.merge(y)),
                (x, y) => x.or(y),
            };
            Ok(a)
        })?;

    let mut traces = acc.traces;
    traces.sort_by_key(|t| t.replica);
    Ok(Simulation {
        checkpoints: checkpoints.to_vec(),
        half_width,
        traces,
        moments: acc.moments,
    })
}

fn run_replica(
    config: &ExperimentConfig,
    source: &WalkSource,
    window: SiteWindow,
    checkpoints: &[usize],
    opts: KernelOptions,
    replica: usize,
    moments: Option<&mut SiteMoments>,
) -> Result<Trace> {
    let n_max = *checkpoints.last().unwrap();
    let path = source.path(n_max, derive(config.base_seed, Stream::Walk, replica as u64))?;
    let scenery = gen_scenery(
        &config.scenery,
        window,
        derive(config.base_seed, Stream::Scenery, replica as u64),
    )?;
    let values = &scenery.values;
    let centered = scenery.centered_values();
    let half_width = window.hi;
    let width = window.len();

    let mut counts = vec![0u64; width];
    let (mut z, mut zc) = (0.0f64, 0.0f64);
    let mut alpha0 = 0u64;
    let mut max_abs = 0i64;
    let mut distinct = 0usize;
    let (mut lo_idx, mut hi_idx) = (usize::MAX, 0usize);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut moments = moments;

    let mut next = 0;
    for (k, &site) in path.sites.iter().enumerate() {
        if !window.contains(site) {
            return Err(ExperimentError::WindowOverflow {
                replica,
                site,
                half_width,
            });
        }
        let idx = (site + half_width) as usize;
        let c = &mut counts[idx];
        alpha0 += 2 * *c + 1;
        if *c == 0 {
            distinct += 1;
        }
        *c += 1;
        z += values[idx];
        zc += centered[idx];
        max_abs = max_abs.max(site.abs());
        lo_idx = lo_idx.min(idx);
        hi_idx = hi_idx.max(idx);

        if k == checkpoints[next] {
            let (mut mismatch, mut excess) = (0u64, 0.0f64);
            if opts.truncation {
                let level = k as f64;
                for i in lo_idx..=hi_idx {
                    if counts[i] > 0 && values[i] >= level {
                        mismatch += 1;
                        excess += counts[i] as f64 * values[i];
                    }
                }
            }
            if let Some(m) = moments.as_deref_mut() {
                for i in lo_idx..=hi_idx {
                    m.sum[next][i] += counts[i];
                    m.sum_sq[next][i] += counts[i] * counts[i];
                }
            }
            out.push(Checkpoint {
                n: k,
                z,
                z_centered: zc,
                alpha0,
                max_abs,
                distinct,
                mismatch,
                truncated_excess: excess,
            });
            next += 1;
            if next == checkpoints.len() {
                break;
            }
        }
    }
    Ok(Trace {
        replica,
        checkpoints: out,
    })
}

impl Simulation {
    /// Rows ordered by `(n, replica)`.
    pub fn rows(&self, config: &ExperimentConfig, norm: Normalization) -> Vec<Row> {
        let exponent = config.walk.range_exponent() + config.delta;
        let mut rows = Vec::with_capacity(self.checkpoints.len() * self.traces.len());
        for (j, &n) in self.checkpoints.iter().enumerate() {
            let window_edge = (n as f64).powf(exponent);
            let lil_edge = LIL_SLACK * config.walk.lil_envelope(n);
            for t in &self.traces {
                let cp = &t.checkpoints[j];
                rows.push(Row {
                    n,
                    replica: t.replica,
                    z: cp.z,
                    z_centered: cp.z_centered,
                    z_norm: norm.apply(n, cp.z, cp.z_centered),
                    alpha0: cp.alpha0,
                    sum_n2: cp.alpha0,
                    max_abs_s: cp.max_abs,
                    window_ok: cp.max_abs as f64 <= window_edge,
                    lil_ok: cp.max_abs as f64 <= lil_edge,
                });
            }
        }
        rows
    }

    /// Per-replica values of `f` at checkpoint `j`, in replica order.
    pub fn column(&self, j: usize, f: impl Fn(&Checkpoint) -> f64) -> Vec<f64> {
        self.traces.iter().map(|t| f(&t.checkpoints[j])).collect()
    }
}

/// Aggregates rows (ordered by `(n, replica)`) level by level.
pub(crate) fn summarize(rows: &[Row]) -> Vec<LevelSummary> {
    rows.chunk_by(|a, b| a.n == b.n)
        .map(|level| {
            let n = level[0].n;
            let z: Vec<f64> = level.iter().map(|r| r.z).collect();
            let zc: Vec<f64> = level.iter().map(|r| r.z_centered).collect();
            let abs_norm: Vec<f64> = level.iter().map(|r| r.z_norm.abs()).collect();
            let abs_over_n: Vec<f64> = level.iter().map(|r| r.z.abs() / n as f64).collect();
            let alpha: Vec<f64> = level.iter().map(|r| r.alpha0 as f64).collect();
            let (mean_z, var_z) = mean_var(&z);
            let (mean_centered, _) = mean_var(&zc);
            let count = level.len() as f64;
            LevelSummary {
                n,
                replicas: level.len(),
                mean_z,
                var_z,
                mean_centered,
                se_centered: std_error(&zc),
                median_abs_norm: median(&abs_norm),
                q90_abs_norm: quantile(&abs_norm, 0.9),
                q90_abs_z_over_n: quantile(&abs_over_n, 0.9),
                mean_alpha0: mean_var(&alpha).0,
                lil_exceed_fraction: level.iter().filter(|r| !r.lil_ok).count() as f64 / count,
                window_fail_fraction: level.iter().filter(|r| !r.window_ok).count() as f64 / count,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localtime::{local_time, self_intersection, z_statistic};
    use crate::scenery::{Innovation, MaCoeffs, Profile, SceneryModel};
    use crate::walk::gen_iid_walk;

    fn config() -> ExperimentConfig {
        ExperimentConfig::new(
            WalkModel::rademacher(),
            SceneryModel::causal_ma(Innovation::Gaussian, MaCoeffs::Geometric { rho: 0.5 }).with_mu(
                Profile::Periodic {
                    base: 0.0,
                    amplitude: 1.0,
                    period: 7,
                },
            ),
            vec![10, 100, 1000],
        )
        .with_replicas(8)
        .with_seed(99)
    }

    #[test]
    fn checkpoints_match_direct_computation() {
        let c = config();
        let sim = simulate(&c, &c.n_grid, KernelOptions::default()).unwrap();
        let window = SiteWindow::symmetric(sim.half_width);
        for t in &sim.traces {
            let path = gen_iid_walk(&c.walk, 1000, derive(c.base_seed, Stream::Walk, t.replica as u64)).unwrap();
            let sc = gen_scenery(&c.scenery, window, derive(c.base_seed, Stream::Scenery, t.replica as u64)).unwrap();
            for cp in &t.checkpoints {
                let prefix = path.prefix(cp.n);
                let profile = local_time(&prefix).unwrap();
                assert_eq!(cp.alpha0, self_intersection(&profile));
                assert_eq!(cp.distinct, profile.distinct_sites());
                assert_eq!(cp.max_abs, prefix.max_abs());
                assert_eq!(cp.z, z_statistic(&prefix, &sc).unwrap());
            }
        }
    }

    #[test]
    fn independent_of_thread_count() {
        let c = config();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    simulate(
                        &c,
                        &c.n_grid,
                        KernelOptions {
                            site_moments: true,
                            truncation: true,
                        },
                    )
                    .unwrap()
                })
        };
        let a = run(1);
        assert_eq!(a, run(3));
        assert_eq!(a, run(8));
    }

    #[test]
    fn replicas_do_not_depend_on_replica_count() {
        let c = config();
        let small = simulate(&c, &c.n_grid, KernelOptions::default()).unwrap();
        let large = simulate(&c.clone().with_replicas(20), &c.n_grid, KernelOptions::default()).unwrap();
        assert_eq!(small.traces[..], large.traces[..8]);
    }

    #[test]
    fn overflow_is_reported() {
        let mut c = config();
        c.walk = WalkModel::IidLattice {
            increments: crate::walk::IncrementDist::Finite {
                values: vec![-1000, 1000],
                probs: vec![0.5, 0.5],
            },
        };
        c.n_grid = vec![1];
        // envelope at n = 1 is sqrt(2 * 10^6) ~ 1414, window ~ 2830: no overflow
        assert!(simulate(&c, &c.n_grid, KernelOptions::default()).is_ok());
        let sim_err = {
            let mut c = c.clone();
            // sd ~ 141, window half-width ~ 4 sd + 2, a single jump of 1000 escapes
            c.walk = WalkModel::IidLattice {
                increments: crate::walk::IncrementDist::Finite {
                    values: vec![-1000, 0, 1000],
                    probs: vec![0.01, 0.98, 0.01],
                },
            };
            c.n_grid = vec![1, 2];
            c.replicas = 200;
            simulate(&c, &c.n_grid, KernelOptions::default())
        };
        assert!(matches!(sim_err, Err(ExperimentError::WindowOverflow { .. })));
    }
}
