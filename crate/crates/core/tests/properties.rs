use rwrs_core::dependence::{covariance_bound_check_with, CovarianceCheckOptions, Transform};
use rwrs_core::experiments::{run_slln, simulate, KernelOptions, Normalization};
use rwrs_core::localtime::{local_time, z_prefixes, z_site_weighted};
use rwrs_core::rng::{derive, Stream};
use rwrs_core::scenery::{gen_scenery, scenery_mean, Innovation, MaCoeffs, Profile, SceneryModel, SiteWindow};
use rwrs_core::stats::mean_var;
use rwrs_core::walk::{gen_iid_walk, WalkModel};
use rwrs_core::ExperimentConfig;

fn ma_periodic() -> SceneryModel {
    SceneryModel::causal_ma(Innovation::Gaussian, MaCoeffs::Geometric { rho: 0.5 }).with_mu(Profile::Periodic {
        base: 0.0,
        amplitude: 1.0,
        period: 7,
    })
}

#[test]
fn conditional_centering_has_zero_mean_on_a_fixed_path() {
    let walk = WalkModel::rademacher();
    let path = gen_iid_walk(&walk, 400, 17).unwrap();
    let profile = local_time(&path).unwrap();
    let m = path.max_abs();
    for model in [
        ma_periodic(),
        SceneryModel::iid(Innovation::CenteredExp).with_mu(Profile::Constant { value: 2.0 }),
    ] {
        let draws: Vec<f64> = (0..10_000u64)
            .map(|s| {
                let sc = gen_scenery(&model, SiteWindow::symmetric(m), derive(5, Stream::Scenery, s)).unwrap();
                let z = z_site_weighted(&profile, &sc).unwrap();
                let mean_part: f64 = profile.iter().map(|(i, c)| c as f64 * scenery_mean(&model, i)).sum();
                z - mean_part
            })
            .collect();
        let (mean, var) = mean_var(&draws);
        let se = (var / draws.len() as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "mean {mean}, se {se}");
    }
}

#[test]
fn nonnegative_scenery_gives_monotone_prefixes() {
    let walk = WalkModel::rademacher();
    let model = SceneryModel::pareto(1.5).with_mu(Profile::Constant { value: 3.0 });
    for seed in 0..20u64 {
        let path = gen_iid_walk(&walk, 2000, seed).unwrap();
        let sc = gen_scenery(&model, SiteWindow::symmetric(path.max_abs()), seed).unwrap();
        assert!(sc.iter().all(|(_, v)| v >= 0.0));
        let z = z_prefixes(&path, &sc).unwrap();
        assert!(z.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn support_window_holds_for_most_replicas() {
    let n = 1 << 14;
    let bound = (n as f64).powf(0.6);
    let walk = WalkModel::rademacher();
    let ok = (0..200u64)
        .filter(|&r| {
            let profile = local_time(&gen_iid_walk(&walk, n, derive(3, Stream::Walk, r)).unwrap()).unwrap();
            let inside = profile.iter().all(|(i, c)| c == 0 || (i.abs() as f64) <= bound);
            inside
        })
        .count();
    assert!(ok as f64 >= 0.95 * 200.0, "{ok} of 200");
}

#[test]
fn lil_envelope_exceedance_is_rare() {
    let c = ExperimentConfig::new(WalkModel::rademacher(), SceneryModel::iid(Innovation::Gaussian), vec![1 << 16])
        .with_replicas(200)
        .with_seed(11);
    let r = run_slln(&c).unwrap();
    assert!(r.levels[0].lil_exceed_fraction < 0.05, "{}", r.levels[0].lil_exceed_fraction);
}

#[test]
fn rows_are_reproducible_and_replica_local() {
    let c = ExperimentConfig::new(WalkModel::fgn(0.7), ma_periodic(), vec![64, 256]).with_replicas(12).with_seed(9);
    let a = run_slln(&c).unwrap();
    let b = run_slln(&c).unwrap();
    assert_eq!(a.rows, b.rows);
    // a smaller run reproduces the first replicas exactly
    let small = run_slln(&c.clone().with_replicas(5)).unwrap();
    let sim = simulate(&c, &c.n_grid, KernelOptions::default()).unwrap();
    let full = sim.rows(&c, Normalization::CenteredOverN);
    for row in &small.rows {
        assert!(full.contains(row));
    }
}

#[test]
fn positive_and_negative_parts_respect_the_covariance_bound() {
    for model in [
        ma_periodic(),
        SceneryModel::causal_ma(Innovation::Rademacher, MaCoeffs::Explicit {
            coeffs: vec![1.0, 0.5, 0.25],
        }),
    ] {
        for transform in [Transform::PositivePart, Transform::NegativePart] {
            let rows = covariance_bound_check_with(
                &model,
                &CovarianceCheckOptions {
                    lags: (1..=20).collect(),
                    samples: 10_000,
                    seed: 21,
                    probes: vec![0],
                    transform,
                    truncation: 1024.0,
                },
            )
            .unwrap();
            assert!(rows.iter().all(|r| r.within), "{transform:?}: {rows:?}");
        }
    }
}
