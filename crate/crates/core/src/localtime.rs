//! Occupation accounting along a walk.
//!
//! `N_n(i)` counts visits to site `i` up to time `n`; the intersection local
//! time `alpha(n, i)` counts ordered time pairs whose positions differ by `i`,
//! and equals the lag-`i` autocorrelation of the occupation measure. `Z_n` can
//! be computed either along the path or as `sum_i N_n(i) xi_i`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scenery::Scenery;
use crate::walk::WalkPath;

/// Paths whose visited range is at most this many times their length use dense
/// storage.
const DENSE_RANGE_FACTOR: usize = 4;
const DENSE_RANGE_SLACK: usize = 64;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LocalTimeError {
    #[error("walk visits site {site} outside the scenery window [{lo}, {hi}]")]
    OutsideWindow { site: i64, lo: i64, hi: i64 },
    #[error("empty path")]
    EmptyPath,
}

#[derive(Debug, Clone, PartialEq)]
enum Counts {
    /// `counts[k]` is the local time at `offset + k`.
    Dense { offset: i64, counts: Vec<u64> },
    Sparse(BTreeMap<i64, u64>),
}

/// Local times `N_n(i)` of one path. Sites absent from the profile have local
/// time zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeProfile {
    n: usize,
    counts: Counts,
}

impl LocalTimeProfile {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, site: i64) -> u64 {
        match &self.counts {
            Counts::Dense { offset, counts } => {
                let k = site - offset;
                if k < 0 || k as usize >= counts.len() {
                    0
                } else {
                    counts[k as usize]
                }
            }
            Counts::Sparse(map) => map.get(&site).copied().unwrap_or(0),
        }
    }

    /// Visited sites with their local times, in increasing site order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (i64, u64)> + '_> {
        match &self.counts {
            Counts::Dense { offset, counts } => Box::new(
                counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(move |(k, &c)| (offset + k as i64, c)),
            ),
            Counts::Sparse(map) => Box::new(map.iter().map(|(&s, &c)| (s, c))),
        }
    }

    /// Total mass, always `n + 1`.
    pub fn total(&self) -> u64 {
        self.iter().map(|(_, c)| c).sum()
    }

    pub fn distinct_sites(&self) -> usize {
        self.iter().count()
    }

    /// Smallest and largest visited sites.
    pub fn range(&self) -> (i64, i64) {
        let mut it = self.iter();
        let (first, _) = it.next().expect("profiles are never empty");
        let last = self.iter().last().map(|(s, _)| s).unwrap_or(first);
        (first, last)
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.counts, Counts::Dense { .. })
    }
}

/// `N_n(i) = #{k <= n : S_k = i}`.
pub fn local_time(path: &WalkPath) -> Result<LocalTimeProfile, LocalTimeError> {
    if path.sites.is_empty() {
        return Err(LocalTimeError::EmptyPath);
    }
    let n = path.sites.len() - 1;
    let lo = *path.sites.iter().min().unwrap();
    let hi = *path.sites.iter().max().unwrap();
    let width = (hi - lo) as u64 + 1;
    let counts = if width <= (DENSE_RANGE_FACTOR * (n + 1) + DENSE_RANGE_SLACK) as u64 {
        let mut counts = vec![0u64; width as usize];
        for &s in &path.sites {
            counts[(s - lo) as usize] += 1;
        }
        Counts::Dense { offset: lo, counts }
    } else {
        let mut map = BTreeMap::new();
        for &s in &path.sites {
            *map.entry(s).or_insert(0) += 1;
        }
        Counts::Sparse(map)
    };
    Ok(LocalTimeProfile { n, counts })
}

/// Self-intersection local time `alpha(n, 0) = sum_i N_n(i)^2`.
pub fn self_intersection(profile: &LocalTimeProfile) -> u64 {
    profile.iter().map(|(_, c)| c * c).sum()
}

/// Intersection local time `alpha(n, i) = sum_x N_n(x) N_n(x - i)`.
pub fn intersection(profile: &LocalTimeProfile, i: i64) -> u64 {
    match &profile.counts {
        Counts::Dense { counts, .. } => {
            let lag = i.unsigned_abs() as usize;
            if lag >= counts.len() {
                return 0;
            }
            counts.iter().zip(&counts[lag..]).map(|(a, b)| a * b).sum()
        }
        Counts::Sparse(map) => map
            .iter()
            .map(|(&x, &c)| c * map.get(&(x - i)).copied().unwrap_or(0))
            .sum(),
    }
}

fn lookup(scenery: &Scenery, site: i64) -> Result<f64, LocalTimeError> {
    scenery.get(site).ok_or(LocalTimeError::OutsideWindow {
        site,
        lo: scenery.window.lo,
        hi: scenery.window.hi,
    })
}

/// `Z_n = sum_{k=0..n} xi_{S_k}`, summed in time order.
pub fn z_statistic(path: &WalkPath, scenery: &Scenery) -> Result<f64, LocalTimeError> {
    path.sites.iter().try_fold(0.0, |acc, &s| Ok(acc + lookup(scenery, s)?))
}

/// `Z_0, ..., Z_n` in one pass.
pub fn z_prefixes(path: &WalkPath, scenery: &Scenery) -> Result<Vec<f64>, LocalTimeError> {
    let mut acc = 0.0;
    path.sites
        .iter()
        .map(|&s| {
            acc += lookup(scenery, s)?;
            Ok(acc)
        })
        .collect()
}

/// `Z_n = sum_i N_n(i) xi_i`, summed in increasing site order.
pub fn z_site_weighted(profile: &LocalTimeProfile, scenery: &Scenery) -> Result<f64, LocalTimeError> {
    profile
        .iter()
        .try_fold(0.0, |acc, (s, c)| Ok(acc + c as f64 * lookup(scenery, s)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenery::{Innovation, SceneryModel};
    use proptest::prelude::*;

    fn path(sites: &[i64]) -> WalkPath {
        WalkPath {
            sites: sites.to_vec(),
            raw: None,
        }
    }

    fn const_scenery(lo: i64, hi: i64, f: impl Fn(i64) -> f64) -> Scenery {
        Scenery::from_values(
            lo,
            (lo..=hi).map(f).collect(),
            SceneryModel::iid(Innovation::Degenerate { value: 1.0 }),
        )
    }

    #[test]
    fn small_profiles() {
        let p = local_time(&path(&[0])).unwrap();
        assert_eq!(p.iter().collect::<Vec<_>>(), vec![(0, 1)]);
        let p = local_time(&path(&[0, 1, 0])).unwrap();
        assert_eq!(p.iter().collect::<Vec<_>>(), vec![(0, 2), (1, 1)]);
        assert_eq!(p.total(), 3);
        assert_eq!(self_intersection(&p), 5);
        assert_eq!(intersection(&p, 0), 5);
        assert_eq!(intersection(&p, 1), 2);
        assert_eq!(intersection(&p, -1), 2);
        assert_eq!(intersection(&p, 2), 0);
        assert_eq!(local_time(&path(&[])), Err(LocalTimeError::EmptyPath));
    }

    #[test]
    fn straight_line_has_unit_counts() {
        let n = 50;
        let p = local_time(&path(&(0..=n).collect::<Vec<_>>())).unwrap();
        assert_eq!(self_intersection(&p), n as u64 + 1);
    }

    #[test]
    fn sparse_storage_for_spread_paths() {
        let p = local_time(&path(&[0, 1_000_000, -5, 1_000_000])).unwrap();
        assert!(!p.is_dense());
        assert_eq!(p.get(1_000_000), 2);
        assert_eq!(self_intersection(&p), 6);
        assert_eq!(intersection(&p, 1_000_005), 2);
        assert_eq!(intersection(&p, -1_000_005), 2);
        assert_eq!(p.range(), (-5, 1_000_000));
    }

    #[test]
    fn z_examples() {
        let s = const_scenery(-10, 10, |_| 1.0);
        let w = crate::walk::gen_iid_walk(&crate::walk::WalkModel::rademacher(), 9, 3).unwrap();
        assert_eq!(z_statistic(&w, &s).unwrap(), 10.0);
        let s = const_scenery(-3, 3, |i| i as f64);
        let p = path(&[0, 1, 0]);
        assert_eq!(z_statistic(&p, &s).unwrap(), 1.0);
        assert_eq!(z_prefixes(&p, &s).unwrap(), vec![0.0, 1.0, 1.0]);
        assert_eq!(z_site_weighted(&local_time(&p).unwrap(), &s).unwrap(), 1.0);
    }

    #[test]
    fn window_violation_is_an_error() {
        let s = const_scenery(-1, 1, |_| 1.0);
        let p = path(&[0, 1, 2]);
        let err = LocalTimeError::OutsideWindow { site: 2, lo: -1, hi: 1 };
        assert_eq!(z_statistic(&p, &s), Err(err.clone()));
        assert_eq!(z_prefixes(&p, &s), Err(err.clone()));
        assert_eq!(z_site_weighted(&local_time(&p).unwrap(), &s), Err(err));
    }

    fn arb_path() -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(-3i64..=3, 0..200).prop_map(|steps| {
            let mut out = vec![0];
            for s in steps {
                out.push(out.last().unwrap() + s);
            }
            out
        })
    }

    proptest! {
        #[test]
        fn profile_identities(sites in arb_path()) {
            let p = local_time(&path(&sites)).unwrap();
            let n = sites.len() as u64 - 1;
            prop_assert_eq!(p.total(), n + 1);
            let max_abs = sites.iter().map(|s| s.abs()).max().unwrap();
            prop_assert!(p.iter().all(|(s, _)| s.abs() <= max_abs));
            let (lo, hi) = p.range();
            let mut total = 0;
            for i in (lo - hi)..=(hi - lo) {
                prop_assert_eq!(intersection(&p, i), intersection(&p, -i));
                total += intersection(&p, i);
            }
            prop_assert_eq!(total, (n + 1) * (n + 1));
            // Cauchy-Schwarz: alpha(n,0) >= (n+1)^2 / #distinct
            let d = p.distinct_sites() as u64;
            prop_assert!(self_intersection(&p) * d >= (n + 1) * (n + 1));
        }

        #[test]
        fn two_routes_to_z_agree(sites in arb_path(), seed in any::<u64>()) {
            let lo = *sites.iter().min().unwrap();
            let hi = *sites.iter().max().unwrap();
            let s = crate::scenery::gen_scenery(
                &SceneryModel::iid(Innovation::Gaussian),
                crate::scenery::SiteWindow::new(lo, hi),
                seed,
            ).unwrap();
            let w = path(&sites);
            let a = z_statistic(&w, &s).unwrap();
            let b = z_site_weighted(&local_time(&w).unwrap(), &s).unwrap();
            let scale: f64 = s.values.iter().map(|v| v.abs()).sum::<f64>() * sites.len() as f64;
            prop_assert!((a - b).abs() <= 1e-12 * scale.max(1.0));
            let pre = z_prefixes(&w, &s).unwrap();
            prop_assert_eq!(*pre.last().unwrap(), a);
        }
    }
}
