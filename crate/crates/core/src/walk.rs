//! Random-walk trajectories.
//!
//! Two families are supported: walks with i.i.d. zero-mean lattice increments,
//! and walks whose increments are stationary fractional Gaussian noise (fGn)
//! with Hurst exponent `H`, for which `Var(S_n) = n^{2H}` holds exactly. Real
//! Gaussian positions are mapped to lattice sites by `floor`.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::rng_from;

/// Negative circulant eigenvalues above this magnitude abort fGn sampling;
/// smaller ones are clamped to zero.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-8;

const MEAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum WalkError {
    #[error("increment distribution has mean {mean}, expected 0")]
    NonzeroMean { mean: f64 },
    #[error("invalid increment distribution: {0}")]
    InvalidIncrements(String),
    #[error("hurst exponent {0} outside (0, 1)")]
    HurstOutOfRange(f64),
    #[error("fractional Gaussian noise needs at least one increment")]
    EmptyGaussianWalk,
    #[error("circulant embedding has eigenvalue {value} at index {index} (ring length {ring})")]
    NegativeEigenvalue { value: f64, index: usize, ring: usize },
    #[error("model kind does not match the requested generator")]
    WrongKind,
}

/// Law of one lattice increment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum IncrementDist {
    /// `+1` or `-1` with probability 1/2 each.
    Rademacher,
    /// `0` with probability `p_stay`, otherwise `+-1`.
    LazyRademacher { p_stay: f64 },
    /// Uniform on `{-support, ..., support}`.
    UniformLattice { support: u32 },
    /// Arbitrary finite law; must have zero mean and positive variance.
    Finite { values: Vec<i64>, probs: Vec<f64> },
}

impl IncrementDist {
    pub fn mean(&self) -> f64 {
        match self {
            IncrementDist::Finite { values, probs } => {
                values.iter().zip(probs).map(|(&v, &p)| v as f64 * p).sum()
            }
            _ => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            IncrementDist::Rademacher => 1.0,
            IncrementDist::LazyRademacher { p_stay } => 1.0 - p_stay,
            IncrementDist::UniformLattice { support } => {
                let m = *support as f64;
                m * (m + 1.0) / 3.0
            }
            IncrementDist::Finite { values, probs } => {
                let mean = self.mean();
                values
                    .iter()
                    .zip(probs)
                    .map(|(&v, &p)| (v as f64 - mean).powi(2) * p)
                    .sum()
            }
        }
    }

    /// True when `step` has positive probability.
    pub fn supports(&self, step: i64) -> bool {
        match self {
            IncrementDist::Rademacher => step.abs() == 1,
            IncrementDist::LazyRademacher { p_stay } => {
                step.abs() == 1 || (step == 0 && *p_stay > 0.0)
            }
            IncrementDist::UniformLattice { support } => step.unsigned_abs() <= *support as u64,
            IncrementDist::Finite { values, probs } => values
                .iter()
                .zip(probs)
                .any(|(&v, &p)| v == step && p > 0.0),
        }
    }

    pub fn validate(&self) -> Result<(), WalkError> {
        match self {
            IncrementDist::Rademacher => {}
            IncrementDist::LazyRademacher { p_stay } => {
                if !(0.0..1.0).contains(p_stay) {
                    return Err(WalkError::InvalidIncrements(format!(
                        "p_stay = {p_stay} must lie in [0, 1)"
                    )));
                }
            }
            IncrementDist::UniformLattice { support } => {
                if *support == 0 {
                    return Err(WalkError::InvalidIncrements(
                        "uniform lattice support must be at least 1".into(),
                    ));
                }
            }
            IncrementDist::Finite { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(WalkError::InvalidIncrements(
                        "values and probs must be nonempty and of equal length".into(),
                    ));
                }
                if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(WalkError::InvalidIncrements(
                        "probabilities must be finite and nonnegative".into(),
                    ));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(WalkError::InvalidIncrements(format!(
                        "probabilities sum to {total}, expected 1"
                    )));
                }
                let mean = self.mean();
                if mean.abs() > MEAN_TOLERANCE {
                    return Err(WalkError::NonzeroMean { mean });
                }
                if self.variance() <= 0.0 {
                    return Err(WalkError::InvalidIncrements(
                        "increment variance must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WalkModel {
    IidLattice { increments: IncrementDist },
    FgnGaussian { hurst: f64 },
}

impl WalkModel {
    pub fn rademacher() -> Self {
        WalkModel::IidLattice {
            increments: IncrementDist::Rademacher,
        }
    }

    pub fn fgn(hurst: f64) -> Self {
        WalkModel::FgnGaussian { hurst }
    }

    pub fn validate(&self) -> Result<(), WalkError> {
        match self {
            WalkModel::IidLattice { increments } => increments.validate(),
            WalkModel::FgnGaussian { hurst } => check_hurst(*hurst),
        }
    }

    /// Variance of a single increment.
    pub fn increment_variance(&self) -> f64 {
        match self {
            WalkModel::IidLattice { increments } => increments.variance(),
            WalkModel::FgnGaussian { .. } => 1.0,
        }
    }

    /// Growth exponent of the walk's range: 1/2 for i.i.d. increments, `H`
    /// for fGn.
    pub fn range_exponent(&self) -> f64 {
        match self {
            WalkModel::IidLattice { .. } => 0.5,
            WalkModel::FgnGaussian { hurst } => *hurst,
        }
    }

    pub fn variance_at(&self, n: usize) -> f64 {
        match self {
            WalkModel::IidLattice { increments } => increments.variance() * n as f64,
            WalkModel::FgnGaussian { hurst } => (n as f64).powf(2.0 * hurst),
        }
    }

    /// Iterated-logarithm envelope `sqrt(2 Var(S_n) log log n)`. The
    /// `log log n` factor is floored at 1 so the envelope stays meaningful for
    /// small `n`.
    pub fn lil_envelope(&self, n: usize) -> f64 {
        let lln = (n.max(3) as f64).ln().ln().max(1.0);
        (2.0 * self.variance_at(n) * lln).sqrt()
    }
}

fn check_hurst(hurst: f64) -> Result<(), WalkError> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(WalkError::HurstOutOfRange(hurst))
    }
}

/// Integer trajectory `S_0..S_n`, with the real-valued partial sums kept for
/// Gaussian walks.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    pub sites: Vec<i64>,
    pub raw: Option<Vec<f64>>,
}

impl WalkPath {
    /// Path from lattice increments, starting at 0.
    pub fn from_increments<I: IntoIterator<Item = i64>>(steps: I) -> Self {
        let mut sites = vec![0i64];
        let mut pos = 0i64;
        for s in steps {
            pos += s;
            sites.push(pos);
        }
        WalkPath { sites, raw: None }
    }

    /// Path from real partial sums; `raw[0]` must be 0.
    pub fn from_raw(raw: Vec<f64>) -> Self {
        debug_assert_eq!(raw.first(), Some(&0.0));
        let sites = raw.iter().map(|x| x.floor() as i64).collect();
        WalkPath {
            sites,
            raw: Some(raw),
        }
    }

    pub fn n(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn max_abs(&self) -> i64 {
        self.sites.iter().map(|s| s.abs()).max().unwrap_or(0)
    }

    /// First `n + 1` positions.
    pub fn prefix(&self, n: usize) -> WalkPath {
        WalkPath {
            sites: self.sites[..=n].to_vec(),
            raw: self.raw.as_ref().map(|r| r[..=n].to_vec()),
        }
    }
}

/// Walk with i.i.d. increments; a pure function of `(model, n, seed)`.
pub fn gen_iid_walk(model: &WalkModel, n: usize, seed: u64) -> Result<WalkPath, WalkError> {
    let WalkModel::IidLattice { increments } = model else {
        return Err(WalkError::WrongKind);
    };
    increments.validate()?;
    let mut rng = rng_from(seed);
    let mut sites = Vec::with_capacity(n + 1);
    sites.push(0i64);
    let mut pos = 0i64;
    match increments {
        IncrementDist::Rademacher => {
            let mut bits = 0u64;
            for k in 0..n {
                if k % 64 == 0 {
                    bits = rng.next_u64();
                }
                pos += if bits & 1 == 1 { 1 } else { -1 };
                bits >>= 1;
                sites.push(pos);
            }
        }
        IncrementDist::LazyRademacher { p_stay } => {
            for _ in 0..n {
                if !rng.random_bool(*p_stay) {
                    pos += if rng.random::<bool>() { 1 } else { -1 };
                }
                sites.push(pos);
            }
        }
        IncrementDist::UniformLattice { support } => {
            let m = *support as i64;
            for _ in 0..n {
                pos += rng.random_range(-m..=m);
                sites.push(pos);
            }
        }
        IncrementDist::Finite { values, probs } => {
            let dist = WeightedIndex::new(probs)
                .map_err(|e| WalkError::InvalidIncrements(e.to_string()))?;
            for _ in 0..n {
                pos += values[dist.sample(&mut rng)];
                sites.push(pos);
            }
        }
    }
    Ok(WalkPath { sites, raw: None })
}

/// Autocovariance of unit-variance fractional Gaussian noise,
/// `r(k) = (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2`.
pub fn fgn_autocovariance(hurst: f64, lag: u64) -> Result<f64, WalkError> {
    check_hurst(hurst)?;
    Ok(fgn_acov_unchecked(hurst, lag))
}

fn fgn_acov_unchecked(hurst: f64, lag: u64) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    let k = lag as f64;
    let e = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).powf(e))
}

/// Exact fGn sampler by circulant embedding.
///
/// The covariance sequence is embedded in a circulant matrix on a
/// power-of-two ring of length `m >= 2(n-1)`; its eigenvalues are the DFT of
/// the first row. With `W = F diag(sqrt(lambda / m)) (Z1 + i Z2)`, the real
/// part of the first `n` entries of `W` has exactly the fGn covariance.
/// Construction is done once per `(hurst, n)` and the sampler is shared
/// read-only across threads.
pub struct FgnSampler {
    hurst: f64,
    n: usize,
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    min_eigenvalue: f64,
}

impl std::fmt::Debug for FgnSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FgnSampler")
            .field("hurst", &self.hurst)
            .field("n", &self.n)
            .field("ring", &self.scale.len())
            .field("min_eigenvalue", &self.min_eigenvalue)
            .finish()
    }
}

impl FgnSampler {
    pub fn new(hurst: f64, n: usize) -> Result<Self, WalkError> {
        check_hurst(hurst)?;
        if n == 0 {
            return Err(WalkError::EmptyGaussianWalk);
        }
        let ring = (2 * (n - 1)).next_power_of_two().max(2);
        let mut row: Vec<Complex<f64>> = (0..ring)
            .map(|k| Complex::new(fgn_acov_unchecked(hurst, k.min(ring - k) as u64), 0.0))
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(ring);
        fft.process(&mut row);

        let mut min_eigenvalue = f64::INFINITY;
        let mut scale = Vec::with_capacity(ring);
        for (index, c) in row.iter().enumerate() {
            let value = c.re;
            min_eigenvalue = min_eigenvalue.min(value);
            if value < -EIGENVALUE_TOLERANCE {
                return Err(WalkError::NegativeEigenvalue { value, index, ring });
            }
            scale.push((value.max(0.0) / ring as f64).sqrt());
        }
        Ok(FgnSampler {
            hurst,
            n,
            scale,
            fft,
            min_eigenvalue,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn ring_len(&self) -> usize {
        self.scale.len()
    }

    /// Smallest circulant eigenvalue before clamping.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// `n` stationary increments with the fGn autocovariance.
    pub fn increments(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed);
        let mut buf: Vec<Complex<f64>> = self
            .scale
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        buf.iter().take(self.n).map(|c| c.re).collect()
    }

    pub fn path(&self, seed: u64) -> WalkPath {
        let mut raw = Vec::with_capacity(self.n + 1);
        raw.push(0.0);
        let mut acc = 0.0;
        for x in self.increments(seed) {
            acc += x;
            raw.push(acc);
        }
        WalkPath::from_raw(raw)
    }
}

/// Walk driven by fractional Gaussian noise; a pure function of
/// `(model, n, seed)`.
pub fn gen_fgn_walk(model: &WalkModel, n: usize, seed: u64) -> Result<WalkPath, WalkError> {
    let WalkModel::FgnGaussian { hurst } = model else {
        return Err(WalkError::WrongKind);
    };
    Ok(FgnSampler::new(*hurst, n)?.path(seed))
}

/// Reusable generator for either walk family.
#[derive(Debug)]
pub enum WalkSource {
    Iid(WalkModel),
    Fgn(FgnSampler),
}

impl WalkSource {
    /// Prepares a generator for paths of length `n`.
    pub fn new(model: &WalkModel, n: usize) -> Result<Self, WalkError> {
        model.validate()?;
        Ok(match model {
            WalkModel::IidLattice { .. } => WalkSource::Iid(model.clone()),
            WalkModel::FgnGaussian { hurst } => WalkSource::Fgn(FgnSampler::new(*hurst, n)?),
        })
    }

    pub fn path(&self, n: usize, seed: u64) -> Result<WalkPath, WalkError> {
        match self {
            WalkSource::Iid(model) => gen_iid_walk(model, n, seed),
            WalkSource::Fgn(sampler) if sampler.len() == n => Ok(sampler.path(seed)),
            WalkSource::Fgn(sampler) => gen_fgn_walk(&WalkModel::fgn(sampler.hurst()), n, seed),
        }
    }
}
