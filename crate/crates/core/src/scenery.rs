//! Random sceneries over a finite site window.
//!
//! Every model realizes `xi_i = mu_i + sigma_i * sum_{k=0..K} a_k eps_{i-k}` for
//! i.i.d. innovations `eps`, deterministic bounded profiles `mu`, `sigma`, and
//! absolutely summable coefficients `a` (`a = [1]` for i.i.d. sceneries).
//! Innovations are keyed by site: sites are grouped in fixed blocks and each
//! block draws from its own stream, so realizing a larger window never changes
//! values already realized on a smaller one.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive, rng_from, Stream};

/// Tail mass allowed beyond the truncation lag of a geometric MA.
pub const MA_TAIL_TOLERANCE: f64 = 1e-12;

const BLOCK: i64 = 64;

#[derive(Debug, Error, PartialEq)]
pub enum SceneryError {
    #[error("profile `{0}` is unbounded or not finite")]
    UnboundedProfile(&'static str),
    #[error("sigma profile must stay strictly positive (inf = {0})")]
    NonPositiveSigma(f64),
    #[error("Pareto tail index {0} must exceed 1 for a finite mean")]
    TailIndexTooSmall(f64),
    #[error("invalid moving-average coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("heavy-tailed sceneries must be identically distributed (constant mu and sigma)")]
    NotIdenticallyDistributed,
    #[error("window [{lo}, {hi}] is empty")]
    EmptyWindow { lo: i64, hi: i64 },
    #[error("at least {min} samples required, got {got}")]
    TooFewSamples { min: usize, got: usize },
}

/// Law of one innovation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Innovation {
    Gaussian,
    Rademacher,
    /// `Exp(1) - 1`.
    CenteredExp,
    /// Pareto with scale 1 and the given tail index, shifted to mean zero.
    ParetoCentered { tail_index: f64 },
    /// Constant innovation.
    Degenerate { value: f64 },
}

impl Innovation {
    pub fn mean(&self) -> f64 {
        match self {
            Innovation::Degenerate { value } => *value,
            _ => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Innovation::Gaussian | Innovation::Rademacher | Innovation::CenteredExp => 1.0,
            Innovation::ParetoCentered { tail_index: b } => {
                if *b > 2.0 {
                    b / ((b - 1.0).powi(2) * (b - 2.0))
                } else {
                    f64::INFINITY
                }
            }
            Innovation::Degenerate { .. } => 0.0,
        }
    }

    /// `E|eps - E eps|`.
    pub fn centered_l1(&self) -> f64 {
        match self {
            Innovation::Gaussian => (2.0 / PI).sqrt(),
            Innovation::Rademacher => 1.0,
            Innovation::CenteredExp => 2.0 / std::f64::consts::E,
            Innovation::ParetoCentered { tail_index: b } => {
                // E|X - m| = 2 E(X - m)^+ = 2 m^{1-b} / (b - 1) with m = b / (b - 1).
                let m = b / (b - 1.0);
                2.0 * m.powf(1.0 - b) / (b - 1.0)
            }
            Innovation::Degenerate { .. } => 0.0,
        }
    }

    /// `||eps - E eps||_q` for `q = 1` or `q = 2`.
    pub fn centered_norm(&self, q: u8) -> f64 {
        match q {
            1 => self.centered_l1(),
            2 => self.variance().sqrt(),
            _ => panic!("only L1 and L2 norms are used"),
        }
    }

    /// Closed-form `P(eps >= x)` where available.
    pub fn tail_prob(&self, x: f64) -> Option<f64> {
        match self {
            Innovation::ParetoCentered { tail_index: b } => {
                let y = x + b / (b - 1.0);
                Some(if y <= 1.0 { 1.0 } else { y.powf(-b) })
            }
            Innovation::CenteredExp => Some(if x <= -1.0 { 1.0 } else { (-(x + 1.0)).exp() }),
            Innovation::Rademacher => Some(if x <= -1.0 {
                1.0
            } else if x <= 1.0 {
                0.5
            } else {
                0.0
            }),
            Innovation::Degenerate { value } => Some(if *value >= x { 1.0 } else { 0.0 }),
            Innovation::Gaussian => None,
        }
    }

    pub fn validate(&self) -> Result<(), SceneryError> {
        match self {
            Innovation::ParetoCentered { tail_index } if !(*tail_index > 1.0) || !tail_index.is_finite() => {
                Err(SceneryError::TailIndexTooSmall(*tail_index))
            }
            Innovation::Degenerate { value } if !value.is_finite() => {
                Err(SceneryError::UnboundedProfile("innovation"))
            }
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Innovation::Gaussian => rng.sample(StandardNormal),
            Innovation::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Innovation::CenteredExp => {
                let e: f64 = rng.sample(Exp1);
                e - 1.0
            }
            Innovation::ParetoCentered { tail_index: b } => {
                // 1 - U lies in (0, 1]
                let u = 1.0 - rng.random::<f64>();
                u.powf(-1.0 / b) - b / (b - 1.0)
            }
            Innovation::Degenerate { value } => *value,
        }
    }
}

/// Moving-average coefficient rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaCoeffs {
    /// `a_k = rho^k`, truncated where the remaining tail is at most
    /// [`MA_TAIL_TOLERANCE`].
    Geometric { rho: f64 },
    Explicit { coeffs: Vec<f64> },
}

impl MaCoeffs {
    pub fn validate(&self) -> Result<(), SceneryError> {
        match self {
            MaCoeffs::Geometric { rho } => {
                if !(0.0..1.0).contains(rho) {
                    return Err(SceneryError::InvalidCoefficients(format!(
                        "rho = {rho} must lie in [0, 1)"
                    )));
                }
            }
            MaCoeffs::Explicit { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|a| !a.is_finite()) {
                    return Err(SceneryError::InvalidCoefficients(
                        "explicit coefficients must be a nonempty list of finite reals".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Coefficients `a_0..=a_K` actually used for realization.
    pub fn truncated(&self) -> Vec<f64> {
        match self {
            MaCoeffs::Geometric { rho } => {
                if *rho == 0.0 {
                    return vec![1.0];
                }
                // smallest K with rho^{K+1} / (1 - rho) <= tolerance
                let mut coeffs = vec![1.0];
                let mut a = 1.0;
                while a * rho / (1.0 - rho) > MA_TAIL_TOLERANCE {
                    a *= rho;
                    coeffs.push(a);
                }
                coeffs
            }
            MaCoeffs::Explicit { coeffs } => coeffs.clone(),
        }
    }

    /// `sum_{k >= j} |a_k|` of the untruncated rule.
    pub fn tail_abs(&self, j: usize) -> f64 {
        match self {
            MaCoeffs::Geometric { rho } => rho.powi(j as i32) / (1.0 - rho),
            MaCoeffs::Explicit { coeffs } => coeffs.iter().skip(j).rev().map(|a| a.abs()).sum(),
        }
    }
}

/// Bounded deterministic site profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    Constant {
        value: f64,
    },
    /// `base + amplitude * cos(2 pi i / period)`.
    Periodic {
        #[serde(default)]
        base: f64,
        amplitude: f64,
        period: u32,
    },
}

impl Profile {
    pub fn at(&self, i: i64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => *value,
            Profile::Periodic {
                base,
                amplitude,
                period,
            } => {
                let phase = i.rem_euclid(*period as i64) as f64 / *period as f64;
                base + amplitude * (2.0 * PI * phase).cos()
            }
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value.abs(),
            Profile::Periodic {
                base, amplitude, ..
            } => base.abs() + amplitude.abs(),
        }
    }

    pub fn inf(&self) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => *value,
            Profile::Periodic {
                base, amplitude, ..
            } => base - amplitude.abs(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Profile::Zero | Profile::Constant { .. } => true,
            Profile::Periodic {
                amplitude, period, ..
            } => *amplitude == 0.0 || *period == 1,
        }
    }

    fn validate(&self, name: &'static str) -> Result<(), SceneryError> {
        let finite = match self {
            Profile::Zero => true,
            Profile::Constant { value } => value.is_finite(),
            Profile::Periodic {
                base,
                amplitude,
                period,
            } => base.is_finite() && amplitude.is_finite() && *period >= 1,
        };
        if finite {
            Ok(())
        } else {
            Err(SceneryError::UnboundedProfile(name))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneryKind {
    Iid,
    CausalMa,
    HeavyTailIdent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneryModel {
    pub kind: SceneryKind,
    pub innovation: Innovation,
    /// Ignored for [`SceneryKind::Iid`].
    #[serde(default = "MaCoeffs::identity")]
    pub ma: MaCoeffs,
    #[serde(default = "Profile::zero")]
    pub mu: Profile,
    #[serde(default = "Profile::one")]
    pub sigma: Profile,
}

impl MaCoeffs {
    fn identity() -> Self {
        MaCoeffs::Explicit { coeffs: vec![1.0] }
    }
}

impl Profile {
    fn zero() -> Self {
        Profile::Zero
    }

    fn one() -> Self {
        Profile::Constant { value: 1.0 }
    }
}

impl SceneryModel {
    pub fn iid(innovation: Innovation) -> Self {
        SceneryModel {
            kind: SceneryKind::Iid,
            innovation,
            ma: MaCoeffs::identity(),
            mu: Profile::Zero,
            sigma: Profile::one(),
        }
    }

    pub fn causal_ma(innovation: Innovation, ma: MaCoeffs) -> Self {
        SceneryModel {
            kind: SceneryKind::CausalMa,
            innovation,
            ma,
            mu: Profile::Zero,
            sigma: Profile::one(),
        }
    }

    /// Identically distributed heavy-tailed scenery with independent values.
    pub fn pareto(tail_index: f64) -> Self {
        SceneryModel {
            kind: SceneryKind::HeavyTailIdent,
            innovation: Innovation::ParetoCentered { tail_index },
            ma: MaCoeffs::identity(),
            mu: Profile::Zero,
            sigma: Profile::one(),
        }
    }

    pub fn with_mu(mut self, mu: Profile) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_sigma(mut self, sigma: Profile) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<(), SceneryError> {
        self.innovation.validate()?;
        self.mu.validate("mu")?;
        self.sigma.validate("sigma")?;
        let inf = self.sigma.inf();
        if !(inf > 0.0) {
            return Err(SceneryError::NonPositiveSigma(inf));
        }
        if self.kind != SceneryKind::Iid {
            self.ma.validate()?;
        }
        if self.kind == SceneryKind::HeavyTailIdent && !(self.mu.is_constant() && self.sigma.is_constant()) {
            return Err(SceneryError::NotIdenticallyDistributed);
        }
        Ok(())
    }

    /// Coefficients used for realization.
    pub fn coefficients(&self) -> Vec<f64> {
        match self.kind {
            SceneryKind::Iid => vec![1.0],
            _ => self.ma.truncated(),
        }
    }

    /// The coefficient rule, with i.i.d. sceneries mapped to `a = [1]`.
    pub fn coefficient_rule(&self) -> MaCoeffs {
        match self.kind {
            SceneryKind::Iid => MaCoeffs::identity(),
            _ => self.ma.clone(),
        }
    }

    /// True when every site has the same law.
    pub fn identically_distributed(&self) -> bool {
        self.mu.is_constant() && self.sigma.is_constant()
    }

    /// `sup_i Var(xi_i)`.
    pub fn sup_variance(&self) -> f64 {
        let sum_sq: f64 = self.coefficients().iter().map(|a| a * a).sum();
        self.sigma.sup_abs().powi(2) * sum_sq * self.innovation.variance()
    }

    /// `Var(xi_i)`.
    pub fn variance_at(&self, i: i64) -> f64 {
        let sum_sq: f64 = self.coefficients().iter().map(|a| a * a).sum();
        self.sigma.at(i).powi(2) * sum_sq * self.innovation.variance()
    }

    /// `Cov(xi_i, xi_{i+j})` for `j >= 0`.
    pub fn covariance(&self, i: i64, j: usize) -> f64 {
        let a = self.coefficients();
        let lagged: f64 = a.iter().zip(a.iter().skip(j)).map(|(x, y)| x * y).sum();
        self.sigma.at(i) * self.sigma.at(i + j as i64) * lagged * self.innovation.variance()
    }

    /// Closed-form `P(xi_i >= x)` when the scenery is a single scaled
    /// innovation.
    pub fn tail_prob(&self, i: i64, x: f64) -> Option<f64> {
        let a = self.coefficients();
        if a.len() != 1 || a[0] <= 0.0 {
            return None;
        }
        let scale = self.sigma.at(i) * a[0];
        self.innovation.tail_prob((x - self.mu.at(i)) / scale)
    }
}

/// `E xi_i = mu_i + sigma_i (sum_k a_k) E eps`.
pub fn scenery_mean(model: &SceneryModel, i: i64) -> f64 {
    let eps_mean = model.innovation.mean();
    if eps_mean == 0.0 {
        return model.mu.at(i);
    }
    let sum_a: f64 = model.coefficients().iter().sum();
    model.mu.at(i) + model.sigma.at(i) * sum_a * eps_mean
}

/// Inclusive site interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteWindow {
    pub lo: i64,
    pub hi: i64,
}

impl SiteWindow {
    pub fn new(lo: i64, hi: i64) -> Self {
        SiteWindow { lo, hi }
    }

    /// `[-m, m]`.
    pub fn symmetric(m: i64) -> Self {
        SiteWindow { lo: -m, hi: m }
    }

    pub fn contains(&self, i: i64) -> bool {
        self.lo <= i && i <= self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }
}

/// A realized scenery.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenery {
    pub window: SiteWindow,
    pub values: Vec<f64>,
    pub model: SceneryModel,
}

impl Scenery {
    /// Scenery with explicit values on `[lo, lo + values.len() - 1]`.
    pub fn from_values(lo: i64, values: Vec<f64>, model: SceneryModel) -> Self {
        let hi = lo + values.len() as i64 - 1;
        Scenery {
            window: SiteWindow::new(lo, hi),
            values,
            model,
        }
    }

    #[inline]
    pub fn get(&self, i: i64) -> Option<f64> {
        if self.window.contains(i) {
            Some(self.values[(i - self.window.lo) as usize])
        } else {
            None
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let lo = self.window.lo;
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (lo + k as i64, v))
    }

    /// `xi_i - E xi_i` on the same window.
    pub fn centered_values(&self) -> Vec<f64> {
        self.iter()
            .map(|(i, v)| v - scenery_mean(&self.model, i))
            .collect()
    }
}

/// Innovations `eps_lo..=eps_hi`, keyed by site.
fn innovations(innovation: &Innovation, lo: i64, hi: i64, seed: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity((hi - lo + 1) as usize);
    for block in lo.div_euclid(BLOCK)..=hi.div_euclid(BLOCK) {
        let mut rng = rng_from(derive(seed, Stream::SceneryBlock, block as u64));
        let start = block * BLOCK;
        for site in start..start + BLOCK {
            let e = innovation.sample(&mut rng);
            if (lo..=hi).contains(&site) {
                out.push(e);
            }
        }
    }
    out
}

/// Realizes `model` on `window`. Independent of any walk seed; values at a
/// site depend only on `(model, site, seed)`.
pub fn gen_scenery(model: &SceneryModel, window: SiteWindow, seed: u64) -> Result<Scenery, SceneryError> {
    model.validate()?;
    if window.is_empty() {
        return Err(SceneryError::EmptyWindow {
            lo: window.lo,
            hi: window.hi,
        });
    }
    let a = model.coefficients();
    let lag = a.len() as i64 - 1;
    let eps = innovations(&model.innovation, window.lo - lag, window.hi, seed);
    let values = (window.lo..=window.hi)
        .map(|i| {
            // eps index of site s is s - (lo - lag)
            let base = (i - window.lo + lag) as usize;
            let ma: f64 = a.iter().enumerate().map(|(k, ak)| ak * eps[base - k]).sum();
            model.mu.at(i) + model.sigma.at(i) * ma
        })
        .collect();
    Ok(Scenery {
        window,
        values,
        model: model.clone(),
    })
}

/// One row of the uniform-integrability table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedMomentRow {
    pub threshold: f64,
    /// `sup_i` of the empirical `E[xi_i^2 1{|xi_i| > M}]` over the window.
    pub value: f64,
    /// Standard error of the estimate at the maximizing site.
    pub std_error: f64,
    pub site: i64,
}

/// Monte Carlo worst-site truncated second moment at each threshold.
pub fn uniform_integrability_diagnostic(
    model: &SceneryModel,
    window: SiteWindow,
    thresholds: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<TruncatedMomentRow>, SceneryError> {
    const MIN_SAMPLES: usize = 1000;
    if samples < MIN_SAMPLES {
        return Err(SceneryError::TooFewSamples {
            min: MIN_SAMPLES,
            got: samples,
        });
    }
    let width = window.len();
    // per (threshold, site): sum and sum of squares of xi^2 1{|xi| > M}
    let mut sums = vec![0.0f64; thresholds.len() * width];
    let mut sq = vec![0.0f64; thresholds.len() * width];
    for s in 0..samples {
        let sc = gen_scenery(model, window, derive(seed, Stream::Sample, s as u64))?;
        for (k, &v) in sc.values.iter().enumerate() {
            let x2 = v * v;
            for (t, &m) in thresholds.iter().enumerate() {
                if v.abs() > m {
                    sums[t * width + k] += x2;
                    sq[t * width + k] += x2 * x2;
                }
            }
        }
    }
    let n = samples as f64;
    Ok(thresholds
        .iter()
        .enumerate()
        .map(|(t, &threshold)| {
            let (k, mean) = (0..width)
                .map(|k| (k, sums[t * width + k] / n))
                .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
            let var = (sq[t * width + k] / n - mean * mean).max(0.0) * n / (n - 1.0);
            TruncatedMomentRow {
                threshold,
                value: mean,
                std_error: (var / n).sqrt(),
                site: window.lo + k as i64,
            }
        })
        .collect())
}
