//! Monte Carlo laboratory for random walks in random scenery.
//!
//! A walk `S_0 = 0, S_n = X_1 + ... + X_n` reads a scenery `(xi_i)` indexed by
//! lattice sites, and the statistic of interest is `Z_n = sum_{k<=n} xi_{S_k}`.
//! The crate provides:
//!
//! - [`walk`]: i.i.d. lattice walks and long-range dependent Gaussian walks
//!   driven by fractional Gaussian noise.
//! - [`scenery`]: i.i.d., non-stationary causal moving-average, and
//!   heavy-tailed sceneries realized over a finite site window.
//! - [`localtime`]: exact occupation accounting (local times, intersection
//!   local times, `Z_n`).
//! - [`dependence`]: analytic theta-coefficient bounds for the shipped scenery
//!   models plus a Monte Carlo covariance-decay check.
//! - [`experiments`]: replicated simulations turning the strong-law statements
//!   and their moment bounds into finite-n diagnostics.
//!
//! Everything is a deterministic function of explicit `u64` seeds; see [`rng`].

pub mod dependence;
pub mod experiments;
pub mod localtime;
pub mod rng;
pub mod scenery;
pub mod stats;
pub mod walk;

pub use dependence::{ThetaBound, ThetaOrder};
pub use experiments::{ExperimentConfig, ExperimentError, ExperimentReport};
pub use localtime::LocalTimeProfile;
pub use scenery::{Scenery, SceneryModel, SiteWindow};
pub use walk::{WalkModel, WalkPath};
