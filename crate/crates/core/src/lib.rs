//! Smooth nonparametric maximum likelihood empirical Bayes for the
//! hierarchical Gaussian location model
//!
//! ```text
//! X_i | θ_i ~ N(θ_i, σ_i²),   θ_i | ξ_i ~ N(ξ_i, c²),   ξ_i ~ H
//! ```
//!
//! The crate fits the mixing distribution `H` by grid NPMLE, turns it into a
//! smooth prior `g = H ⋆ N(0, c²)`, and builds everything downstream of that
//! prior: posterior means, posterior densities, marginal coverage sets with a
//! constant posterior-density threshold, HPD sets, inference on the largest
//! Gaussian component `c₀` of the prior, and goodness-of-fit tests for a
//! single-Gaussian prior.
//!
//! The crate is `no_std` + `alloc`. All randomness is driven by explicit
//! seeds through counter-based ChaCha streams, so every result is a pure
//! function of its inputs.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod coverage;
mod error;
pub mod gof;
pub mod identify;
pub mod linprog;
pub mod math;
pub mod metrics;
pub mod model;
pub mod npmle;
pub mod posterior;
pub mod quad;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use model::{DiscreteMixture, Grid, Interval, IntervalUnion, Sample, SmoothModel};
