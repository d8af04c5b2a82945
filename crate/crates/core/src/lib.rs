//! Simulation and bound calculation for the two-user additive Gaussian
//! multiple-access channel operated with variable-length feedback codes.
//!
//! The crate is organized around the three information-density random walks
//! that drive a stop-feedback decoder:
//!
//! - [`channel`] — channel model, single-letter statistics, and the closed
//!   forms of the three information densities.
//! - [`walk`] — first-passage simulation and renewal-theoretic estimators
//!   (ladder moments, walk minima, first-passage mean/variance expansions,
//!   measure-change checks).
//! - [`coding`] — the stop-feedback coding scheme itself: lazy Gaussian
//!   codebooks, threshold decoding, the early-abort wrapper that trades
//!   error probability for expected length, and scheme-level audits.
//! - [`bounds`] — second-order constants assembled from the walk estimates,
//!   achievable/converse rate bounds, and capacity-region boundaries.
//! - [`cli`] — the `vlfmac` command-line front end.
//!
//! All randomness flows through [`rng`], a deterministic counter-based
//! generator, so every Monte Carlo result is a pure function of the master
//! seed regardless of thread count.

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod coding;
pub mod error;
pub mod rng;
pub mod stats;
pub mod walk;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
