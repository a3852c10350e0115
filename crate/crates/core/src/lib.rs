//! Numerics for maxima of self-normalized sums in high dimensions.
//!
//! The crate covers the full pipeline from raw samples to explicit
//! Berry-Esseen-type error bounds: sampling of correlated heavy- or
//! light-tailed vectors, truncation-level fixed points, self-normalized
//! and tilted max statistics, Gaussian max-distribution machinery, and
//! closed-form bound evaluators. Everything is deterministic given a seed
//! and builds without `std` (alloc only); IO and parallelism live in the
//! companion CLI crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bounds;
mod error;
mod fmath;
pub mod gaussian;
pub mod linalg;
pub mod quad;
pub mod rng;
pub mod sampling;
pub mod special;
pub mod statistics;
pub mod truncation;

pub use error::{CoreError, ErrorClass};
