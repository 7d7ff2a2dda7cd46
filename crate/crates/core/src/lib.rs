//! Stochastic-geometry toolkit for isotropic convex bodies: random symmetric
//! polytopes and their mean width, sphere-averaged marginal tails, the
//! Orlicz-function representation of support levels, and Gaussian reference
//! checks.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bodies;
pub mod cli;
pub mod error;
pub mod gaussref;
pub mod marginals;
pub mod orlicz;
pub mod polytope;
pub mod quad;
pub mod sampling;
pub mod stats;

pub use bodies::{Body, BodyKind};
pub use error::{Error, Result};
pub use sampling::{Points, SampleBatch, StreamSpec};
pub use stats::EstimateWithError;

/// Dot product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
