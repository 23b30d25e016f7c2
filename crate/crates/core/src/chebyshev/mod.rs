//! Piecewise Chebyshev interpolation of pricing functions.
//!
//! A value function is interpolated on each piece of a [`ChebDomain`] at the
//! points `tau(cos(pi k / N))`, where `tau` maps `[-1, 1]` affinely onto the
//! piece with `1 -> b`. Evaluation uses Clenshaw's recurrence, and in two
//! dimensions a tensor grid with nested Clenshaw sums.

pub mod approx;
pub mod basis;
pub mod domain;

pub use approx::{
    adaptive_fit, cheb_error_estimate, fit_fixed, AdaptiveOptions, AdaptiveReport, ChebDomain, ChebyshevApproximant,
    Linear, Piece, Provenance, Tail,
};
pub use basis::{clenshaw, derivative, fit, nodes};
pub use domain::{asymptotes, build_domain, build_domains, value_bounds, value_scale, DomainOptions};

#[cfg(test)]
mod tests;
