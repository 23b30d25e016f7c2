//! Chebyshev acceleration of simulation-based counterparty credit exposure.
//!
//! The crate is `no_std` and only needs `alloc`. It holds the numerical
//! pieces of the pipeline:
//!
//! * [`simulation`]: Euler schemes for the BSM, Merton jump-diffusion and
//!   Heston models on an equidistant exposure grid.
//! * [`pricing`]: reference ("black-box") pricers, i.e. Black-Scholes closed
//!   forms, the COS method and a CRR binomial tree for American puts.
//! * [`chebyshev`]: piecewise (1D and tensorised 2D) Chebyshev interpolants,
//!   their derivatives and the degree-doubling adaptive fit.
//! * [`exposure`]: path-wise exposure cubes, knock-out/exercise masking and
//!   the quantile-based exposure measures (EE, PFE, CES, spectral).
//! * [`xva`]: CVA delta and sensitivity-based initial margin / MVA.
//! * [`bounds`]: error-bound diagnostics and the (L, N, M) parameter planner.
//!
//! IO, timing, configuration files and the command line live in the
//! companion `chebexpo-cli` crate.
#![no_std]
#![forbid(unsafe_code)]
// `!(a < b)` is the deliberate NaN-rejecting form throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bounds;
pub mod chebyshev;
pub mod error;
pub mod exposure;
pub mod math;
pub mod pricing;
pub mod simulation;
pub mod xva;

pub use error::{Error, Result};
