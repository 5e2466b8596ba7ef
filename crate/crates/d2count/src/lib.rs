//! Deterministic approximate counting for degree-2 polynomial threshold
//! functions.
//!
//! Given a degree-2 polynomial `p` with rational coefficients, the crate
//! estimates `Pr[p(x) >= 0]` to additive error `eps`, where `x` is either a
//! standard Gaussian vector or uniform on the hypercube `{-1,1}^n`, and
//! estimates absolute moments `E[|p(x)|^k]` over the hypercube.  No step
//! uses randomness: every output is a deterministic function of the input
//! polynomial, `eps` and the [`config::Config`].
//!
//! The pipeline is split into stages that can be used on their own:
//!
//! * [`poly`] — the polynomial data model and exact statistics;
//! * [`spectral`] — a derandomized largest-eigenvalue routine;
//! * [`decouple`] — one decoupling step and the reduction of a polynomial
//!   to a decoupled junta `sum_i (lambda_i y_i^2 + mu_i y_i) + C`;
//! * [`gausscount`] — counting for decoupled juntas via a normal cover and
//!   exact dynamic programming, and the Gaussian counter built on it;
//! * [`boolcount`] — the regularity decision tree and the hypercube counter;
//! * [`moments`] — absolute moments by histogramming with the hypercube
//!   counter;
//! * [`harness`] — brute-force and Monte Carlo oracles, run reports and the
//!   command-line front end.

pub mod boolcount;
pub mod config;
pub mod decouple;
pub mod error;
pub mod gausscount;
pub mod harness;
pub mod moments;
pub mod poly;
pub mod spectral;
pub mod util;

pub use config::Config;
pub use error::{Error, Result};
