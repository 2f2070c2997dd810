//! Numerical toolkit for generalized time-fractional evolution equations
//!
//! The equation `u(t) = u0 + ∫_0^t k(t,s) L u(s) ds` is solved by subordination:
//! `u(t) = Φ(t, L) u0` where `Φ(t, λ) = Σ c_n(t) λ^n` and the coefficients come from
//! the memory kernel `k`. Each piece has a deterministic and a stochastic realization
//! so they can be checked against each other.
//!
//! * [`specfun`]: Mittag-Leffler family, M-Wright density, Appell F3.
//! * [`kernels`]: memory kernels, admissibility estimates, coefficient recursion.
//! * [`phi`]: series, closed-form and Volterra evaluation of Φ, monotonicity checks,
//!   CDF of the time-change law.
//! * [`sampling`]: stable subordinators, mixing variables, fBm and process paths.
//! * [`fk`]: Monte Carlo Feynman-Kac estimators.
//! * [`oracle`]: quadrature, spectral and finite-difference reference solutions.
//! * [`validate`]: the cross-validation matrix used by the CLI and the acceptance tests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fk;
pub mod kernels;
pub mod oracle;
pub mod phi;
pub mod quad;
pub mod sampling;
pub mod specfun;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
