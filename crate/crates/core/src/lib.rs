//! Numerical laboratory for the metric horn.
//!
//! The horn is the weighted warped product `dr² + (r^{1+ε}/2)² g_{S^{n-1}}` carrying the
//! measure weight `r^{(N-n)(1-η)}`. This crate builds separated solutions of the
//! eigenvalue and heat equations near its singular tip and measures how they vanish
//! there:
//!
//! * [`geometry`] holds the parameters and the closed-form geometric quantities.
//! * [`numerics`] provides Bessel and Gamma functions, an adaptive Dormand–Prince
//!   integrator with dense output, Gauss–Kronrod quadrature, Brent root finding,
//!   line fits and signed log-space arithmetic.
//! * [`modes`] constructs the growing and decaying branches of the transformed radial
//!   equation and the tip-decaying radial profiles, all in log space.
//! * [`elliptic`] and [`parabolic`] evaluate the elliptic and parabolic frequency
//!   functionals and check the identities and bounds they satisfy.
//! * [`spectral`] computes Dirichlet eigenpairs of the truncated horn by Prüfer
//!   shooting and assembles caloric series from them.
//! * [`run`] is the batch driver behind the `hornlab` binary.

// `!(x > 0.0)` is the idiom for rejecting NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptic;
pub mod error;
pub mod frequency;
pub mod geometry;
pub mod modes;
pub mod numerics;
pub mod output;
pub mod parabolic;
pub mod run;
pub mod spectral;

pub use error::{HornError, Result};
pub use geometry::HornParams;
