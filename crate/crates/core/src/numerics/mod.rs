//! Shared numerical kernels.

pub mod bessel;
pub mod fit;
pub mod gamma;
pub mod logspace;
pub mod ode;
pub mod quad;
pub mod roots;

pub use bessel::{bessel_j, bessel_jy, bessel_y, BesselPair};
pub use fit::{fit_line, LineFit};
pub use gamma::{gamma, ln_gamma, ln_upper_gamma};
pub use logspace::SignedLog;
pub use ode::{integrate_ode, integrate_ode_with, DenseSolution, OdeOptions};
pub use quad::{quad_adaptive, quad_adaptive_with, quad_semi_infinite, QuadOptions, QuadResult};
pub use roots::find_root_bracketed;
