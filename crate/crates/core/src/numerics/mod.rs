//! Special functions, the composite rate integrals, quadrature and random
//! sampling shared by every other module.

pub mod integrals;
pub mod quadrature;
pub mod random;
pub mod special;
pub mod stats;

pub use integrals::{integral_i1, integral_i2, integral_i3};
pub use quadrature::{integrate_log_scale, QuadResult, QuadratureSpec};
pub use random::{sample_beta_1_n, sample_complex_gaussian_vec, sample_gamma, RngStream};
pub use special::{bessel_j0, beta_fn, expint_en, gamma_upper_negint, scaled_expint};
