//! Exact-arithmetic machinery for counting rational points on the singular
//! cubic hypersurfaces x^3 = Q(y_1,...,y_m) z, where Q is a primitive positive
//! definite quadratic form with integer coefficients.
//!
//! The crate computes p-adic local densities (with brute-force oracles),
//! singular series, exact representation numbers and height-bounded point
//! counts, and the Euler-product leading constants of the asymptotics.

pub mod arith;
pub mod constants;
pub mod counting;
pub mod density;
pub mod error;
pub mod fixtures;
pub mod padic;
pub mod qform;
pub mod singular;
pub mod verify;

pub use error::{Error, Result};
pub use qform::{FormInvariants, QuadraticForm};
