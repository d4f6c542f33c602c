//! Direct and inverse spectral theory of `L_q(theta) y = i y''' + q(x) y` on `[0, l]`
//! with `y(0) = 0`, `y'(l) = theta y'(0)`, `y(l) = 0`.

pub mod bvp;
pub mod error;
pub mod gtrig;
pub mod inverse;
pub mod l0;
pub mod lq;
pub mod numerics;
pub mod potential;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
