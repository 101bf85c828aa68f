//! Spectral toolkit for multi-point boundary value problems
//! `-u'' = λ r(x) u` on `(-1, 1)` with `u(±1) = Σ αᵢ± u(ηᵢ±)`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod characteristic;
pub mod error;
pub mod fd;
pub mod ivp;
pub mod nodal;
pub mod nonlinear;
pub mod numeric;
pub mod oracle;
pub mod problem;
pub mod scenarios;
pub mod spectrum;

pub use error::{Error, Result};
