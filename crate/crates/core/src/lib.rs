//! Conversion between Helmholtz double-layer and single-layer potentials on
//! smooth closed surfaces.

pub mod cli;
pub mod convert;
pub mod density;
pub mod error;
pub mod fredholm;
pub mod harmonics;
pub mod kernels;
pub mod linalg;
pub mod oracle;
pub mod operators;
pub mod potentials;
pub mod quadrature;
pub mod surface;

pub use error::{Error, Result};
