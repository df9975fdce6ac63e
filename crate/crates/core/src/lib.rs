//! Spectral simulation of stochastic PDEs with additive Gaussian noise on the
//! torus, together with numerical checks of the Gaussian-measure,
//! regularity and long-time-behaviour properties of their solutions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gaussian;
pub mod io;
pub mod linear;
pub mod markov;
pub mod rng;
pub mod semilinear;
pub mod spectral;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
pub use spectral::{DiagonalOperator, FourierGrid, SpectralField};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
