//! Truncated cumulant-series solutions of the quantum BBGKY hierarchy and of
//! the generalized quantum kinetic equation on finite-dimensional one-particle
//! Hilbert spaces.

pub mod cli;
pub mod combinatorics;
pub mod cumulants;
pub mod error;
pub mod model;
pub mod operator;
pub mod quadrature;
pub mod scaling;
pub mod solvers;
pub mod testing;

pub use error::{Error, Result};
pub use model::{Evolution, ModelSpec};
pub use operator::{CMatrix, ManyBodyOperator, C64};
