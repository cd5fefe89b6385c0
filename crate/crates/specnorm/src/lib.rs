//! Variational calculus of the spectral norm and stability certificates for
//! spectral-norm regularized convex programs.

pub mod cones;
pub mod conic;
pub mod error;
pub mod kktstab;
pub mod matcore;
pub mod proxlib;
pub mod sampling;
pub mod sensitivity;

pub use error::{Error, Result};
