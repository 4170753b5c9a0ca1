pub mod cli;
pub mod contact;
pub mod cr;
pub mod error;
pub mod expr;
pub mod forms;
pub mod jet;
pub mod quadrature;
pub mod sampling;
pub mod spectral;
pub mod suites;
pub mod symmetry;

pub use error::{Error, Result};
