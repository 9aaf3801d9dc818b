pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod geweke;
pub mod mcmc;
pub mod model;
pub mod oracle;
pub mod priors;
pub mod quadrature;
pub mod rng;
pub mod simstudy;

pub use error::{Error, Result};
