//! Variance-component inverse regression and a Monte Carlo study of whether
//! the leading principal component of a predictor tends to carry the largest
//! correlation with a linear response.

pub mod cli;
pub mod conjecture;
pub mod diagnostics;
pub mod error;
pub mod fit;
pub mod io;
pub mod likelihood;
pub mod models;
pub mod numerics;
pub mod plot;
pub mod randcov;

pub use error::{Error, Result};
