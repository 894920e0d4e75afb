//! Component models of age-correlated demographic schedules.
//!
//! Schedules (mortality or fertility rates by age) are stacked as columns of
//! a matrix and factorized with a singular value decomposition. A few scaled
//! left singular vectors then describe every schedule through a short vector
//! of weights, which can be smoothed, regressed on covariates, predicted and
//! clustered.

pub mod cluster;
pub mod error;
pub mod image;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod par;
pub mod regress;
pub mod schedule;

pub use error::{Error, Result};
