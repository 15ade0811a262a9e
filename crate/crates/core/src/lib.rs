// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dualvar;
pub mod error;
pub mod extension;
pub mod geometry;
pub mod io;
pub mod quadrature;
pub mod resolvent;
pub mod specfun;
pub mod thresholds;

pub use error::{Error, Result};

/// Library version recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
