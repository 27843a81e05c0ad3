//! Elastic-net sparse CRF training with safe dynamic feature screening.

// `!(x > 0.0)` style checks are meant to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod screening;
pub mod solver;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book;
