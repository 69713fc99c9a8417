//! Coherent and measurement-based LQG design for linear quantum networks.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::large_enum_variant)]

pub mod baseline;
pub mod dmat;
pub mod dpa;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod lqg;
pub mod netgen;
pub mod optim;
pub mod qsys;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};
