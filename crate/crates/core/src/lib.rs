// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atom;
pub mod bloch;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fringe;
pub mod optimize;
pub mod phase;
pub mod quantum;
pub mod report;
pub mod zeno;

pub use error::{Error, Result};
