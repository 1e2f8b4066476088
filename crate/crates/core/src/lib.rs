#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod detector;
pub mod diff;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod predictor;
pub mod triage;

pub use error::{Error, Result};
