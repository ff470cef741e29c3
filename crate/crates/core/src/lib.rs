//! Memory-driven intrinsic cost estimation for constrained reinforcement
//! learning on exactly solvable tabular CMDPs.
// Negated comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cmdp;
pub mod critic;
pub mod envs;
pub mod error;
pub mod harness;
pub mod json;
pub mod memory;
pub mod policy;
pub mod rng;

pub use error::{MiceError, Result};
