//! Campaign driver, file formats and command line around `compsched_core`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
mod error;
pub mod experiments;
pub mod metrics;
pub mod output;
pub mod seeds;
pub mod sim;

pub use error::{HarnessError, Result};
