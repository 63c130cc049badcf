//! Configuration, orchestration and artifacts for the `gsqg` command.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod initial;
pub mod manifest;
pub mod plot;
pub mod run;
pub mod snapshot;
pub mod suite;

pub use error::{CliError, Result};
