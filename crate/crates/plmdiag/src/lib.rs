//! Dataset and model IO, the experiment harness and the command
//! implementations behind the `plmdiag` binary.

pub mod bundle;
pub mod checksum;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod trace;

pub use error::{Error, Result};
pub use plmdiag_core as core;
