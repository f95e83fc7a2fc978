//! Water-tree cable diagnostics with power line modems.
//!
//! This crate holds the allocation-only, IO-free part of the workbench:
//!
//! * [`dielectric`]: water-tree growth, equivalent age and composite permittivity.
//! * [`netmodel`]: per-unit-length parameters, ABCD cascades and the T-network
//!   channel solver producing `H_f`, `Z_in` and `H_ref`.
//! * [`scenario`]: seeded scenario sampling and labelled samples.
//! * [`reflectometry`]: modem-side joint time-frequency reflectometry.
//! * [`learning`]: features, standardization, SVM (SMO), AdaBoost and L2Boost.
//! * [`pipeline`]: the multi-stage diagnosis and its training orchestration.
//!
//! File formats, the CLI and parallel dataset generation live in the `plmdiag`
//! companion crate.
#![no_std]

extern crate alloc;

pub mod codec;
pub mod dielectric;
pub mod error;
pub mod fft;
pub mod learning;
pub mod netmodel;
pub mod pipeline;
pub mod reflectometry;
pub mod scenario;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Seconds in a (Julian) year; the aging law is evaluated with time in seconds.
pub const SECONDS_PER_YEAR: f64 = 3.156e7;
