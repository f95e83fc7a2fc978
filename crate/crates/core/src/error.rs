use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the diagnostics core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("singular {what} (|denominator| = {magnitude:e})")]
    Singular { what: &'static str, magnitude: f64 },

    #[error("invalid cable geometry: d_cond = {d_cond} m must exceed 2 * r_cond = {two_r} m")]
    Geometry { d_cond: f64, two_r: f64 },

    #[error("singular network matrix at frequency point {index} ({frequency} Hz)")]
    SingularNetwork { index: usize, frequency: f64 },

    #[error("chirp band {f_high} Hz exceeds Nyquist {nyquist} Hz")]
    Nyquist { f_high: f64, nyquist: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("localization unavailable: {0}")]
    LocalizationUnavailable(&'static str),

    #[error("infeasible scenario geometry after {attempts} draws: {reason}")]
    InfeasibleGeometry { attempts: u32, reason: &'static str },

    #[error("{task}: {n_samples} training samples is below 10x the {n_features} features")]
    InsufficientSamples {
        task: String,
        n_samples: usize,
        n_features: usize,
    },

    #[error("training data for {0} contains a single class")]
    SingleClass(String),

    #[error("class imbalance for {task}: positive fraction {fraction} outside configured bound")]
    ClassImbalance { task: String, fraction: f64 },

    #[error("task {task} requires the observation of PLM {plm}")]
    MissingObservation { task: String, plm: usize },

    #[error("empty input to {0}")]
    Empty(&'static str),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("ambiguous stage-1 votes {votes:?}: more than one PLM reports a localized degradation")]
    AmbiguousVotes { votes: Vec<bool> },

    #[error("bundle has no model for task {0}")]
    MissingModel(String),

    #[error("{task}: solver stopped with KKT gap {gap:e} above tolerance {tolerance:e}")]
    NotConverged { task: String, gap: f64, tolerance: f64 },

    #[error("malformed encoded data: {0}")]
    Decode(&'static str),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(what: &'static str, value: f64) -> Error {
    Error::Domain { what, value }
}
