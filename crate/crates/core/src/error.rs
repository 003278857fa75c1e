use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the measure, transform, convolution and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A measure failed its structural invariants (positivity, normalization, ordering).
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// Invalid user-facing parameters (measure families, sequence rules, options).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation requested at (or numerically too close to) a pole.
    #[error("pole at z = {}{:+}i: {reason}", .at.re, .at.im)]
    Pole { at: Complex64, reason: String },

    /// A bracketing root finder failed on the given interval.
    #[error("root finder did not converge on ({lo}, {hi})")]
    NoConvergence { lo: f64, hi: f64 },

    /// A computation that must be impossible for correct inputs (a bug signal).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An exact computation would exceed the configured atom budget.
    #[error("atom-count guard: step {step} would produce up to {projected} atoms (limit {limit})")]
    AtomGuard {
        step: usize,
        projected: usize,
        limit: usize,
    },

    /// A simulation would exceed the storage budget.
    #[error("resource guard: {0}")]
    Resource(String),

    /// Text parse failure; `position` is a 0-based character offset.
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
