//! Error type shared by model construction, simulation, and estimation.
//!
//! Contract violations (mismatched slice lengths, querying a time constant of
//! a gate that has none) panic instead: they indicate a bug in the caller, not
//! a recoverable condition. The variants here cover the failures a correct
//! caller can still run into — bad configuration data, numerical blow-up, and
//! traces too short to measure.

use thiserror::Error;

/// Errors reported by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A network description or run configuration failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The integration produced a non-finite state component.
    #[error("state diverged at t = {t} ms (component {component})")]
    Divergence {
        /// Simulation time at which the non-finite value was detected.
        t: f64,
        /// Index of the offending component in the flat state vector.
        component: usize,
    },

    /// The recursive least-squares covariance lost positive definiteness.
    #[error("numerical degradation: {0}")]
    NumericalDegradation(String),

    /// A metric was requested from a trace that cannot support it.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for a configuration error with a formatted message.
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
