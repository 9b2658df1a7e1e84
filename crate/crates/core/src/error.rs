//! Crate-wide error type.

use crate::Complex;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid: {0}")]
    InvalidGrid(String),

    #[error("envelope: {0}")]
    InvalidEnvelope(String),

    #[error("unit mismatch: operation requires {expected} units, envelope is {found}")]
    UnitMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("soliton spec: {0}")]
    InvalidSpec(String),

    #[error("singular dressing at eigenvalue {lambda}: degenerate auxiliary vector")]
    SingularDressing { lambda: Complex },

    #[error(
        "frame captures only {captured:.6} of the pulse energy (need >= {required}); \
         widen the window to at least {needed_span:.1} time units"
    )]
    Truncation {
        captured: f64,
        required: f64,
        needed_span: f64,
    },

    #[error("split-step instability at {distance_km:.3} km: energy grew by {growth:.3e} in one step")]
    StepInstability { distance_km: f64, growth: f64 },

    #[error("eigenvalue search did not converge from guess {guess}")]
    NonConvergence { guess: Complex },

    #[error("two eigenvalue guesses collapsed onto the same root {root}")]
    RootCollision { root: Complex },

    #[error("ill-conditioned Jost basis at the matching point (cond = {cond:.3e}) after {attempts} attempts")]
    IllConditioned { cond: f64, attempts: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("waveform file: {0}")]
    WaveFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
