//! Error and warning types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A sampling grid does not cover the required span around a field.
    #[error("frequency grid [{grid_min:.6e}, {grid_max:.6e}] rad/s too narrow: field requires [{required_min:.6e}, {required_max:.6e}] rad/s")]
    GridTooNarrow {
        grid_min: f64,
        grid_max: f64,
        required_min: f64,
        required_max: f64,
    },

    #[error("invalid frequency grid: step must be > 0 and count >= 2 (step {step:.6e}, count {count})")]
    InvalidGrid { step: f64, count: usize },

    #[error("{quantity} must be positive, got {value:.6e}")]
    NonPositive { quantity: &'static str, value: f64 },

    #[error("bin coefficients must have nonzero norm")]
    ZeroCoefficients,

    #[error("pulse must have at least one bin coefficient")]
    NoCoefficients,

    /// The large-chirp formulas require equal-and-opposite chirps with the
    /// photon positively chirped.
    #[error("chirp mismatch: photon chirp {photon:.6e} s^2 and pump chirp {pump:.6e} s^2 must be equal and opposite with photon chirp > 0")]
    ChirpMismatch { photon: f64, pump: f64 },

    /// Hard floor of the large-chirp regime: A^2 sigma_min^4 must exceed 10.
    #[error("chirp too weak for the large-chirp regime: A^2*sigma_min^4 = {a2s4:.3} <= 10")]
    WeakChirp { a2s4: f64 },

    #[error("bin count mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("bin spacing mismatch: {left:.6e} s vs {right:.6e} s")]
    SpacingMismatch { left: f64, right: f64 },

    #[error("pulse specs must share a bin spacing: {left:.6e} s vs {right:.6e} s")]
    BinSpacingMismatch { left: f64, right: f64 },

    #[error("monochromator window [{win_min:.6e}, {win_max:.6e}] rad/s extends outside the grid [{grid_min:.6e}, {grid_max:.6e}] rad/s")]
    WindowOutsideGrid {
        win_min: f64,
        win_max: f64,
        grid_min: f64,
        grid_max: f64,
    },

    #[error("fields must be sampled on the same grid")]
    GridMismatch,

    #[error("visibility must lie in [0, 1], got {value}")]
    VisibilityOutOfRange { value: f64 },

    #[error("not a density matrix: {reason}")]
    NotDensityMatrix { reason: String },

    #[error("count table must contain at least one positive entry")]
    EmptyCounts,

    #[error("count table has {got} entries but the measurement set has {expected}")]
    CountLengthMismatch { expected: usize, got: usize },

    #[error("resample count must be >= 2, got {got}")]
    TooFewResamples { got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Non-fatal diagnostics reported alongside results instead of being printed.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum Warning {
    /// Doubling the quadrature density still moved the normalized output by
    /// more than 1e-4 in L2 distance.
    QuadratureNotConverged { l2_change: f64 },
    /// The large-chirp expansion is used below A^2 sigma_min^4 = 100 where its
    /// accuracy degrades.
    WeakChirpRegime { a2s4: f64 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::QuadratureNotConverged { l2_change } => write!(
                f,
                "quadrature not converged: L2 change {l2_change:.3e} after doubling grid density"
            ),
            Warning::WeakChirpRegime { a2s4 } => write!(
                f,
                "weak chirp: A^2*sigma_min^4 = {a2s4:.3} < 100; large-chirp formulas lose accuracy"
            ),
        }
    }
}
