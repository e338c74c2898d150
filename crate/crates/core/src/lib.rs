//! Numerical core for simulating coherent measurement of time-bin encoded
//! photons by chirped-pulse sum-frequency generation.
//!
//! The crate covers the full chain: spectral synthesis of chirped multi-bin
//! pulses ([`pulse`]), upconversion spectra by exact quadrature and by the
//! large-chirp closed form ([`sfg`]), pulse-shaped projective measurements
//! ([`measure`]), entangled-pair coincidence statistics and CHSH evaluation
//! ([`entangle`]), and iterative maximum-likelihood state tomography with
//! Monte-Carlo error bars ([`tomo`]).
//!
//! Everything is deterministic: stochastic routines take explicit seeds and
//! use per-item generator streams, and the data-parallel kernels (rayon by
//! default, sequential without the `parallel` feature) fix the summation
//! order within each work item so results are identical across thread counts.

pub mod density;
pub mod entangle;
pub mod error;
pub mod grid;
pub mod measure;
mod par;
pub mod pulse;
pub mod rng;
pub mod sfg;
pub mod tomo;
pub mod units;

pub use density::DensityMatrix;
pub use entangle::{
    chsh_monte_carlo, chsh_value, coincidence_probability, fringe_scan, fringe_scan_counts,
    make_phi_plus, sample_counts, singles_probability, IdlerBasis, MeasurementSetting, NoiseModel,
    TwoQubitState, CHSH_OPTIMAL_PHASES,
};
pub use error::{Error, Result, Warning};
pub use grid::{FrequencyGrid, SpectralField};
pub use measure::{
    middle_peak_probability, projection_probability, projector_from_pulse, window_integrate,
    MonochromatorWindow, ProjectorSpec,
};
pub use par::parallel_enabled;
pub use pulse::{qubit_spec, sample_field, ChirpedPulseSpec, QuditState};
pub use sfg::{
    default_output_grid, peak_descriptors, separability_bounds, sfg_analytic, sfg_numeric,
    visibility_theoretical, PeakDescriptor, PeakLabel, SeparabilityReport, SfgRegime, SfgSpectrum,
};
pub use tomo::{build_36_set, mle_reconstruct, monte_carlo_errors, TomographySet};
