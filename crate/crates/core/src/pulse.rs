//! Analytic descriptions of chirped multi-bin Gaussian spectral fields and
//! their sampling onto frequency grids.
//!
//! A pulse with center omega0, intensity RMS bandwidth sigma, chirp A, global
//! delay delta and bin coefficients c_j at spacing tau has spectral amplitude
//!
//! ```text
//! E(omega) = exp[-(omega-omega0)^2/(4 sigma^2)]
//!          * exp[i A (omega-omega0)^2] * exp[i omega delta]
//!          * sum_j c_j exp[i j omega tau]
//! ```
//!
//! The bin phase is attached at sampling time, so stored coefficients carry
//! only the preparation amplitudes and phases.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, SpectralField};

/// Half-width, in units of sigma, that a grid must cover around each field.
pub const COVERAGE_SIGMAS: f64 = 5.0;

/// Maximum phase advance per grid step tolerated by the default grids.
const MAX_PHASE_STEP: f64 = std::f64::consts::PI / 8.0;

/// One chirped, possibly multi-bin Gaussian pulse.
///
/// Invariants enforced at construction: sigma > 0, at least one bin, unit-norm
/// coefficients. The chirp may be zero (transform-limited) or negative.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpedPulseSpec {
    center: f64,
    sigma: f64,
    chirp: f64,
    delay: f64,
    bin_spacing: f64,
    coefficients: Vec<Complex64>,
}

impl ChirpedPulseSpec {
    /// Builds a spec, normalizing `coefficients` to unit total weight.
    pub fn new(
        center: f64,
        sigma: f64,
        chirp: f64,
        delay: f64,
        bin_spacing: f64,
        coefficients: Vec<Complex64>,
    ) -> Result<Self> {
        if !(center > 0.0) {
            return Err(Error::NonPositive {
                quantity: "center angular frequency",
                value: center,
            });
        }
        if !(sigma > 0.0) {
            return Err(Error::NonPositive {
                quantity: "sigma",
                value: sigma,
            });
        }
        if coefficients.is_empty() {
            return Err(Error::NoCoefficients);
        }
        let norm: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroCoefficients);
        }
        let scale = norm.sqrt().recip();
        Ok(Self {
            center,
            sigma,
            chirp,
            delay,
            bin_spacing,
            coefficients: coefficients.into_iter().map(|c| c * scale).collect(),
        })
    }

    /// Single-bin transform-limited pulse; a convenient starting point.
    pub fn gaussian(center: f64, sigma: f64) -> Result<Self> {
        Self::new(center, sigma, 0.0, 0.0, 0.0, vec![Complex64::new(1.0, 0.0)])
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn chirp(&self) -> f64 {
        self.chirp
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn bin_spacing(&self) -> f64 {
        self.bin_spacing
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn bins(&self) -> usize {
        self.coefficients.len()
    }

    pub fn with_chirp(mut self, chirp: f64) -> Self {
        self.chirp = chirp;
        self
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_coefficients(
        self,
        coefficients: Vec<Complex64>,
        bin_spacing: f64,
    ) -> Result<Self> {
        Self::new(
            self.center,
            self.sigma,
            self.chirp,
            self.delay,
            bin_spacing,
            coefficients,
        )
    }

    /// Spectral amplitude at one frequency, from the closed form.
    pub fn amplitude_at(&self, omega: f64) -> Complex64 {
        let x = omega - self.center;
        let envelope = (-x * x / (4.0 * self.sigma * self.sigma)).exp();
        let phase = self.chirp * x * x + omega * self.delay;
        let mut bins = Complex64::new(0.0, 0.0);
        for (j, c) in self.coefficients.iter().enumerate() {
            bins += c * Complex64::from_polar(1.0, j as f64 * omega * self.bin_spacing);
        }
        Complex64::from_polar(envelope, phase) * bins
    }

    /// Step size for which chirp, delay and bin phases all advance by less
    /// than pi/8 per sample, capped at sigma/8 so the envelope is resolved.
    pub fn default_grid_step(&self) -> f64 {
        let chirp_rate = 10.0 * self.chirp.abs() * self.sigma;
        let linear_rate =
            (self.bins() - 1) as f64 * self.bin_spacing.abs() + self.delay.abs();
        let phase_rate = chirp_rate.max(linear_rate);
        let envelope_step = self.sigma / 8.0;
        if phase_rate > 0.0 {
            envelope_step.min(MAX_PHASE_STEP / phase_rate)
        } else {
            envelope_step
        }
    }

    /// Grid covering `center +- 5 sigma` at the default resolution.
    pub fn default_grid(&self) -> FrequencyGrid {
        FrequencyGrid::spanning(
            self.center,
            COVERAGE_SIGMAS * self.sigma,
            self.default_grid_step(),
        )
        .expect("sigma > 0 guarantees a valid grid")
    }
}

/// Sets qubit coefficients `(cos theta, e^{i phi} sin theta)` on `base`.
pub fn qubit_spec(theta: f64, phi: f64, base: &ChirpedPulseSpec) -> ChirpedPulseSpec {
    let mut spec = base.clone();
    spec.coefficients = vec![
        Complex64::new(theta.cos(), 0.0),
        Complex64::from_polar(theta.sin(), phi),
    ];
    // keep the stored norm exact even at theta where cos/sin rounding bites
    let norm: f64 = spec.coefficients.iter().map(|c| c.norm_sqr()).sum();
    let scale = norm.sqrt().recip();
    for c in &mut spec.coefficients {
        *c *= scale;
    }
    spec
}

/// Samples the spec on `grid` and normalizes to unit L2 norm.
///
/// Errors if the grid fails to cover `center +- 5 sigma`; the error reports
/// the required span.
pub fn sample_field(spec: &ChirpedPulseSpec, grid: &FrequencyGrid) -> Result<SpectralField> {
    let mut field = sample_field_unnormalized(spec, grid)?;
    field.normalize()?;
    Ok(field)
}

/// As sampled, before normalization; used by grid-convergence checks.
pub(crate) fn sample_field_unnormalized(
    spec: &ChirpedPulseSpec,
    grid: &FrequencyGrid,
) -> Result<SpectralField> {
    grid.require_coverage(spec.center, COVERAGE_SIGMAS * spec.sigma)?;
    let amplitude = grid.omegas().map(|w| spec.amplitude_at(w)).collect();
    SpectralField::new(grid.clone(), amplitude)
}

/// Pure time-bin state: `|psi> = sum_j c_j |t_j>` with unit-norm coefficients
/// over `dimension >= 2` bins separated by `bin_spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuditState {
    coefficients: Vec<Complex64>,
    bin_spacing: f64,
}

impl QuditState {
    pub fn new(coefficients: Vec<Complex64>, bin_spacing: f64) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: coefficients.len(),
            });
        }
        let norm: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroCoefficients);
        }
        let scale = norm.sqrt().recip();
        Ok(Self {
            coefficients: coefficients.into_iter().map(|c| c * scale).collect(),
            bin_spacing,
        })
    }

    /// Time-bin qubit `cos theta |e> + e^{i phi} sin theta |l>`.
    pub fn qubit(theta: f64, phi: f64, bin_spacing: f64) -> Self {
        Self::new(
            vec![
                Complex64::new(theta.cos(), 0.0),
                Complex64::from_polar(theta.sin(), phi),
            ],
            bin_spacing,
        )
        .expect("qubit coefficients have unit norm")
    }

    pub fn dimension(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn bin_spacing(&self) -> f64 {
        self.bin_spacing
    }

    /// The state described by a pulse spec's bin coefficients.
    pub fn from_pulse(spec: &ChirpedPulseSpec) -> Result<Self> {
        Self::new(spec.coefficients().to_vec(), spec.bin_spacing())
    }
}
