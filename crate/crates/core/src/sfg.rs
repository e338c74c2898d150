//! Sum-frequency spectra of a chirped photon and a shaped strong pulse,
//! computed two independent ways:
//!
//! * [`sfg_numeric`] — first-order convolution `E3(w3) = int dw1 E1(w1) EL(w3-w1)`
//!   by trapezoid quadrature on the photon grid, with the pump evaluated in
//!   closed form at the shifted argument. This is the oracle; it makes no
//!   large-chirp assumption.
//! * [`sfg_analytic`] — the large-chirp stationary-phase expansion: one
//!   Gaussian peak per (photon bin, pump bin) pair with width
//!   `sigma3 = sqrt(1/sigma1^2 + 1/sigma2^2)/(4A)` and center offset
//!   `delta_jk/(2A)`, valid for opposite chirps with `A^2 sigma^4 >> 1`.
//!
//! Peak geometry, visibility, and the bin-separability bounds come from the
//! same expansion.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result, Warning};
use crate::grid::{trapezoid, FrequencyGrid, SpectralField};
use crate::par::par_map_with;
use crate::pulse::{sample_field, ChirpedPulseSpec, COVERAGE_SIGMAS};
use crate::units::{angular_to_wavelength, sigma_to_fwhm_wavelength};

/// L2 movement (after normalization) tolerated when the quadrature density is
/// doubled; larger movement raises [`Warning::QuadratureNotConverged`].
pub const QUADRATURE_CONVERGENCE_TOL: f64 = 1e-4;

/// Hard floor and warning threshold on `A^2 sigma_min^4` for the large-chirp
/// expansion. The derivation only requires "much greater than one"; these two
/// cutoffs are this crate's operational choice.
pub const REGIME_HARD_FLOOR: f64 = 10.0;
pub const REGIME_WARN_FLOOR: f64 = 100.0;

/// Spectrum plus any non-fatal diagnostics raised while computing it.
#[derive(Debug, Clone)]
pub struct SfgSpectrum {
    pub field: SpectralField,
    pub warnings: Vec<Warning>,
}

/// Which SFG peak a descriptor refers to. `Pair` identifies the raw
/// (photon bin, pump bin) contribution before same-shift terms merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PeakLabel {
    Red,
    Middle,
    Blue,
    Pair { photon_bin: usize, pump_bin: usize },
}

impl std::fmt::Display for PeakLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PeakLabel::Red => write!(f, "red"),
            PeakLabel::Middle => write!(f, "middle"),
            PeakLabel::Blue => write!(f, "blue"),
            PeakLabel::Pair { photon_bin, pump_bin } => write!(f, "pair({photon_bin},{pump_bin})"),
        }
    }
}

/// Geometry of one upconverted peak.
#[derive(Debug, Clone, Serialize)]
pub struct PeakDescriptor {
    pub label: PeakLabel,
    /// Center in rad/s.
    pub central_angular_frequency: f64,
    /// Center in meters, `2 pi c / omega`.
    pub central_wavelength: f64,
    /// RMS width of the intensity peak in rad/s.
    pub rms_width: f64,
    /// Intensity FWHM converted to wavelength, in meters.
    pub fwhm_wavelength: f64,
    /// Fraction of the total output intensity in this peak (all peaks sum to 1).
    pub integrated_intensity: f64,
}

impl PeakDescriptor {
    /// FWHM in wavelength after convolving the intensity with a Gaussian
    /// instrument response of the given FWHM (widths add in quadrature).
    pub fn convolved_fwhm_wavelength(&self, instrument_fwhm: f64) -> f64 {
        (self.fwhm_wavelength * self.fwhm_wavelength + instrument_fwhm * instrument_fwhm).sqrt()
    }
}

/// The bin-spacing interval inside which the three peaks are resolvable yet
/// still interfere: `sqrt(1/s1^2 + 1/s2^2) < tau < 4A s1 s2 / sqrt(s1^2+s2^2)`.
#[derive(Debug, Clone, Serialize)]
pub struct SeparabilityReport {
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub tau: f64,
    pub separable: bool,
    pub interferes: bool,
}

/// Validated opposite-chirp configuration with the derived output-peak
/// geometry. Constructing one enforces every precondition of the large-chirp
/// operations, so downstream code can assume the regime.
#[derive(Debug, Clone)]
pub struct SfgRegime {
    chirp: f64,
    sigma_photon: f64,
    sigma_pump: f64,
    /// pump delay minus photon delay
    delta: f64,
    tau: f64,
    sum_center: f64,
    warnings: Vec<Warning>,
}

impl SfgRegime {
    pub fn from_specs(photon: &ChirpedPulseSpec, pump: &ChirpedPulseSpec) -> Result<Self> {
        let a = photon.chirp();
        let rel = (a + pump.chirp()).abs();
        if !(a > 0.0) || rel > 1e-9 * a.abs() {
            return Err(Error::ChirpMismatch {
                photon: a,
                pump: pump.chirp(),
            });
        }
        if photon.bin_spacing() != pump.bin_spacing() {
            return Err(Error::BinSpacingMismatch {
                left: photon.bin_spacing(),
                right: pump.bin_spacing(),
            });
        }
        let sigma_min = photon.sigma().min(pump.sigma());
        let a2s4 = a * a * sigma_min.powi(4);
        if a2s4 <= REGIME_HARD_FLOOR {
            return Err(Error::WeakChirp { a2s4 });
        }
        let mut warnings = Vec::new();
        if a2s4 <= REGIME_WARN_FLOOR {
            warnings.push(Warning::WeakChirpRegime { a2s4 });
        }
        Ok(Self {
            chirp: a,
            sigma_photon: photon.sigma(),
            sigma_pump: pump.sigma(),
            delta: pump.delay() - photon.delay(),
            tau: photon.bin_spacing(),
            sum_center: photon.center() + pump.center(),
            warnings,
        })
    }

    pub fn chirp(&self) -> f64 {
        self.chirp
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    /// RMS width of every output peak: `sqrt(1/s1^2 + 1/s2^2) / (4A)`.
    pub fn sigma3(&self) -> f64 {
        (1.0 / (self.sigma_photon * self.sigma_photon)
            + 1.0 / (self.sigma_pump * self.sigma_pump))
            .sqrt()
            / (4.0 * self.chirp)
    }

    /// Center of the middle peak, `w01 + w02 + delta/(2A)`.
    pub fn middle_center(&self) -> f64 {
        self.sum_center + self.delta / (2.0 * self.chirp)
    }

    /// Absorbed constant phase `omega_M * tau` that maps pump phases onto
    /// measurement phases.
    pub fn phase_reference(&self) -> f64 {
        self.middle_center() * self.tau
    }
}

/// Center of the peak produced by photon bin `j` against pump bin `k`:
/// the shift is `(delta + (k - j) tau) / (2A)`.
pub fn bin_pair_center(regime: &SfgRegime, photon_bin: usize, pump_bin: usize) -> f64 {
    let djk = regime.delta + (pump_bin as f64 - photon_bin as f64) * regime.tau;
    regime.sum_center + djk / (2.0 * regime.chirp)
}

fn require_out_coverage(
    photon: &ChirpedPulseSpec,
    pump: &ChirpedPulseSpec,
    out_grid: &FrequencyGrid,
) -> Result<()> {
    out_grid.require_coverage(
        photon.center() + pump.center(),
        COVERAGE_SIGMAS * (photon.sigma() + pump.sigma()),
    )
}

/// Default output grid for a photon/pump pair: covers the mandatory
/// `w01 + w02 +- 5 (s1 + s2)` window (stretched to keep displaced peaks well
/// inside it) at a step resolving the narrowest expected feature.
pub fn default_output_grid(photon: &ChirpedPulseSpec, pump: &ChirpedPulseSpec) -> FrequencyGrid {
    let center = photon.center() + pump.center();
    let mut half = COVERAGE_SIGMAS * (photon.sigma() + pump.sigma());
    let broad = (photon.sigma() * photon.sigma() + pump.sigma() * pump.sigma()).sqrt();
    let mut feature = broad / 8.0;
    if let Ok(regime) = SfgRegime::from_specs(photon, pump) {
        feature = feature.min(regime.sigma3() / 6.0);
        let spread = (regime.delta.abs()
            + regime.tau.abs() * (photon.bins().max(pump.bins()) - 1) as f64)
            / (2.0 * regime.chirp);
        half += spread;
    }
    let tau = photon.bin_spacing().abs().max(pump.bin_spacing().abs());
    if tau > 0.0 {
        feature = feature.min(std::f64::consts::PI / (4.0 * tau));
    }
    FrequencyGrid::spanning(center, half, feature).expect("positive widths")
}

/// Incremental evaluator for the pump field along a uniformly spaced,
/// descending frequency sequence `w2(n) = w2_start - n h`.
///
/// Writing the closed form as `exp(q u^2) * sum_k d_k exp(i (delta + k tau) w2)`
/// with `u = w2 - w02` and `q = -1/(4 s2^2) + i A2`, every factor obeys a
/// two-term recurrence in `n`. The quadratic-envelope stream is filled
/// outward from the sample nearest `w02` so tail underflow never poisons the
/// in-support values; the linear-phase streams have unit modulus and are safe
/// from either end.
fn fill_pump_row(
    buf: &mut Vec<Complex64>,
    pump: &ChirpedPulseSpec,
    w2_start: f64,
    h: f64,
    n: usize,
) {
    buf.clear();
    buf.resize(n, Complex64::ZERO);

    let q = Complex64::new(-1.0 / (4.0 * pump.sigma() * pump.sigma()), pump.chirp());
    let u0 = w2_start - pump.center();

    // envelope-and-chirp stream exp(q u_n^2), filled outward from the peak
    let n_star = ((u0 / h).round().clamp(0.0, (n - 1) as f64)) as usize;
    let u_star = u0 - n_star as f64 * h;
    let v_star = (q * u_star * u_star).exp();
    let s2 = (q * (2.0 * h * h)).exp();
    // rightward: ratio(n) = exp(q h^2) * exp(-2 q h u_n)
    {
        let mut v = v_star;
        let mut ratio = (q * (h * h) - q * (2.0 * h * u_star)).exp();
        buf[n_star] = v;
        for slot in buf.iter_mut().take(n).skip(n_star + 1) {
            v *= ratio;
            ratio *= s2;
            *slot = v;
        }
    }
    // leftward: inverse ratios
    {
        let mut v = v_star;
        let mut ratio = (q * (h * h) + q * (2.0 * h * u_star)).exp();
        for slot in buf.iter_mut().take(n_star).rev() {
            v *= ratio;
            ratio *= s2;
            *slot = v;
        }
    }

    // linear-phase bin streams, multiplied in place
    let mut acc = vec![Complex64::ZERO; n];
    for (k, d) in pump.coefficients().iter().enumerate() {
        let rate = pump.delay() + k as f64 * pump.bin_spacing();
        let step = Complex64::from_polar(1.0, -rate * h);
        let mut p = *d * Complex64::from_polar(1.0, rate * w2_start);
        for a in acc.iter_mut() {
            *a += p;
            p *= step;
        }
    }
    for (slot, a) in buf.iter_mut().zip(acc) {
        *slot *= a;
    }
}

/// Exact convolution spectrum by trapezoid quadrature.
///
/// The photon spec is sampled on its default grid (and once more at double
/// density as a convergence check); the pump is evaluated in closed form at
/// every shifted argument, so no interpolation error enters. The returned
/// field is unit-normalized on `out_grid`. Summation order within each output
/// point is fixed, so results are identical across thread counts.
pub fn sfg_numeric(
    photon: &ChirpedPulseSpec,
    pump: &ChirpedPulseSpec,
    out_grid: &FrequencyGrid,
) -> Result<SfgSpectrum> {
    require_out_coverage(photon, pump, out_grid)?;
    let base = photon.default_grid();
    let coarse = convolve_on(photon, pump, &base, out_grid)?;
    let fine = convolve_on(photon, pump, &base.refined(), out_grid)?;
    let l2_change = coarse.l2_distance(&fine)?;
    let mut warnings = Vec::new();
    if l2_change > QUADRATURE_CONVERGENCE_TOL {
        warnings.push(Warning::QuadratureNotConverged { l2_change });
    }
    Ok(SfgSpectrum {
        field: fine,
        warnings,
    })
}

fn convolve_on(
    photon: &ChirpedPulseSpec,
    pump: &ChirpedPulseSpec,
    photon_grid: &FrequencyGrid,
    out_grid: &FrequencyGrid,
) -> Result<SpectralField> {
    let photon_field = sample_field(photon, photon_grid)?;
    let e1 = photon_field.amplitude();
    let h = photon_grid.step();
    let n = photon_grid.count();
    let w1_start = photon_grid.start();
    let out_count = out_grid.count();
    let out_start = out_grid.start();
    let out_step = out_grid.step();

    let pump = pump.clone();
    let e1: Vec<Complex64> = e1.to_vec();
    let amplitude = par_map_with(
        out_count,
        Vec::new,
        move |buf: &mut Vec<Complex64>, k| {
            let w3 = out_start + out_step * k as f64;
            fill_pump_row(buf, &pump, w3 - w1_start, h, n);
            let mut acc = Complex64::ZERO;
            for i in 0..n {
                acc += e1[i] * buf[i];
            }
            // trapezoid end-point correction
            acc -= 0.5 * (e1[0] * buf[0] + e1[n - 1] * buf[n - 1]);
            acc * h
        },
    );

    let mut field = SpectralField::new(out_grid.clone(), amplitude)?;
    field.normalize()?;
    Ok(field)
}

/// Large-chirp closed-form spectrum: one displaced Gaussian per
/// (photon bin, pump bin) pair, including the residual-chirp phase prefactor
/// and the per-pair linear phases, sampled on `out_grid` and unit-normalized.
pub fn sfg_analytic(
    photon: &ChirpedPulseSpec,
    pump: &ChirpedPulseSpec,
    out_grid: &FrequencyGrid,
) -> Result<SfgSpectrum> {
    let regime = SfgRegime::from_specs(photon, pump)?;
    if photon.bins() != 2 || pump.bins() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: photon.bins().max(pump.bins()),
        });
    }
    require_out_coverage(photon, pump, out_grid)?;
    let field = analytic_field(photon, pump, &regime, out_grid)?;
    Ok(SfgSpectrum {
        field,
        warnings: regime.warnings.clone(),
    })
}

fn analytic_field(
    photon: &ChirpedPulseSpec,
    pump: &ChirpedPulseSpec,
    regime: &SfgRegime,
    out_grid: &FrequencyGrid,
) -> Result<SpectralField> {
    let a = regime.chirp;
    let s1sq = photon.sigma() * photon.sigma();
    let s2sq = pump.sigma() * pump.sigma();
    let s_sq = s1sq + s2sq;
    let gauss = 4.0 * a * a * s1sq * s2sq / s_sq;
    let tau = regime.tau;
    let delta = regime.delta;
    let sum_center = regime.sum_center;
    let photon_delay = photon.delay();

    let amplitude = out_grid
        .omegas()
        .map(|w3| {
            let d = w3 - sum_center;
            let prefactor =
                Complex64::from_polar(1.0, a * d * d * (s1sq - s2sq) / s_sq + photon_delay * w3);
            let mut acc = Complex64::ZERO;
            for (j, cj) in photon.coefficients().iter().enumerate() {
                let jf = j as f64;
                for (k, dk) in pump.coefficients().iter().enumerate() {
                    let kf = k as f64;
                    let djk = delta + (kf - jf) * tau;
                    let arg = d - djk / (2.0 * a);
                    let log_env = -gauss * arg * arg - djk * djk / (16.0 * a * a * s_sq);
                    let phase = jf * tau * (photon.center() + d * s1sq / s_sq)
                        + (delta + kf * tau) * (pump.center() + d * s2sq / s_sq);
                    acc += cj * dk * Complex64::from_polar(log_env.exp(), phase);
                }
            }
            prefactor * acc
        })
        .collect();

    let mut field = SpectralField::new(out_grid.clone(), amplitude)?;
    field.normalize()?;
    Ok(field)
}

/// Red/middle/blue peak geometry and relative weights for qubit-sized inputs.
///
/// Widths come from `sigma3`, centers from `w01 + w02 + delta_i/(2A)` with
/// `delta_M = delta`, `delta_B = delta + tau`, `delta_R = delta - tau`;
/// wavelength figures use the exact `2 pi c / omega` conversion rather than a
/// series expansion. Integrated intensities are normalized to sum to 1.
pub fn peak_descriptors(
    photon: &ChirpedPulseSpec,
    pump: &ChirpedPulseSpec,
) -> Result<Vec<PeakDescriptor>> {
    let regime = SfgRegime::from_specs(photon, pump)?;
    if photon.bins() != 2 || pump.bins() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: photon.bins().max(pump.bins()),
        });
    }
    let sigma3 = regime.sigma3();
    let a = regime.chirp;
    let s_sq = photon.sigma() * photon.sigma() + pump.sigma() * pump.sigma();
    let c = photon.coefficients();
    let d = pump.coefficients();
    let tau = regime.tau;
    let delta = regime.delta;

    let weight = |djk: f64| (-djk * djk / (8.0 * a * a * s_sq)).exp();
    // middle: bins (0,0) and (1,1) share a center and interfere with
    // visibility exp(-sigma3^2 tau^2 / 2) and relative phase omega_M tau
    let vis = (-sigma3 * sigma3 * tau * tau / 2.0).exp();
    let cross = (c[1] * d[1] * (c[0] * d[0]).conj()
        * Complex64::from_polar(1.0, regime.phase_reference()))
    .re;
    let middle_weight = weight(delta)
        * ((c[0] * d[0]).norm_sqr() + (c[1] * d[1]).norm_sqr() + 2.0 * vis * cross);
    let blue_weight = (c[0] * d[1]).norm_sqr() * weight(delta + tau);
    let red_weight = (c[1] * d[0]).norm_sqr() * weight(delta - tau);
    let total = middle_weight + blue_weight + red_weight;

    let descriptor = |label: PeakLabel, delta_i: f64, w: f64| -> Result<PeakDescriptor> {
        let center = regime.sum_center + delta_i / (2.0 * a);
        let lambda = angular_to_wavelength(center)?;
        Ok(PeakDescriptor {
            label,
            central_angular_frequency: center,
            central_wavelength: lambda,
            rms_width: sigma3,
            fwhm_wavelength: sigma_to_fwhm_wavelength(lambda, sigma3),
            integrated_intensity: w / total,
        })
    };

    Ok(vec![
        descriptor(PeakLabel::Red, delta - tau, red_weight)?,
        descriptor(PeakLabel::Middle, delta, middle_weight)?,
        descriptor(PeakLabel::Blue, delta + tau, blue_weight)?,
    ])
}

/// Ideal middle-peak fringe visibility, `exp(-sigma3^2 tau^2 / 2)`.
pub fn visibility_theoretical(
    photon: &ChirpedPulseSpec,
    pump: &ChirpedPulseSpec,
) -> Result<f64> {
    let regime = SfgRegime::from_specs(photon, pump)?;
    let s3t = regime.sigma3() * regime.tau;
    Ok((-s3t * s3t / 2.0).exp())
}

/// Bin-spacing bounds for resolvable-but-interfering peaks.
pub fn separability_bounds(
    photon: &ChirpedPulseSpec,
    pump: &ChirpedPulseSpec,
) -> SeparabilityReport {
    let s1 = photon.sigma();
    let s2 = pump.sigma();
    let a = photon.chirp().abs();
    let tau = photon.bin_spacing();
    let lower = (1.0 / (s1 * s1) + 1.0 / (s2 * s2)).sqrt();
    let upper = 4.0 * a * (s1 * s1 * s2 * s2 / (s1 * s1 + s2 * s2)).sqrt();
    SeparabilityReport {
        lower_bound: lower,
        upper_bound: upper,
        tau,
        separable: tau > lower,
        interferes: tau < upper,
    }
}

/// A located spectral peak: refined center and height.
#[derive(Debug, Clone, Copy)]
pub struct DetectedPeak {
    pub omega: f64,
    pub wavelength: f64,
    pub height: f64,
}

/// Finds local intensity maxima above `threshold` (relative to the tallest
/// sample) and refines each center with a log-domain parabola, which is exact
/// for Gaussian peaks. Returned in ascending frequency.
pub fn detect_peaks(field: &SpectralField, threshold: f64) -> Vec<DetectedPeak> {
    let intensity = field.intensity();
    let max = intensity.iter().cloned().fold(0.0, f64::max);
    let grid = field.grid();
    let mut peaks = Vec::new();
    for i in 1..intensity.len() - 1 {
        if intensity[i] > intensity[i - 1]
            && intensity[i] >= intensity[i + 1]
            && intensity[i] > threshold * max
        {
            let (a, b, c) = (intensity[i - 1], intensity[i], intensity[i + 1]);
            let offset = if a > 0.0 && c > 0.0 {
                let num = a.ln() - c.ln();
                let den = 2.0 * (a.ln() - 2.0 * b.ln() + c.ln());
                if den.abs() > 0.0 { num / den } else { 0.0 }
            } else {
                0.0
            };
            let omega = grid.omega(i) + offset.clamp(-0.5, 0.5) * grid.step();
            peaks.push(DetectedPeak {
                omega,
                wavelength: angular_to_wavelength(omega).unwrap_or(f64::NAN),
                height: b,
            });
        }
    }
    peaks
}

/// Convolves a sampled intensity spectrum with a Gaussian instrument response
/// of RMS width `sigma_inst` (rad/s). Incoherent: the *intensity* is smeared,
/// not the amplitude. The discrete kernel is renormalized so the trapezoid
/// integral is preserved.
pub fn instrument_convolve(
    intensity: &[f64],
    grid: &FrequencyGrid,
    sigma_inst: f64,
) -> Result<Vec<f64>> {
    if intensity.len() != grid.count() {
        return Err(Error::DimensionMismatch {
            expected: grid.count(),
            got: intensity.len(),
        });
    }
    if !(sigma_inst > 0.0) {
        return Err(Error::NonPositive {
            quantity: "instrument width",
            value: sigma_inst,
        });
    }
    let h = grid.step();
    let reach = (5.0 * sigma_inst / h).ceil() as isize;
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|m| {
            let x = m as f64 * h;
            (-x * x / (2.0 * sigma_inst * sigma_inst)).exp()
        })
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let n = intensity.len() as isize;
    let out = par_map_with(intensity.len(), || (), |_, i| {
        let mut acc = 0.0;
        for (mi, kv) in kernel.iter().enumerate() {
            let j = i as isize + mi as isize - reach;
            if j >= 0 && j < n {
                acc += kv * intensity[j as usize];
            }
        }
        acc / ksum
    });
    Ok(out)
}

/// Smallest distance between any two entries of `centers`; helper for
/// resolution checks in reports.
pub fn min_center_spacing(centers: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = centers.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// Relative fraction of `int |E|^2` lying within `omega` bounds, with
/// piecewise-linear treatment of the boundary cells so a window covering the
/// whole grid integrates to exactly the full norm.
pub fn band_power(field: &SpectralField, omega_lo: f64, omega_hi: f64) -> Result<f64> {
    let grid = field.grid();
    if omega_lo < grid.start() || omega_hi > grid.end() || omega_lo >= omega_hi {
        return Err(Error::WindowOutsideGrid {
            win_min: omega_lo,
            win_max: omega_hi,
            grid_min: grid.start(),
            grid_max: grid.end(),
        });
    }
    let h = grid.step();
    let intensity = field.intensity();
    let value_at = |x: f64| -> f64 {
        let t = (x - grid.start()) / h;
        let i = (t.floor() as usize).min(intensity.len() - 2);
        let frac = t - i as f64;
        intensity[i] * (1.0 - frac) + intensity[i + 1] * frac
    };
    // integrate the piecewise-linear interpolant of |E|^2 over the window
    let i_lo = ((omega_lo - grid.start()) / h).ceil() as usize;
    let i_hi = ((omega_hi - grid.start()) / h).floor() as usize;
    let mut acc = 0.0;
    if i_lo <= i_hi {
        // full interior cells
        acc += trapezoid(h, (i_lo..=i_hi).map(|i| intensity[i]));
        // partial edge cells
        let left_edge = grid.omega(i_lo);
        if omega_lo < left_edge {
            acc += 0.5 * (value_at(omega_lo) + intensity[i_lo]) * (left_edge - omega_lo);
        }
        let right_edge = grid.omega(i_hi);
        if omega_hi > right_edge {
            acc += 0.5 * (intensity[i_hi] + value_at(omega_hi)) * (omega_hi - right_edge);
        }
    } else {
        // window inside a single cell
        acc = 0.5 * (value_at(omega_lo) + value_at(omega_hi)) * (omega_hi - omega_lo);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{fwhm_wavelength_to_sigma, wavelength_to_angular};
    use approx::assert_relative_eq;

    pub(crate) fn experiment_pair() -> (ChirpedPulseSpec, ChirpedPulseSpec) {
        let tau = 2.16e-12;
        let chirp = 670e3 * 1e-30;
        let photon = ChirpedPulseSpec::new(
            wavelength_to_angular(810.4e-9).unwrap(),
            fwhm_wavelength_to_sigma(810.4e-9, 4.53e-9).unwrap(),
            chirp,
            0.0,
            tau,
            vec![Complex64::ONE, Complex64::ONE],
        )
        .unwrap();
        let pump = ChirpedPulseSpec::new(
            wavelength_to_angular(785.7e-9).unwrap(),
            fwhm_wavelength_to_sigma(785.7e-9, 11.9e-9).unwrap(),
            -chirp,
            0.0,
            tau,
            vec![Complex64::ONE, Complex64::ONE],
        )
        .unwrap();
        (photon, pump)
    }

    #[test]
    fn regime_validation() {
        let (photon, pump) = experiment_pair();
        let regime = SfgRegime::from_specs(&photon, &pump).unwrap();
        assert!(regime.warnings().is_empty());
        assert_relative_eq!(regime.sigma3(), 7.1826463285e10, max_relative = 1e-9);

        // mismatched chirps rejected
        let bad = pump.clone().with_chirp(-0.5 * photon.chirp());
        assert!(matches!(
            SfgRegime::from_specs(&photon, &bad),
            Err(Error::ChirpMismatch { .. })
        ));

        // weak chirp: A^2 s^4 <= 10 is a hard error
        let weak = 1.0 / (photon.sigma().min(pump.sigma()).powi(2)) * 2.0;
        let p2 = photon.clone().with_chirp(weak);
        let l2 = pump.clone().with_chirp(-weak);
        assert!(matches!(
            SfgRegime::from_specs(&p2, &l2),
            Err(Error::WeakChirp { .. })
        ));

        // 10 < A^2 s^4 <= 100 warns
        let soft = 6.0 / photon.sigma().min(pump.sigma()).powi(2);
        let p3 = photon.clone().with_chirp(soft);
        let l3 = pump.clone().with_chirp(-soft);
        let r = SfgRegime::from_specs(&p3, &l3).unwrap();
        assert!(matches!(r.warnings()[0], Warning::WeakChirpRegime { .. }));
    }

    #[test]
    fn pump_row_matches_direct_evaluation() {
        let (_, pump) = experiment_pair();
        let pump = pump.with_delay(0.4e-12);
        let h = 3.7e9;
        let start = pump.center() + 4.9 * pump.sigma();
        let mut buf = Vec::new();
        fill_pump_row(&mut buf, &pump, start, h, 4096);
        for (i, v) in buf.iter().enumerate() {
            let w2 = start - i as f64 * h;
            let direct = pump.amplitude_at(w2);
            assert!(
                (v - direct).norm() <= 1e-10 * (1.0 + direct.norm()),
                "row {i}: {v} vs {direct}"
            );
        }
    }

    #[test]
    fn transform_limited_convolution_is_gaussian_with_combined_width() {
        // analytic Gaussian convolution: intensity RMS = sqrt(s1^2 + s2^2)
        let s1 = 5.5174980021e12;
        let s2 = 1.5419713423e13;
        let photon = ChirpedPulseSpec::gaussian(2.3243479360e15, s1).unwrap();
        let pump = ChirpedPulseSpec::gaussian(2.3974183115e15, s2).unwrap();
        let expected = (s1 * s1 + s2 * s2).sqrt();
        let grid = FrequencyGrid::spanning(
            photon.center() + pump.center(),
            6.0 * (s1 + s2),
            expected / 16.0,
        )
        .unwrap();
        let out = sfg_numeric(&photon, &pump, &grid).unwrap();
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
        assert_relative_eq!(
            out.field.intensity_rms_width(),
            expected,
            max_relative = 1e-3
        );
        assert_relative_eq!(
            out.field.intensity_centroid(),
            photon.center() + pump.center(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn single_bin_inputs_make_single_displaced_peak() {
        let (photon, pump) = experiment_pair();
        let photon = photon
            .with_coefficients(vec![Complex64::ONE], 0.0)
            .unwrap();
        let pump = pump
            .with_coefficients(vec![Complex64::ONE], 0.0)
            .unwrap()
            .with_delay(1.0e-12);
        let regime = SfgRegime::from_specs(&photon, &pump).unwrap();
        let grid = default_output_grid(&photon, &pump);
        let out = sfg_numeric(&photon, &pump, &grid).unwrap();
        let peaks = detect_peaks(&out.field, 0.02);
        assert_eq!(peaks.len(), 1);
        // centroid sits at w01 + w02 + delta/(2A), well within a grid step
        let expected = regime.middle_center();
        assert!((out.field.intensity_centroid() - expected).abs() < grid.step());
        assert!((peaks[0].omega - expected).abs() < grid.step());
    }

    #[test]
    fn pump_single_bin_photon_single_bin_any_chirp_single_peak() {
        let (photon, pump) = experiment_pair();
        // c = (1, 0) on both: delayed components carry no weight
        let photon = photon
            .with_coefficients(vec![Complex64::ONE, Complex64::ZERO], 2.16e-12)
            .unwrap();
        let pump = pump
            .with_coefficients(vec![Complex64::ONE, Complex64::ZERO], 2.16e-12)
            .unwrap();
        let grid = default_output_grid(&photon, &pump);
        let out = sfg_numeric(&photon, &pump, &grid).unwrap();
        let peaks = detect_peaks(&out.field, 0.02);
        assert_eq!(peaks.len(), 1);
    }

    #[test]
    fn three_peak_spectrum_with_expected_side_displacement() {
        let (photon, pump) = experiment_pair();
        let grid = default_output_grid(&photon, &pump);
        let out = sfg_numeric(&photon, &pump, &grid).unwrap();
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
        let peaks = detect_peaks(&out.field, 0.02);
        assert_eq!(peaks.len(), 3);
        let lambdas: Vec<f64> = peaks.iter().map(|p| p.wavelength).collect();
        let mid = lambdas[1];
        for side in [lambdas[0], lambdas[2]] {
            let displacement = (side - mid).abs();
            assert!(
                (0.134e-9..=0.140e-9).contains(&displacement),
                "displacement {displacement:.3e}"
            );
        }
    }

    #[test]
    fn analytic_matches_numeric_for_experiment_parameters() {
        let (photon, pump) = experiment_pair();
        let grid = default_output_grid(&photon, &pump);
        let numeric = sfg_numeric(&photon, &pump, &grid).unwrap();
        let analytic = sfg_analytic(&photon, &pump, &grid).unwrap();
        let dist = numeric.field.l2_distance(&analytic.field).unwrap();
        assert!(dist < 1e-2, "L2 distance {dist:.3e}");
    }

    #[test]
    fn analytic_with_single_surviving_term_is_one_blue_peak() {
        // theta = 0, alpha = pi/2: only the early-photon/late-pump term remains
        let (photon, pump) = experiment_pair();
        let photon = crate::pulse::qubit_spec(0.0, 0.0, &photon);
        let pump = crate::pulse::qubit_spec(std::f64::consts::FRAC_PI_2, 0.0, &pump);
        let grid = default_output_grid(&photon, &pump);
        let out = sfg_analytic(&photon, &pump, &grid).unwrap();
        let peaks = detect_peaks(&out.field, 0.02);
        assert_eq!(peaks.len(), 1);
        let regime = SfgRegime::from_specs(&photon, &pump).unwrap();
        let expected = bin_pair_center(&regime, 0, 1);
        assert!((peaks[0].omega - expected).abs() < grid.step());
    }

    #[test]
    fn middle_intensity_maximal_when_absorbed_phase_cancels() {
        // scanning the pump phase, the middle peak is tallest where
        // phi + beta + omega_M tau = 0 (mod 2 pi)
        let (photon, pump) = experiment_pair();
        let photon = crate::pulse::qubit_spec(std::f64::consts::FRAC_PI_4, 0.0, &photon);
        let regime = SfgRegime::from_specs(&photon, &pump).unwrap();
        let best_beta = -regime.phase_reference().rem_euclid(std::f64::consts::TAU);
        let grid = default_output_grid(&photon, &pump);
        let lambda_m = angular_to_wavelength(regime.middle_center()).unwrap();
        let win = crate::units::wavelength_width_to_angular(lambda_m, 0.11e-9) / 2.0;
        let mut best_measured = f64::NEG_INFINITY;
        let mut best_at = f64::NAN;
        for i in 0..16 {
            let beta = i as f64 / 16.0 * std::f64::consts::TAU;
            let pump_b = crate::pulse::qubit_spec(std::f64::consts::FRAC_PI_4, beta, &pump);
            let out = sfg_analytic(&photon, &pump_b, &grid).unwrap();
            let frac = band_power(
                &out.field,
                regime.middle_center() - win,
                regime.middle_center() + win,
            )
            .unwrap();
            if frac > best_measured {
                best_measured = frac;
                best_at = beta;
            }
        }
        let wrap = |x: f64| {
            let y = x.rem_euclid(std::f64::consts::TAU);
            y.min(std::f64::consts::TAU - y)
        };
        // 16-point scan: nearest sample is within one step of the optimum
        assert!(
            wrap(best_at - best_beta) <= std::f64::consts::TAU / 16.0 + 1e-9,
            "best at {best_at}, expected near {best_beta}"
        );
    }

    #[test]
    fn peak_descriptor_geometry() {
        let (photon, pump) = experiment_pair();
        let peaks = peak_descriptors(&photon, &pump).unwrap();
        assert_eq!(peaks.len(), 3);
        let mid = &peaks[1];
        assert_eq!(mid.label, PeakLabel::Middle);
        assert_relative_eq!(mid.central_wavelength, 398.929441e-9, max_relative = 1e-6);
        // side displacement from the closed form: lambda_M^2 tau / (4 pi c A)
        let blue = &peaks[2];
        let displacement = (blue.central_wavelength - mid.central_wavelength).abs();
        assert_relative_eq!(displacement, 0.136189e-9, max_relative = 1e-3);
        // intrinsic middle FWHM in wavelength
        assert_relative_eq!(mid.fwhm_wavelength, 0.014290e-9, max_relative = 1e-3);
        assert_relative_eq!(
            mid.convolved_fwhm_wavelength(0.03e-9),
            0.033230e-9,
            max_relative = 1e-3
        );
        // lambda = 2 pi c / omega consistency on every peak
        for p in &peaks {
            assert_relative_eq!(
                p.central_wavelength,
                angular_to_wavelength(p.central_angular_frequency).unwrap(),
                max_relative = 1e-12
            );
            assert!(p.rms_width > 0.0);
        }
        let total: f64 = peaks.iter().map(|p| p.integrated_intensity).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_bin_spacing_collapses_centers() {
        let (photon, pump) = experiment_pair();
        let photon = photon
            .with_coefficients(vec![Complex64::ONE, Complex64::ONE], 0.0)
            .unwrap();
        let pump = pump
            .with_coefficients(vec![Complex64::ONE, Complex64::ONE], 0.0)
            .unwrap();
        let peaks = peak_descriptors(&photon, &pump).unwrap();
        assert_eq!(peaks[0].central_angular_frequency, peaks[1].central_angular_frequency);
        assert_eq!(peaks[1].central_angular_frequency, peaks[2].central_angular_frequency);
    }

    #[test]
    fn sigma3_never_exceeds_bound() {
        // algebraic identity: sigma3 <= 1/(2 sqrt(2) A sigma_min)
        let (photon, pump) = experiment_pair();
        for scale in [0.5, 1.0, 2.0, 3.7] {
            let p = photon.clone().with_chirp(photon.chirp() * scale);
            let l = pump.clone().with_chirp(-photon.chirp() * scale);
            let regime = SfgRegime::from_specs(&p, &l).unwrap();
            let bound = 1.0
                / (2.0 * 2.0f64.sqrt() * p.chirp() * photon.sigma().min(pump.sigma()));
            assert!(regime.sigma3() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn visibility_values() {
        let (photon, pump) = experiment_pair();
        let v = visibility_theoretical(&photon, &pump).unwrap();
        assert_relative_eq!(v, 0.9880371206, max_relative = 1e-9);

        // tau = 0: V = 1
        let p0 = photon
            .clone()
            .with_coefficients(vec![Complex64::ONE, Complex64::ONE], 0.0)
            .unwrap();
        let l0 = pump
            .clone()
            .with_coefficients(vec![Complex64::ONE, Complex64::ONE], 0.0)
            .unwrap();
        assert_eq!(visibility_theoretical(&p0, &l0).unwrap(), 1.0);

        // tau at the separability upper bound: V = exp(-1/2) identically
        let bounds = separability_bounds(&photon, &pump);
        let pu = photon
            .clone()
            .with_coefficients(vec![Complex64::ONE, Complex64::ONE], bounds.upper_bound)
            .unwrap();
        let lu = pump
            .clone()
            .with_coefficients(vec![Complex64::ONE, Complex64::ONE], bounds.upper_bound)
            .unwrap();
        assert_relative_eq!(
            visibility_theoretical(&pu, &lu).unwrap(),
            (-0.5f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn visibility_strictly_decreases_with_tau() {
        let (photon, pump) = experiment_pair();
        let mut last = 1.0;
        for i in 1..20 {
            let tau = i as f64 * 0.5e-12;
            let p = photon
                .clone()
                .with_coefficients(vec![Complex64::ONE, Complex64::ONE], tau)
                .unwrap();
            let l = pump
                .clone()
                .with_coefficients(vec![Complex64::ONE, Complex64::ONE], tau)
                .unwrap();
            let v = visibility_theoretical(&p, &l).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn separability_report_for_experiment() {
        let (photon, pump) = experiment_pair();
        let report = separability_bounds(&photon, &pump);
        assert_relative_eq!(report.lower_bound, 0.192495e-12, max_relative = 1e-4);
        assert_relative_eq!(report.upper_bound, 13.922445e-12, max_relative = 1e-4);
        assert!(report.separable && report.interferes);

        // unchirped limit: upper bound collapses, no valid tau
        let p0 = photon.clone().with_chirp(0.0);
        let r0 = separability_bounds(&p0, &pump);
        assert_eq!(r0.upper_bound, 0.0);
        assert!(!r0.interferes);

        // far beyond the upper bound: separable but no interference
        let p20 = photon
            .clone()
            .with_coefficients(vec![Complex64::ONE, Complex64::ONE], 20e-12)
            .unwrap();
        let r20 = separability_bounds(&p20, &pump);
        assert!(r20.separable && !r20.interferes);
    }

    #[test]
    fn bin_pair_centers_reproduce_three_peak_geometry() {
        let (photon, pump) = experiment_pair();
        let regime = SfgRegime::from_specs(&photon, &pump).unwrap();
        let peaks = peak_descriptors(&photon, &pump).unwrap();
        assert_relative_eq!(
            bin_pair_center(&regime, 0, 1),
            peaks[2].central_angular_frequency,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            bin_pair_center(&regime, 1, 0),
            peaks[0].central_angular_frequency,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            bin_pair_center(&regime, 0, 0),
            bin_pair_center(&regime, 1, 1),
            max_relative = 1e-14
        );
    }

    #[test]
    fn band_power_full_window_is_total_norm() {
        let (photon, pump) = experiment_pair();
        let grid = default_output_grid(&photon, &pump);
        let out = sfg_numeric(&photon, &pump, &grid).unwrap();
        let full = band_power(&out.field, grid.start(), grid.end()).unwrap();
        assert_relative_eq!(full, 1.0, max_relative = 1e-9);
        assert!(band_power(&out.field, grid.start() - 1.0, grid.end()).is_err());
    }

    #[test]
    fn instrument_convolution_widens_middle_peak_as_expected() {
        let (photon, pump) = experiment_pair();
        let grid = default_output_grid(&photon, &pump);
        let out = sfg_numeric(&photon, &pump, &grid).unwrap();
        let regime = SfgRegime::from_specs(&photon, &pump).unwrap();
        let lambda_m = angular_to_wavelength(regime.middle_center()).unwrap();
        let sigma_inst = crate::units::wavelength_width_to_angular(lambda_m, 0.03e-9)
            / crate::units::FWHM_PER_SIGMA;
        let smeared = instrument_convolve(&out.field.intensity(), &grid, sigma_inst).unwrap();
        // integral preserved
        let before = trapezoid(grid.step(), out.field.intensity().into_iter());
        let after = trapezoid(grid.step(), smeared.iter().cloned());
        assert_relative_eq!(before, after, max_relative = 1e-6);
    }
}
