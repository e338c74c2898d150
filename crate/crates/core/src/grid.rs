//! Uniform angular-frequency grids and complex spectral fields sampled on
//! them. All integrals are trapezoid-rule; fields are kept unit-normalized in
//! L2 so intensities read as spectral probability densities.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform grid of `count` angular frequencies starting at `start` with
/// spacing `step` (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    start: f64,
    step: f64,
    count: usize,
}

impl FrequencyGrid {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self> {
        if !(step > 0.0) || count < 2 {
            return Err(Error::InvalidGrid { step, count });
        }
        Ok(Self { start, step, count })
    }

    /// Grid centered on `center` reaching at least `half_span` on both sides.
    pub fn spanning(center: f64, half_span: f64, step: f64) -> Result<Self> {
        if !(half_span > 0.0) {
            return Err(Error::NonPositive {
                quantity: "grid half-span",
                value: half_span,
            });
        }
        if !(step > 0.0) {
            return Err(Error::InvalidGrid { step, count: 0 });
        }
        let half_count = (half_span / step).ceil() as usize;
        let count = 2 * half_count + 1;
        Ok(Self {
            start: center - step * half_count as f64,
            step,
            count,
        })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.count - 1) as f64
    }

    pub fn omega(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn omegas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.omega(i))
    }

    /// Index of the grid point nearest to `omega`.
    pub fn nearest_index(&self, omega: f64) -> usize {
        let i = ((omega - self.start) / self.step).round();
        (i.max(0.0) as usize).min(self.count - 1)
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.start && omega <= self.end()
    }

    /// Errors unless the grid spans `[center - half_span, center + half_span]`.
    pub fn require_coverage(&self, center: f64, half_span: f64) -> Result<()> {
        let (lo, hi) = (center - half_span, center + half_span);
        if self.start > lo || self.end() < hi {
            return Err(Error::GridTooNarrow {
                grid_min: self.start,
                grid_max: self.end(),
                required_min: lo,
                required_max: hi,
            });
        }
        Ok(())
    }

    /// Same span, half the step.
    pub fn refined(&self) -> Self {
        Self {
            start: self.start,
            step: self.step / 2.0,
            count: 2 * self.count - 1,
        }
    }
}

/// Complex spectral amplitude sampled on a [`FrequencyGrid`].
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: FrequencyGrid,
    amplitude: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: FrequencyGrid, amplitude: Vec<Complex64>) -> Result<Self> {
        if amplitude.len() != grid.count() {
            return Err(Error::DimensionMismatch {
                expected: grid.count(),
                got: amplitude.len(),
            });
        }
        Ok(Self { grid, amplitude })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn amplitude(&self) -> &[Complex64] {
        &self.amplitude
    }

    /// |E(omega_i)|^2.
    pub fn intensity(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Trapezoid-rule squared L2 norm, `int |E|^2 domega`.
    pub fn norm_sqr(&self) -> f64 {
        trapezoid(self.grid.step(), self.amplitude.iter().map(|a| a.norm_sqr()))
    }

    /// Scale so `norm_sqr() == 1`.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroCoefficients);
        }
        let inv = 1.0 / n;
        for a in &mut self.amplitude {
            *a *= inv;
        }
        Ok(())
    }

    /// Trapezoid L2 distance between two unit-normalized fields on a shared
    /// grid: sqrt(int |a-b|^2 domega).
    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let d = trapezoid(
            self.grid.step(),
            self.amplitude
                .iter()
                .zip(&other.amplitude)
                .map(|(a, b)| (a - b).norm_sqr()),
        );
        Ok(d.max(0.0).sqrt())
    }

    /// Centroid of the intensity: int omega |E|^2 / int |E|^2.
    pub fn intensity_centroid(&self) -> f64 {
        let num = trapezoid(
            self.grid.step(),
            self.amplitude
                .iter()
                .enumerate()
                .map(|(i, a)| self.grid.omega(i) * a.norm_sqr()),
        );
        num / self.norm_sqr()
    }

    /// RMS width of the intensity about its centroid.
    pub fn intensity_rms_width(&self) -> f64 {
        let c = self.intensity_centroid();
        let var = trapezoid(
            self.grid.step(),
            self.amplitude.iter().enumerate().map(|(i, a)| {
                let d = self.grid.omega(i) - c;
                d * d * a.norm_sqr()
            }),
        ) / self.norm_sqr();
        var.max(0.0).sqrt()
    }
}

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid(step: f64, values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut first = None;
    let mut last = 0.0;
    for v in values {
        if first.is_none() {
            first = Some(v);
        }
        sum += v;
        last = v;
    }
    let first = first.unwrap_or(0.0);
    step * (sum - 0.5 * first - 0.5 * last)
}

/// Intensity FWHM about the tallest sample, located by linear interpolation of
/// the half-maximum crossings.
pub fn intensity_fwhm(field: &SpectralField) -> Option<f64> {
    let intensity = field.intensity();
    let (imax, &peak) = intensity
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if peak <= 0.0 {
        return None;
    }
    let half = peak / 2.0;
    let step = field.grid().step();
    // walk right
    let mut right = None;
    for i in imax..intensity.len() - 1 {
        if intensity[i] >= half && intensity[i + 1] < half {
            let t = (intensity[i] - half) / (intensity[i] - intensity[i + 1]);
            right = Some(field.grid().omega(i) + t * step);
            break;
        }
    }
    // walk left
    let mut left = None;
    for i in (1..=imax).rev() {
        if intensity[i] >= half && intensity[i - 1] < half {
            let t = (intensity[i] - half) / (intensity[i] - intensity[i - 1]);
            left = Some(field.grid().omega(i) - t * step);
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        _ => None,
    }
}
