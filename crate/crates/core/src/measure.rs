//! Pulse-shaped projective measurements on time-bin states.
//!
//! A shaped strong pulse with bin amplitudes `d_j` measures the projector onto
//! `|L> = sum_j d_j^* e^{-i j w03 tau} |t_j>`: the constant phase `w03 tau`
//! accumulated at the upconverted frequency is absorbed into the projector
//! once, so user-facing phases are always post-absorption. The middle SFG
//! peak's integrated intensity equals the Born probability degraded by the
//! finite-visibility factor `exp(-(j-k)^2 sigma3^2 tau^2 / 2)` between bins.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SpectralField;
use crate::pulse::{ChirpedPulseSpec, QuditState};
use crate::sfg::{band_power, SfgRegime};
use crate::units::{wavelength_to_angular, wavelength_width_to_angular};

/// Projective measurement onto a time-bin state, with the absorbed constant
/// phase recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSpec {
    coefficients: Vec<Complex64>,
    bin_spacing: f64,
    /// The absorbed phase `w03 * tau` (radians); zero for projectors built
    /// directly from measurement-state phases.
    phase_reference: f64,
}

impl ProjectorSpec {
    pub fn new(coefficients: Vec<Complex64>, bin_spacing: f64, phase_reference: f64) -> Result<Self> {
        let norm: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroCoefficients);
        }
        let scale = norm.sqrt().recip();
        Ok(Self {
            coefficients: coefficients.into_iter().map(|c| c * scale).collect(),
            bin_spacing,
            phase_reference,
        })
    }

    /// Measurement state `(|e> + e^{i beta} |l>)/sqrt(2)` used for fringe
    /// scans and CHSH settings. Relative to a pump-built projector this is
    /// the `beta = -beta'` convention (the conjugation in `from_pump` flips
    /// the sign of the pump's post-absorption phase).
    pub fn time_bin_phase(beta: f64, bin_spacing: f64) -> Self {
        Self::new(
            vec![
                Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, beta),
            ],
            bin_spacing,
            0.0,
        )
        .expect("unit coefficients")
    }

    /// Computational-basis projectors `|e><e|` and `|l><l|`.
    pub fn early(bin_spacing: f64) -> Self {
        Self::new(vec![Complex64::ONE, Complex64::ZERO], bin_spacing, 0.0).unwrap()
    }

    pub fn late(bin_spacing: f64) -> Self {
        Self::new(vec![Complex64::ZERO, Complex64::ONE], bin_spacing, 0.0).unwrap()
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

    pub fn phase_reference(&self) -> f64 {
        self.phase_reference
    }

    /// The projector as a state, for symmetry checks and Born-rule reuse.
    pub fn as_state(&self) -> Result<QuditState> {
        QuditState::new(self.coefficients.clone(), self.bin_spacing)
    }
}

/// Builds the projector measured by a shaped pump at upconverted center
/// frequency `omega03`: coefficients `d_j^* e^{-i j omega03 tau}`.
pub fn projector_from_pulse(pump: &ChirpedPulseSpec, omega03: f64) -> ProjectorSpec {
    let tau = pump.bin_spacing();
    let phase_reference = omega03 * tau;
    let coefficients = pump
        .coefficients()
        .iter()
        .enumerate()
        .map(|(j, d)| d.conj() * Complex64::from_polar(1.0, -(j as f64) * phase_reference))
        .collect();
    ProjectorSpec::new(coefficients, tau, phase_reference).expect("pump coefficients are unit-norm")
}

/// Born probability `|<L|psi>|^2 = |sum_j x_j^* c_j|^2`.
pub fn projection_probability(state: &QuditState, proj: &ProjectorSpec) -> Result<f64> {
    if state.dimension() != proj.dimension() {
        return Err(Error::DimensionMismatch {
            expected: proj.dimension(),
            got: state.dimension(),
        });
    }
    if state.bin_spacing() != proj.bin_spacing() {
        return Err(Error::SpacingMismatch {
            left: state.bin_spacing(),
            right: proj.bin_spacing(),
        });
    }
    let overlap: Complex64 = state
        .coefficients()
        .iter()
        .zip(proj.coefficients())
        .map(|(c, x)| x.conj() * c)
        .sum();
    Ok(overlap.norm_sqr())
}

/// Exact finite-visibility middle-peak probability:
///
/// ```text
/// I_M = sum_{j,k} exp(-(j-k)^2 sigma3^2 tau^2 / 2) e^{i (j-k) w03 tau}
///       c_k^* d_k^* c_j d_j
/// ```
///
/// normalized so a matched pure state in the zero-width limit gives 1; as
/// `sigma3 tau -> 0` this reduces to [`projection_probability`] against the
/// pump's projector.
pub fn middle_peak_probability(
    state: &QuditState,
    pump: &ChirpedPulseSpec,
    regime: &SfgRegime,
) -> Result<f64> {
    if state.dimension() != pump.bins() {
        return Err(Error::DimensionMismatch {
            expected: pump.bins(),
            got: state.dimension(),
        });
    }
    if state.bin_spacing() != pump.bin_spacing() {
        return Err(Error::SpacingMismatch {
            left: state.bin_spacing(),
            right: pump.bin_spacing(),
        });
    }
    let s3t = regime.sigma3() * regime.tau();
    let phase_ref = regime.phase_reference();
    let c = state.coefficients();
    let d = pump.coefficients();
    let n = c.len();
    let mut acc = Complex64::ZERO;
    for j in 0..n {
        for k in 0..n {
            let dj = j as f64 - k as f64;
            let vis = (-dj * dj * s3t * s3t / 2.0).exp();
            let phase = Complex64::from_polar(1.0, dj * phase_ref);
            acc += (c[k] * d[k]).conj() * c[j] * d[j] * phase * vis;
        }
    }
    Ok(acc.re.max(0.0))
}

/// Predicted fraction of the total upconverted intensity falling in the
/// middle peak: `I_M / (I_M + sum of side weights)`. This is the bridge
/// between [`middle_peak_probability`] (a probability, normalized to the
/// matched maximum) and a monochromator-window integral of the normalized
/// spectrum (a fraction of total energy). Qubit-sized inputs only.
pub fn middle_peak_fraction(
    state: &QuditState,
    pump: &ChirpedPulseSpec,
    photon_envelope: &ChirpedPulseSpec,
    regime: &SfgRegime,
) -> Result<f64> {
    if state.dimension() != 2 || pump.bins() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: state.dimension().max(pump.bins()),
        });
    }
    let i_m = middle_peak_probability(state, pump, regime)?;
    let a = regime.chirp();
    let s_sq = photon_envelope.sigma() * photon_envelope.sigma() + pump.sigma() * pump.sigma();
    let tau = regime.tau();
    let delta_rel = pump.delay() - photon_envelope.delay();
    let weight = |djk: f64| (-djk * djk / (8.0 * a * a * s_sq)).exp();
    let c = state.coefficients();
    let d = pump.coefficients();
    // middle weight relative to the side weights carries the same
    // delta-dependent suppression as the side terms
    let mid = i_m * weight(delta_rel);
    let blue = (c[0] * d[1]).norm_sqr() * weight(delta_rel + tau);
    let red = (c[1] * d[0]).norm_sqr() * weight(delta_rel - tau);
    Ok(mid / (mid + blue + red))
}

/// Hard-edged spectral passband, specified in wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonochromatorWindow {
    center_wavelength: f64,
    width_fwhm: f64,
}

impl MonochromatorWindow {
    pub fn new(center_wavelength: f64, width_fwhm: f64) -> Result<Self> {
        if !(center_wavelength > 0.0) {
            return Err(Error::NonPositive {
                quantity: "window center wavelength",
                value: center_wavelength,
            });
        }
        if !(width_fwhm > 0.0) {
            return Err(Error::NonPositive {
                quantity: "window width",
                value: width_fwhm,
            });
        }
        Ok(Self {
            center_wavelength,
            width_fwhm,
        })
    }

    pub fn center_wavelength(&self) -> f64 {
        self.center_wavelength
    }

    pub fn width_fwhm(&self) -> f64 {
        self.width_fwhm
    }

    /// Angular-frequency bounds `(low, high)` of the passband.
    pub fn omega_bounds(&self) -> Result<(f64, f64)> {
        let lo = wavelength_to_angular(self.center_wavelength + self.width_fwhm / 2.0)?;
        let hi = wavelength_to_angular(self.center_wavelength - self.width_fwhm / 2.0)?;
        Ok((lo, hi))
    }

    /// Half-width in rad/s at the window center (narrow-band Jacobian).
    pub fn half_width_angular(&self) -> f64 {
        wavelength_width_to_angular(self.center_wavelength, self.width_fwhm) / 2.0
    }
}

/// `int |E|^2 domega` over the hard-edged window; errors if the window is not
/// inside the grid. A window covering the full grid returns the total norm.
pub fn window_integrate(spectrum: &SpectralField, window: &MonochromatorWindow) -> Result<f64> {
    let (lo, hi) = window.omega_bounds()?;
    band_power(spectrum, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::qubit_spec;
    use crate::sfg::{default_output_grid, sfg_numeric};
    use crate::units::{angular_to_wavelength, fwhm_wavelength_to_sigma};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

    fn experiment_pair() -> (ChirpedPulseSpec, ChirpedPulseSpec) {
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
    fn pump_in_early_bin_projects_onto_early() {
        let (_, pump) = experiment_pair();
        let pump = pump
            .with_coefficients(vec![Complex64::ONE, Complex64::ZERO], 2.16e-12)
            .unwrap();
        let proj = projector_from_pulse(&pump, 4.7e15);
        assert_relative_eq!(proj.coefficients()[0].norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(proj.coefficients()[1].norm(), 0.0, epsilon = 1e-12);
        let e = QuditState::qubit(0.0, 0.0, 2.16e-12);
        assert_relative_eq!(projection_probability(&e, &proj).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn equal_superposition_pump_projects_with_shifted_phase() {
        // pump (1, e^{i beta})/sqrt2 -> projector (|e> + e^{-i(beta + w03 tau)} |l>)/sqrt2
        let (_, pump) = experiment_pair();
        let tau = 2.16e-12;
        let beta = 0.7;
        let omega03 = 4.7217662474e15;
        let pump = pump
            .with_coefficients(
                vec![Complex64::ONE, Complex64::from_polar(1.0, beta)],
                tau,
            )
            .unwrap();
        let proj = projector_from_pulse(&pump, omega03);
        let expected_phase = -(beta + omega03 * tau);
        let got = proj.coefficients()[1] / proj.coefficients()[0];
        let diff = (got.arg() - expected_phase).rem_euclid(TAU);
        assert!(diff.min(TAU - diff) < 1e-9);
        assert_relative_eq!(proj.phase_reference(), omega03 * tau, max_relative = 1e-12);
    }

    #[test]
    fn qudit_projector_has_phase_ramp() {
        let (_, pump) = experiment_pair();
        let tau = 2.16e-12;
        let omega03 = 4.7e15;
        let pump = pump
            .with_coefficients(vec![Complex64::ONE; 3], tau)
            .unwrap();
        let proj = projector_from_pulse(&pump, omega03);
        for (j, x) in proj.coefficients().iter().enumerate() {
            assert_relative_eq!(x.norm_sqr(), 1.0 / 3.0, epsilon = 1e-12);
            let expected = -(j as f64) * omega03 * tau;
            let diff = (x.arg() - expected).rem_euclid(TAU);
            assert!(diff.min(TAU - diff) < 1e-9, "bin {j}");
        }
    }

    #[test]
    fn projection_probability_examples() {
        let tau = 2.16e-12;
        // |e> onto |e>
        let e = QuditState::qubit(0.0, 0.0, tau);
        let proj_e = ProjectorSpec::early(tau);
        assert_relative_eq!(projection_probability(&e, &proj_e).unwrap(), 1.0, epsilon = 1e-12);

        // equal superpositions: (1 + cos(phi + beta'))/2 with both at pi/4
        let phi = 0.0;
        for i in 0..12 {
            let beta_prime = i as f64 / 12.0 * TAU;
            let state = QuditState::qubit(FRAC_PI_4, phi, tau);
            let proj = ProjectorSpec::new(
                vec![
                    Complex64::new(FRAC_PI_4.cos(), 0.0),
                    Complex64::from_polar(FRAC_PI_4.sin(), -beta_prime),
                ],
                tau,
                0.0,
            )
            .unwrap();
            let p = projection_probability(&state, &proj).unwrap();
            assert_relative_eq!(p, (1.0 + (phi + beta_prime).cos()) / 2.0, epsilon = 1e-12);
        }

        // uniform qutrit onto uniform qutrit
        let u3 = QuditState::new(vec![Complex64::ONE; 3], tau).unwrap();
        let p3 = ProjectorSpec::new(vec![Complex64::ONE; 3], tau, 0.0).unwrap();
        assert_relative_eq!(projection_probability(&u3, &p3).unwrap(), 1.0, epsilon = 1e-12);

        // dimension and spacing mismatches
        let q2 = QuditState::qubit(0.3, 0.1, tau);
        assert!(projection_probability(&q2, &p3).is_err());
        let p_other = ProjectorSpec::early(1e-12);
        assert!(projection_probability(&q2, &p_other).is_err());
    }

    #[test]
    fn born_rule_completeness_over_orthonormal_sets() {
        let tau = 2.16e-12;
        for (theta, phi) in [(0.3, 1.2), (FRAC_PI_4, 0.0), (1.1, 4.0)] {
            let state = QuditState::qubit(theta, phi, tau);
            // {|e>, |l>} and the conjugate pair {(|e>+-e^{i b}|l>)/sqrt2}
            let sets: Vec<Vec<ProjectorSpec>> = vec![
                vec![ProjectorSpec::early(tau), ProjectorSpec::late(tau)],
                vec![
                    ProjectorSpec::time_bin_phase(0.9, tau),
                    ProjectorSpec::time_bin_phase(0.9 + PI, tau),
                ],
            ];
            for set in sets {
                let total: f64 = set
                    .iter()
                    .map(|p| projection_probability(&state, p).unwrap())
                    .sum();
                assert_relative_eq!(total, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn middle_peak_fringe_visibility_matches_regime() {
        let (photon, pump) = experiment_pair();
        let regime = SfgRegime::from_specs(&photon, &pump).unwrap();
        let v_theo = crate::sfg::visibility_theoretical(&photon, &pump).unwrap();
        let state = QuditState::qubit(FRAC_PI_4, 0.0, 2.16e-12);
        let mut max = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        for i in 0..720 {
            let beta = i as f64 / 720.0 * TAU;
            let pump_b = qubit_spec(FRAC_PI_4, beta, &pump);
            let p = middle_peak_probability(&state, &pump_b, &regime).unwrap();
            max = max.max(p);
            min = min.min(p);
        }
        let vis = (max - min) / (max + min);
        assert_relative_eq!(vis, v_theo, epsilon = 1e-6);
        assert_relative_eq!(vis, 0.9880371206, epsilon = 1e-4);
    }

    #[test]
    fn middle_peak_reduces_to_projection_at_small_tau() {
        let (photon, pump) = experiment_pair();
        let bounds = crate::sfg::separability_bounds(&photon, &pump);
        let tau = bounds.upper_bound / 1000.0;
        let photon = photon
            .with_coefficients(vec![Complex64::ONE, Complex64::ONE], tau)
            .unwrap();
        let pump = pump
            .with_coefficients(
                vec![Complex64::ONE, Complex64::from_polar(1.0, 0.8)],
                tau,
            )
            .unwrap();
        let regime = SfgRegime::from_specs(&photon, &pump).unwrap();
        let state = QuditState::qubit(0.6, 1.9, tau);
        let exact = middle_peak_probability(&state, &pump, &regime).unwrap();
        let proj = projector_from_pulse(&pump, regime.middle_center());
        let born = projection_probability(&state, &proj).unwrap();
        assert!((exact - born).abs() < 1e-6, "{exact} vs {born}");
    }

    #[test]
    fn hermitian_exchange_symmetry_with_equal_bandwidths() {
        // swapping (state, pump-as-projector) roles leaves the double sum
        // unchanged when sigma1 = sigma2
        let tau = 2.16e-12;
        let sigma = 8e12;
        let chirp = 670e3 * 1e-30;
        let make = |coeffs: Vec<Complex64>, sign: f64| {
            ChirpedPulseSpec::new(2.3e15, sigma, sign * chirp, 0.0, tau, coeffs).unwrap()
        };
        let psi = vec![
            Complex64::from_polar(0.6, 0.3),
            Complex64::from_polar(0.8, -1.1),
        ];
        let lam = vec![
            Complex64::from_polar(0.3, 1.9),
            Complex64::from_polar(0.95, 0.2),
        ];
        let photon_a = make(psi.clone(), 1.0);
        let pump_a = make(lam.clone(), -1.0);
        let regime_a = SfgRegime::from_specs(&photon_a, &pump_a).unwrap();
        let p_ab = middle_peak_probability(
            &QuditState::new(psi.clone(), tau).unwrap(),
            &pump_a,
            &regime_a,
        )
        .unwrap();

        let photon_b = make(lam, 1.0);
        let pump_b = make(psi, -1.0);
        let regime_b = SfgRegime::from_specs(&photon_b, &pump_b).unwrap();
        let p_ba = middle_peak_probability(
            &QuditState::from_pulse(&photon_b).unwrap(),
            &pump_b,
            &regime_b,
        )
        .unwrap();
        assert!((p_ab - p_ba).abs() < 1e-9);
    }

    #[test]
    fn window_integrate_full_and_destructive() {
        let (photon, pump) = experiment_pair();
        let grid = default_output_grid(&photon, &pump);
        let regime = SfgRegime::from_specs(&photon, &pump).unwrap();
        let lambda_m = angular_to_wavelength(regime.middle_center()).unwrap();

        // a window generously wider than all spectral support returns the
        // total norm (the peaks sit within a few pm of the center)
        let full_width = angular_to_wavelength(grid.start()).unwrap()
            - angular_to_wavelength(grid.end()).unwrap();
        let out = sfg_numeric(&photon, &pump, &grid).unwrap();
        let center = angular_to_wavelength((grid.start() + grid.end()) / 2.0).unwrap();
        let full = window_integrate(
            &out.field,
            &MonochromatorWindow::new(center, 0.9 * full_width).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(full, 1.0, max_relative = 1e-6);

        // destructive vs constructive middle-peak window: < 2% ratio
        let window = MonochromatorWindow::new(lambda_m, 0.11e-9).unwrap();
        let phase_ref = regime.phase_reference();
        let beta_constructive = (-phase_ref).rem_euclid(TAU);
        let beta_destructive = (PI - phase_ref).rem_euclid(TAU);
        let mut fractions = Vec::new();
        for beta in [beta_constructive, beta_destructive] {
            let pump_b = qubit_spec(FRAC_PI_4, beta, &pump);
            let out = sfg_numeric(&photon, &pump_b, &grid).unwrap();
            fractions.push(window_integrate(&out.field, &window).unwrap());
        }
        assert!(
            fractions[1] < 0.02 * fractions[0],
            "destructive {parts:?}",
            parts = fractions
        );

        // blue-peak window captures everything when only that term survives
        let photon_e = qubit_spec(0.0, 0.0, &photon);
        let pump_l = qubit_spec(FRAC_PI_2, 0.0, &pump);
        let out = sfg_numeric(&photon_e, &pump_l, &grid).unwrap();
        let blue_center = crate::sfg::bin_pair_center(&regime, 0, 1);
        let blue_window = MonochromatorWindow::new(
            angular_to_wavelength(blue_center).unwrap(),
            0.11e-9,
        )
        .unwrap();
        let blue = window_integrate(&out.field, &blue_window).unwrap();
        assert!(blue > 0.99, "blue fraction {blue}");

        // window outside the grid errors
        let off = MonochromatorWindow::new(lambda_m + 30e-9, 0.11e-9).unwrap();
        assert!(window_integrate(&out.field, &off).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn qudit_double_sum_is_bounded_and_reduces_to_born(
            n in 2usize..5,
            seed in 0u64..1000,
        ) {
            use rand::Rng;
            let mut rng = crate::rng::stream_rng(seed, 0);
            let tau = 2.16e-12;
            let coeffs = |rng: &mut rand_chacha::ChaCha12Rng| -> Vec<Complex64> {
                (0..n)
                    .map(|_| Complex64::from_polar(rng.random::<f64>() + 1e-3, rng.random::<f64>() * TAU))
                    .collect()
            };
            let (photon, pump_base) = experiment_pair();
            let state = QuditState::new(coeffs(&mut rng), tau).unwrap();
            let pump = pump_base.with_coefficients(coeffs(&mut rng), tau).unwrap();
            let photon = photon.with_coefficients(state.coefficients().to_vec(), tau).unwrap();
            let regime = SfgRegime::from_specs(&photon, &pump).unwrap();
            let p = middle_peak_probability(&state, &pump, &regime).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
        }
    }
}
