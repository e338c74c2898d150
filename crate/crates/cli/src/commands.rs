//! Implementations of the CLI subcommands.

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::path::Path;

use timebin_core::entangle::{
    chsh_monte_carlo, fringe_scan, fringe_scan_counts, make_phi_plus, ChshEstimate, FringeCurve,
    CHSH_OPTIMAL_PHASES,
};
use timebin_core::measure::{
    middle_peak_fraction, middle_peak_probability, projection_probability, window_integrate,
};
use timebin_core::pulse::QuditState;
use timebin_core::sfg::{
    default_output_grid, detect_peaks, peak_descriptors, separability_bounds, sfg_analytic,
    sfg_numeric, PeakDescriptor, SfgRegime,
};
use timebin_core::tomo::{
    build_36_set_with_offset, mle_reconstruct, monte_carlo_errors, ErrorEstimate, Metric,
    TomographySet, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use timebin_core::units::angular_to_wavelength;
use timebin_core::{sample_counts, Warning};

use crate::config::ExperimentConfig;
use crate::output::{spectrum_rows, OutputDir, SPECTRUM_HEADER};

fn report_warnings(route: &str, warnings: &[Warning]) {
    for w in warnings {
        eprintln!("warning ({route}): {w}");
    }
}

#[derive(Serialize)]
struct PeakReport {
    fingerprint: String,
    analytic: Vec<PeakJson>,
    numeric_detected: Vec<DetectedJson>,
    side_displacement_nm: SideDisplacement,
    middle_fwhm_nm: MiddleWidths,
    monochromator_window_fraction: f64,
}

#[derive(Serialize)]
struct PeakJson {
    label: String,
    central_angular_frequency_rad_s: f64,
    central_wavelength_nm: f64,
    rms_width_rad_s: f64,
    fwhm_wavelength_nm: f64,
    integrated_intensity: f64,
}

impl PeakJson {
    fn from(p: &PeakDescriptor) -> Self {
        Self {
            label: p.label.to_string(),
            central_angular_frequency_rad_s: p.central_angular_frequency,
            central_wavelength_nm: p.central_wavelength * 1e9,
            rms_width_rad_s: p.rms_width,
            fwhm_wavelength_nm: p.fwhm_wavelength * 1e9,
            integrated_intensity: p.integrated_intensity,
        }
    }
}

#[derive(Serialize)]
struct DetectedJson {
    wavelength_nm: f64,
    angular_frequency_rad_s: f64,
    height: f64,
}

#[derive(Serialize)]
struct SideDisplacement {
    analytic: Vec<f64>,
    numeric: Vec<f64>,
}

#[derive(Serialize)]
struct MiddleWidths {
    intrinsic: f64,
    instrument_convolved: f64,
    instrument_fwhm: f64,
}

/// `spectrum`: numeric and closed-form spectra plus the peak report.
pub fn cmd_spectrum(config: &ExperimentConfig, out: &OutputDir) -> Result<()> {
    let photon = config.photon_spec()?;
    let pump = config.pump_spec()?;
    // fail fast on regime violations before the quadrature runs
    let regime = SfgRegime::from_specs(&photon, &pump)?;
    report_warnings("regime", regime.warnings());

    let grid = default_output_grid(&photon, &pump);
    let numeric = sfg_numeric(&photon, &pump, &grid)?;
    report_warnings("numeric", &numeric.warnings);
    let analytic = sfg_analytic(&photon, &pump, &grid)?;

    let fingerprint = config.fingerprint();
    out.write_table(
        "spectrum_numeric",
        &format!("route=numeric {fingerprint}"),
        &SPECTRUM_HEADER,
        &spectrum_rows(&numeric.field),
    )?;
    out.write_table(
        "spectrum_analytic",
        &format!("route=analytic {fingerprint}"),
        &SPECTRUM_HEADER,
        &spectrum_rows(&analytic.field),
    )?;

    let peaks = peak_descriptors(&photon, &pump)?;
    let middle = peaks
        .iter()
        .find(|p| matches!(p.label, timebin_core::PeakLabel::Middle))
        .expect("three peaks");
    let displacement = |field: &timebin_core::SpectralField| -> Vec<f64> {
        let found = detect_peaks(field, 0.02);
        if found.len() < 2 {
            return Vec::new();
        }
        let mid = found[found.len() / 2].wavelength;
        found
            .iter()
            .filter(|p| (p.wavelength - mid).abs() > 1e-15)
            .map(|p| (p.wavelength - mid).abs() * 1e9)
            .collect()
    };

    let window = config
        .monochromator
        .window(angular_to_wavelength(regime.middle_center())?)?;
    let window_fraction = window_integrate(&numeric.field, &window)?;

    let instrument_fwhm_nm = 0.03;
    let report = PeakReport {
        fingerprint,
        analytic: peaks.iter().map(PeakJson::from).collect(),
        numeric_detected: detect_peaks(&numeric.field, 0.02)
            .iter()
            .map(|p| DetectedJson {
                wavelength_nm: p.wavelength * 1e9,
                angular_frequency_rad_s: p.omega,
                height: p.height,
            })
            .collect(),
        side_displacement_nm: SideDisplacement {
            analytic: displacement(&analytic.field),
            numeric: displacement(&numeric.field),
        },
        middle_fwhm_nm: MiddleWidths {
            intrinsic: middle.fwhm_wavelength * 1e9,
            instrument_convolved: middle.convolved_fwhm_wavelength(instrument_fwhm_nm * 1e-9)
                * 1e9,
            instrument_fwhm: instrument_fwhm_nm,
        },
        monochromator_window_fraction: window_fraction,
    };
    out.write_json("peaks.json", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct BoundsReport {
    fingerprint: String,
    lower_bound_s: f64,
    upper_bound_s: f64,
    tau_s: f64,
    lower_bound_ps: f64,
    upper_bound_ps: f64,
    tau_ps: f64,
    separable: bool,
    interferes: bool,
}

/// `bounds`: separability report.
pub fn cmd_bounds(config: &ExperimentConfig, out: &OutputDir) -> Result<()> {
    let report = separability_bounds(&config.photon_spec()?, &config.pump_spec()?);
    out.write_json(
        "bounds.json",
        &BoundsReport {
            fingerprint: config.fingerprint(),
            lower_bound_s: report.lower_bound,
            upper_bound_s: report.upper_bound,
            tau_s: report.tau,
            lower_bound_ps: report.lower_bound * 1e12,
            upper_bound_ps: report.upper_bound * 1e12,
            tau_ps: report.tau * 1e12,
            separable: report.separable,
            interferes: report.interferes,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct FringeReport {
    fingerprint: String,
    visibility_target: f64,
    noiseless: bool,
    seed: u64,
    counts_mean: f64,
    mean_fitted_visibility: f64,
    curves: Vec<CurveFit>,
    singles: Vec<CurveFit>,
}

#[derive(Serialize)]
struct CurveFit {
    label: String,
    gamma_over_pi: f64,
    offset: f64,
    amplitude: f64,
    phase_rad: f64,
    visibility: f64,
    degenerate: bool,
}

fn curve_fit(curve: &FringeCurve) -> CurveFit {
    CurveFit {
        label: curve.label.clone(),
        gamma_over_pi: curve.gamma / std::f64::consts::PI,
        offset: curve.fit.offset,
        amplitude: curve.fit.amplitude,
        phase_rad: curve.fit.phase,
        visibility: curve.fit.visibility,
        degenerate: curve.fit.degenerate,
    }
}

/// `fringe`: coincidence-count fringes against the signal phase for each
/// idler setting, with sinusoid fits; singles rates alongside.
pub fn cmd_fringe(
    config: &ExperimentConfig,
    out: &OutputDir,
    gammas_over_pi: &[f64],
    beta_steps: usize,
    noiseless: bool,
) -> Result<()> {
    if beta_steps < 4 {
        bail!("--beta-steps must be at least 4");
    }
    let noise = config.noise_model()?;
    let rho = make_phi_plus(noise.fringe_visibility)?;
    let gammas: Vec<f64> = gammas_over_pi
        .iter()
        .map(|g| g * std::f64::consts::PI)
        .collect();
    // reported beta axis; the birefringence offset shifts the applied phase
    let betas: Vec<f64> = (0..=beta_steps)
        .map(|i| i as f64 / beta_steps as f64 * std::f64::consts::TAU)
        .collect();
    let applied: Vec<f64> = betas
        .iter()
        .map(|b| b + config.birefringence_offset_rad)
        .collect();

    let (curves, singles) = if noiseless {
        let curves = fringe_scan(&rho, &gammas, &applied)?;
        // expected counts rather than draws
        let scaled: Vec<FringeCurve> = curves
            .into_iter()
            .map(|mut c| {
                for v in &mut c.values {
                    *v *= noise.counts_per_setting_mean;
                }
                let fit = timebin_core::entangle::fit_sinusoid(&applied, &c.values);
                FringeCurve { fit, ..c }
            })
            .collect();
        (scaled, Vec::new())
    } else {
        let scan = fringe_scan_counts(&rho, &gammas, &applied, &noise)?;
        (scan.curves, scan.singles)
    };

    let fingerprint = config.fingerprint();
    let mut rows = Vec::new();
    for curve in &curves {
        for (j, &beta) in betas.iter().enumerate() {
            rows.push(vec![
                curve.label.clone(),
                format!("{:.6}", beta / std::f64::consts::PI),
                format!("{}", curve.values[j]),
                format!("{}", noise.seed),
            ]);
        }
    }
    out.write_table(
        "fringe_counts",
        &fingerprint,
        &["idler_basis", "beta_over_pi", "counts", "seed"],
        &rows,
    )?;

    if !singles.is_empty() {
        let mut srows = Vec::new();
        for curve in &singles {
            for (j, &beta) in betas.iter().enumerate() {
                srows.push(vec![
                    curve.label.clone(),
                    format!("{:.6}", beta / std::f64::consts::PI),
                    format!("{}", curve.values[j]),
                    format!("{}", noise.seed),
                ]);
            }
        }
        out.write_table(
            "fringe_singles",
            &fingerprint,
            &["idler_basis", "beta_over_pi", "counts", "seed"],
            &srows,
        )?;
    }

    let fits: Vec<CurveFit> = curves.iter().map(curve_fit).collect();
    let mean = if fits.is_empty() {
        0.0
    } else {
        fits.iter().map(|f| f.visibility).sum::<f64>() / fits.len() as f64
    };
    out.write_json(
        "fringe_fit.json",
        &FringeReport {
            fingerprint,
            visibility_target: noise.fringe_visibility,
            noiseless,
            seed: noise.seed,
            counts_mean: noise.counts_per_setting_mean,
            mean_fitted_visibility: mean,
            curves: fits,
            singles: singles.iter().map(curve_fit).collect(),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct ChshReport {
    fingerprint: String,
    phases_over_pi: [f64; 4],
    birefringence_offset_rad: f64,
    estimate: ChshEstimate,
}

/// `chsh`: S at the given (or optimal) phases with Monte-Carlo error.
pub fn cmd_chsh(
    config: &ExperimentConfig,
    out: &OutputDir,
    phases_over_pi: Option<[f64; 4]>,
    resamples: usize,
) -> Result<()> {
    let noise = config.noise_model()?;
    let rho = make_phi_plus(noise.fringe_visibility)?;
    let phases_over_pi = phases_over_pi.unwrap_or([
        CHSH_OPTIMAL_PHASES.0 / std::f64::consts::PI,
        CHSH_OPTIMAL_PHASES.1 / std::f64::consts::PI,
        CHSH_OPTIMAL_PHASES.2 / std::f64::consts::PI,
        CHSH_OPTIMAL_PHASES.3 / std::f64::consts::PI,
    ]);
    let offset = config.birefringence_offset_rad;
    let phases = (
        phases_over_pi[0] * std::f64::consts::PI,
        phases_over_pi[1] * std::f64::consts::PI,
        phases_over_pi[2] * std::f64::consts::PI + offset,
        phases_over_pi[3] * std::f64::consts::PI + offset,
    );
    let estimate = chsh_monte_carlo(&rho, phases, &noise, resamples)?;
    println!(
        "S = {:.4} (noiseless), {:.4} +- {:.4} from {} Poissonian resamples{}",
        estimate.s_noiseless,
        estimate.mc_mean,
        estimate.mc_std_dev,
        estimate.resamples,
        if estimate.violates_local_bound {
            "; violates the local bound S <= 2"
        } else {
            "; no violation"
        }
    );
    out.write_json(
        "chsh.json",
        &ChshReport {
            fingerprint: config.fingerprint(),
            phases_over_pi,
            birefringence_offset_rad: offset,
            estimate,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct TomoReport {
    fingerprint: String,
    counts_source: String,
    dimension: usize,
    basis: [&'static str; 4],
    real: Vec<Vec<f64>>,
    imag: Vec<Vec<f64>>,
    metrics: TomoMetrics,
    monte_carlo: Vec<ErrorEstimate>,
}

#[derive(Serialize)]
struct TomoMetrics {
    fidelity_with_bell_state: f64,
    purity: f64,
    iterations: usize,
    converged: bool,
    clamped_probabilities: usize,
    final_log_likelihood: f64,
}

/// `tomo`: reconstruct a density matrix from counts (simulated or from file).
#[allow(clippy::too_many_arguments)]
pub fn cmd_tomo(
    config: &ExperimentConfig,
    out: &OutputDir,
    simulate: bool,
    counts_file: Option<&Path>,
    noiseless: bool,
    mc_resamples: usize,
) -> Result<()> {
    let set = build_36_set_with_offset(config.birefringence_offset_rad);
    let noise = config.noise_model()?;
    let fingerprint = config.fingerprint();

    let (counts, source) = match (simulate, counts_file) {
        (true, None) => {
            let rho = make_phi_plus(noise.fringe_visibility)?;
            let probabilities = set.probabilities(rho.density());
            let counts: Vec<f64> = if noiseless {
                probabilities
                    .iter()
                    .map(|p| (p * noise.counts_per_setting_mean).round())
                    .collect()
            } else {
                sample_counts(&probabilities, &noise)
                    .iter()
                    .map(|&c| c as f64)
                    .collect()
            };
            let rows: Vec<Vec<String>> = set
                .elements()
                .iter()
                .zip(&counts)
                .enumerate()
                .map(|(i, (e, c))| {
                    vec![
                        i.to_string(),
                        e.idler_label.clone(),
                        e.signal_label.clone(),
                        format!("{}", *c as u64),
                    ]
                })
                .collect();
            out.write_table(
                "tomo_counts",
                &fingerprint,
                &["setting_index", "idler_label", "signal_label", "counts"],
                &rows,
            )?;
            (counts, format!("simulated (noiseless={noiseless}, seed={})", noise.seed))
        }
        (false, Some(path)) => (
            parse_counts_file(path, &set)?,
            format!("file {}", path.display()),
        ),
        (true, Some(_)) => bail!("--simulate and --counts-file are mutually exclusive"),
        (false, None) => bail!("tomo requires either --simulate or --counts-file PATH"),
    };

    let result = mle_reconstruct(&counts, &set, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
    if !result.converged {
        eprintln!(
            "warning: reconstruction hit the iteration cap ({} iterations)",
            result.iterations
        );
    }
    let bell = timebin_core::entangle::phi_plus_vector();
    let fidelity = result.rho.fidelity_with_pure(&bell)?;
    let purity = result.rho.purity();

    // Monte-Carlo error bars; the per-resample tolerance is relaxed to 1e-8
    // to keep 2 x mc_resamples reconstructions affordable
    let monte_carlo = if mc_resamples >= 2 {
        vec![
            monte_carlo_errors(
                &counts,
                &set,
                &Metric::FidelityWithPure(bell.clone()),
                mc_resamples,
                noise.seed,
                DEFAULT_MAX_ITER,
                1e-8,
            )?,
            monte_carlo_errors(
                &counts,
                &set,
                &Metric::Purity,
                mc_resamples,
                noise.seed,
                DEFAULT_MAX_ITER,
                1e-8,
            )?,
        ]
    } else {
        Vec::new()
    };

    let real: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..4).map(|j| result.rho.entry(i, j).re).collect())
        .collect();
    let imag: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..4).map(|j| result.rho.entry(i, j).im).collect())
        .collect();
    println!(
        "fidelity with the Bell state: {fidelity:.4}; purity: {purity:.4} ({} iterations)",
        result.iterations
    );
    out.write_json(
        "density_matrix.json",
        &TomoReport {
            fingerprint,
            counts_source: source,
            dimension: 4,
            basis: timebin_core::entangle::BASIS_LABELS,
            real,
            imag,
            metrics: TomoMetrics {
                fidelity_with_bell_state: fidelity,
                purity,
                iterations: result.iterations,
                converged: result.converged,
                clamped_probabilities: result.clamped_probabilities,
                final_log_likelihood: *result
                    .log_likelihood_trace
                    .last()
                    .unwrap_or(&f64::NAN),
            },
            monte_carlo,
        },
    )?;
    Ok(())
}

/// Parses a tomography counts CSV: `setting_index,idler_label,signal_label,
/// counts`, with `#` comment lines. Every one of the 36 standard settings
/// must appear exactly once; malformed rows are reported by line number.
fn parse_counts_file(path: &Path, set: &TomographySet) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading counts file {}", path.display()))?;
    let mut counts: Vec<Option<f64>> = vec![None; set.len()];
    let mut saw_header = false;
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if !saw_header {
            if fields != ["setting_index", "idler_label", "signal_label", "counts"] {
                bail!(
                    "{}:{line_no}: expected header 'setting_index,idler_label,signal_label,counts', got '{trimmed}'",
                    path.display()
                );
            }
            saw_header = true;
            continue;
        }
        if fields.len() != 4 {
            bail!(
                "{}:{line_no}: expected 4 comma-separated fields, got {}",
                path.display(),
                fields.len()
            );
        }
        let index: usize = fields[0].parse().with_context(|| {
            format!("{}:{line_no}: setting_index '{}' is not an integer", path.display(), fields[0])
        })?;
        let value: u64 = fields[3].parse().with_context(|| {
            format!("{}:{line_no}: counts '{}' is not a non-negative integer", path.display(), fields[3])
        })?;
        let position = set
            .elements()
            .iter()
            .position(|e| e.idler_label == fields[1] && e.signal_label == fields[2])
            .with_context(|| {
                format!(
                    "{}:{line_no}: unknown setting ({}, {})",
                    path.display(),
                    fields[1],
                    fields[2]
                )
            })?;
        if index != position {
            bail!(
                "{}:{line_no}: setting_index {index} does not match ({}, {}) which is setting {position}",
                path.display(),
                fields[1],
                fields[2]
            );
        }
        if counts[position].is_some() {
            bail!(
                "{}:{line_no}: duplicate entry for setting ({}, {})",
                path.display(),
                fields[1],
                fields[2]
            );
        }
        counts[position] = Some(value as f64);
    }
    if !saw_header {
        bail!("{}: missing header row", path.display());
    }
    let missing: Vec<usize> = counts
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.is_none().then_some(i))
        .collect();
    if !missing.is_empty() {
        bail!(
            "{}: missing {} settings (indices {:?})",
            path.display(),
            missing.len(),
            missing
        );
    }
    Ok(counts.into_iter().map(Option::unwrap).collect())
}

#[derive(Serialize)]
struct ProjectReport {
    fingerprint: String,
    projector_dimension: usize,
    projector_bins: Vec<[f64; 2]>,
    bin_spacing_ps: f64,
    state_bins: Vec<[f64; 2]>,
    phase_reference_rad: f64,
    sigma3_tau: f64,
    projection_probability: f64,
    middle_peak_probability: f64,
    middle_peak_fraction: f64,
    realized_pump_bins: Vec<[f64; 2]>,
}

/// `project`: Born and finite-visibility middle-peak probabilities of one
/// state against a projector loaded from file, plus the pump shape that
/// realizes the projector.
pub fn cmd_project(
    config: &ExperimentConfig,
    out: &OutputDir,
    projector_file: &crate::config::ProjectorFile,
    state_coefficients: Vec<Complex64>,
) -> Result<()> {
    if (projector_file.bin_spacing_ps - config.bin_spacing_ps).abs()
        > 1e-12 * config.bin_spacing_ps.abs().max(1.0)
    {
        bail!(
            "projector bin spacing {} ps does not match config bin spacing {} ps",
            projector_file.bin_spacing_ps,
            config.bin_spacing_ps
        );
    }
    let projector = projector_file.to_projector()?;
    if state_coefficients.len() != projector.dimension() {
        bail!(
            "state has {} bins but the projector has {}",
            state_coefficients.len(),
            projector.dimension()
        );
    }
    let tau = projector.bin_spacing();
    let state = QuditState::new(state_coefficients, tau)?;
    let born = projection_probability(&state, &projector)?;

    // envelope parameters come from the config; the pump coefficients that
    // realize this projector are d_j = x_j^* e^{-i j w03 tau}
    let photon_env = config.photon_spec()?;
    let pump_env = config.pump_spec()?;
    let regime = SfgRegime::from_specs(&photon_env, &pump_env)?;
    let phase_reference = regime.middle_center() * tau;
    let pump_coefficients: Vec<Complex64> = projector
        .coefficients()
        .iter()
        .enumerate()
        .map(|(j, x)| x.conj() * Complex64::from_polar(1.0, -(j as f64) * phase_reference))
        .collect();
    let pump = pump_env.with_coefficients(pump_coefficients, tau)?;
    let photon = photon_env
        .clone()
        .with_coefficients(state.coefficients().to_vec(), tau)?;
    let regime = SfgRegime::from_specs(&photon, &pump)?;
    let middle = middle_peak_probability(&state, &pump, &regime)?;
    let fraction = if state.dimension() == 2 {
        middle_peak_fraction(&state, &pump, &photon, &regime)?
    } else {
        f64::NAN
    };

    let to_pairs = |cs: &[Complex64]| -> Vec<[f64; 2]> {
        cs.iter()
            .map(|c| [c.norm(), c.arg() / std::f64::consts::PI])
            .collect()
    };
    println!(
        "projection probability {born:.6}; middle-peak probability {middle:.6} (sigma3*tau = {:.4})",
        regime.sigma3() * regime.tau()
    );
    out.write_json(
        "projection.json",
        &ProjectReport {
            fingerprint: config.fingerprint(),
            projector_dimension: projector.dimension(),
            projector_bins: to_pairs(projector.coefficients()),
            bin_spacing_ps: projector_file.bin_spacing_ps,
            state_bins: to_pairs(state.coefficients()),
            phase_reference_rad: phase_reference,
            sigma3_tau: regime.sigma3() * regime.tau(),
            projection_probability: born,
            middle_peak_probability: middle,
            middle_peak_fraction: fraction,
            realized_pump_bins: to_pairs(pump.coefficients()),
        },
    )?;
    Ok(())
}
