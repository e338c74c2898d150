//! Experiment configuration and projector-definition files (TOML).
//!
//! Every field has a default reproducing the headline experiment: 810.4 nm /
//! 4.53 nm photon with +670000 fs^2 chirp, 785.7 nm / 11.9 nm pump with the
//! opposite chirp, 2.16 ps bin spacing, 0.11 nm monochromator window,
//! 0.893 fringe visibility at 500 counts per setting.

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::Deserialize;
use std::path::Path;

use timebin_core::measure::{MonochromatorWindow, ProjectorSpec};
use timebin_core::pulse::ChirpedPulseSpec;
use timebin_core::units::{fwhm_wavelength_to_sigma, wavelength_to_angular};
use timebin_core::NoiseModel;

const FS2: f64 = 1e-30;
const PS: f64 = 1e-12;
const NM: f64 = 1e-9;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    pub center_wavelength_nm: f64,
    pub fwhm_bandwidth_nm: f64,
    pub chirp_fs2: f64,
    pub delay_ps: f64,
    /// Bin coefficients as `[magnitude, phase / pi]` pairs.
    pub bins: Vec<[f64; 2]>,
}

impl PulseConfig {
    fn photon_default() -> Self {
        Self {
            center_wavelength_nm: 810.4,
            fwhm_bandwidth_nm: 4.53,
            chirp_fs2: 670e3,
            delay_ps: 0.0,
            bins: vec![[1.0, 0.0], [1.0, 0.0]],
        }
    }

    fn pump_default() -> Self {
        Self {
            center_wavelength_nm: 785.7,
            fwhm_bandwidth_nm: 11.9,
            chirp_fs2: -670e3,
            delay_ps: 0.0,
            bins: vec![[1.0, 0.0], [1.0, 0.0]],
        }
    }

    pub fn to_spec(&self, bin_spacing_ps: f64) -> Result<ChirpedPulseSpec> {
        let center = wavelength_to_angular(self.center_wavelength_nm * NM)?;
        let sigma =
            fwhm_wavelength_to_sigma(self.center_wavelength_nm * NM, self.fwhm_bandwidth_nm * NM)?;
        let coefficients = bins_to_coefficients(&self.bins)?;
        Ok(ChirpedPulseSpec::new(
            center,
            sigma,
            self.chirp_fs2 * FS2,
            self.delay_ps * PS,
            bin_spacing_ps * PS,
            coefficients,
        )?)
    }

    pub fn fingerprint(&self) -> String {
        let bins: Vec<String> = self
            .bins
            .iter()
            .map(|[m, p]| format!("{m:.6}:{p:.6}"))
            .collect();
        format!(
            "{:.4}nm/{:.4}nm/{:.1}fs2/{:.4}ps/[{}]",
            self.center_wavelength_nm,
            self.fwhm_bandwidth_nm,
            self.chirp_fs2,
            self.delay_ps,
            bins.join(",")
        )
    }
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self::photon_default()
    }
}

pub fn bins_to_coefficients(bins: &[[f64; 2]]) -> Result<Vec<Complex64>> {
    if bins.is_empty() {
        bail!("bins list is empty");
    }
    Ok(bins
        .iter()
        .map(|[mag, phase_over_pi]| {
            Complex64::from_polar(*mag, phase_over_pi * std::f64::consts::PI)
        })
        .collect())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonochromatorConfig {
    /// 0 = auto-center on the middle peak.
    pub center_nm: f64,
    pub width_fwhm_nm: f64,
}

impl Default for MonochromatorConfig {
    fn default() -> Self {
        Self {
            center_nm: 0.0,
            width_fwhm_nm: 0.11,
        }
    }
}

impl MonochromatorConfig {
    pub fn window(&self, auto_center: f64) -> Result<MonochromatorWindow> {
        let center = if self.center_nm > 0.0 {
            self.center_nm * NM
        } else {
            auto_center
        };
        Ok(MonochromatorWindow::new(center, self.width_fwhm_nm * NM)?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub fringe_visibility: f64,
    pub counts_per_setting_mean: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            fringe_visibility: 0.893,
            counts_per_setting_mean: 500.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub bin_spacing_ps: f64,
    /// Constant phase added to superposition signal measurements, modeling
    /// the unreported birefringence offset of the waveplate stack.
    pub birefringence_offset_rad: f64,
    pub output_dir: String,
    pub photon: PulseConfig,
    pub pump: PulseConfig,
    pub monochromator: MonochromatorConfig,
    pub noise: NoiseConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            bin_spacing_ps: 2.16,
            birefringence_offset_rad: 0.0,
            output_dir: "out".into(),
            photon: PulseConfig::photon_default(),
            pump: PulseConfig::pump_default(),
            monochromator: MonochromatorConfig::default(),
            noise: NoiseConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bin_spacing_ps < 0.0 {
            bail!("bin_spacing_ps must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.noise.fringe_visibility) {
            bail!("noise.fringe_visibility must lie in [0, 1]");
        }
        if self.noise.counts_per_setting_mean <= 0.0 {
            bail!("noise.counts_per_setting_mean must be positive");
        }
        Ok(())
    }

    pub fn photon_spec(&self) -> Result<ChirpedPulseSpec> {
        self.photon.to_spec(self.bin_spacing_ps)
    }

    pub fn pump_spec(&self) -> Result<ChirpedPulseSpec> {
        self.pump.to_spec(self.bin_spacing_ps)
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        Ok(NoiseModel::new(
            self.noise.fringe_visibility,
            self.noise.counts_per_setting_mean,
            self.noise.seed,
        )?)
    }

    /// One-line parameter fingerprint stamped into output headers.
    pub fn fingerprint(&self) -> String {
        format!(
            "photon={} pump={} tau={:.4}ps offset={:.6}rad window={:.4}nm/{:.4}nm V={:.4} counts={:.1} seed={}",
            self.photon.fingerprint(),
            self.pump.fingerprint(),
            self.bin_spacing_ps,
            self.birefringence_offset_rad,
            self.monochromator.center_nm,
            self.monochromator.width_fwhm_nm,
            self.noise.fringe_visibility,
            self.noise.counts_per_setting_mean,
            self.noise.seed,
        )
    }
}

/// Projector definition file: dimension, bin spacing, and the projector's
/// `(magnitude, phase / pi)` coefficients.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectorFile {
    pub dimension: usize,
    pub bin_spacing_ps: f64,
    #[serde(default)]
    pub phase_reference_rad: f64,
    pub bins: Vec<[f64; 2]>,
}

impl ProjectorFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading projector file {}", path.display()))?;
        let file: ProjectorFile = toml::from_str(&text)
            .with_context(|| format!("parsing projector file {}", path.display()))?;
        if file.bins.len() != file.dimension {
            bail!(
                "projector file {}: dimension {} but {} bin entries",
                path.display(),
                file.dimension,
                file.bins.len()
            );
        }
        Ok(file)
    }

    pub fn to_projector(&self) -> Result<ProjectorSpec> {
        Ok(ProjectorSpec::new(
            bins_to_coefficients(&self.bins)?,
            self.bin_spacing_ps * PS,
            self.phase_reference_rad,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_experiment_numbers() {
        let config = ExperimentConfig::default();
        let photon = config.photon_spec().unwrap();
        assert!((photon.sigma() - 5.5174980021e12).abs() / photon.sigma() < 1e-9);
        assert!((photon.chirp() - 6.7e-25).abs() < 1e-36);
        let pump = config.pump_spec().unwrap();
        assert!(pump.chirp() < 0.0);
        assert_eq!(photon.bins(), 2);
    }

    #[test]
    fn toml_round_trip_with_partial_file() {
        let text = r#"
            bin_spacing_ps = 1.5
            [noise]
            seed = 99
        "#;
        let config: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(config.bin_spacing_ps, 1.5);
        assert_eq!(config.noise.seed, 99);
        // untouched sections keep their defaults
        assert_eq!(config.photon.center_wavelength_nm, 810.4);
        assert_eq!(config.monochromator.width_fwhm_nm, 0.11);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "bin_spacig_ps = 1.5";
        assert!(toml::from_str::<ExperimentConfig>(text).is_err());
    }
}
