//! Wavelength/angular-frequency conversions. All quantities are SI:
//! wavelengths in meters, angular frequencies in rad/s, times in seconds.

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// 2*sqrt(2 ln 2): ratio of a Gaussian's intensity FWHM to its RMS width.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// omega = 2 pi c / lambda.
pub fn wavelength_to_angular(lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::NonPositive {
            quantity: "wavelength",
            value: lambda,
        });
    }
    Ok(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / lambda)
}

/// lambda = 2 pi c / omega.
pub fn angular_to_wavelength(omega: f64) -> Result<f64> {
    if omega <= 0.0 {
        return Err(Error::NonPositive {
            quantity: "angular frequency",
            value: omega,
        });
    }
    Ok(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / omega)
}

/// RMS angular-frequency width of a field whose *intensity* spectrum has the
/// given FWHM in wavelength: sigma = (2 pi c dlambda / lambda0^2) / (2 sqrt(2 ln 2)).
///
/// `dlambda = 0` maps to sigma = 0, which downstream constructors reject.
pub fn fwhm_wavelength_to_sigma(lambda0: f64, dlambda: f64) -> Result<f64> {
    if lambda0 <= 0.0 {
        return Err(Error::NonPositive {
            quantity: "center wavelength",
            value: lambda0,
        });
    }
    if dlambda < 0.0 {
        return Err(Error::NonPositive {
            quantity: "FWHM bandwidth",
            value: dlambda,
        });
    }
    Ok(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT * dlambda / (lambda0 * lambda0)
        / FWHM_PER_SIGMA)
}

/// Intensity FWHM in wavelength of a peak at `lambda0` with RMS angular width
/// `sigma`: dlambda = lambda0^2/(2 pi c) * 2 sqrt(2 ln 2) * sigma.
pub fn sigma_to_fwhm_wavelength(lambda0: f64, sigma: f64) -> f64 {
    lambda0 * lambda0 / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT) * FWHM_PER_SIGMA * sigma
}

/// Local Jacobian |domega/dlambda| = 2 pi c / lambda^2, used to transport
/// narrow widths between the two axes.
pub fn wavelength_width_to_angular(lambda0: f64, dlambda: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT * dlambda / (lambda0 * lambda0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn angular_frequency_of_ti_sapphire_line() {
        // 2 pi c / 790.2 nm, evaluated independently.
        let w = wavelength_to_angular(790.2e-9).unwrap();
        assert_relative_eq!(w, 2.3837655876e15, max_relative = 1e-9);
    }

    #[test]
    fn sigma_of_filtered_signal_photon() {
        let s = fwhm_wavelength_to_sigma(810.4e-9, 4.53e-9).unwrap();
        assert_relative_eq!(s, 5.5174980021e12, max_relative = 1e-9);
    }

    #[test]
    fn zero_bandwidth_gives_zero_sigma() {
        assert_eq!(fwhm_wavelength_to_sigma(810.4e-9, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn nonpositive_wavelength_rejected() {
        assert!(wavelength_to_angular(0.0).is_err());
        assert!(wavelength_to_angular(-1e-9).is_err());
        assert!(angular_to_wavelength(-1.0).is_err());
    }

    #[test]
    fn conversions_round_trip() {
        let w = wavelength_to_angular(810.4e-9).unwrap();
        assert_relative_eq!(angular_to_wavelength(w).unwrap(), 810.4e-9, max_relative = 1e-14);
        let s = fwhm_wavelength_to_sigma(810.4e-9, 4.53e-9).unwrap();
        assert_relative_eq!(
            sigma_to_fwhm_wavelength(810.4e-9, s),
            4.53e-9,
            max_relative = 1e-14
        );
    }
}
