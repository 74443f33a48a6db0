use num_complex::Complex64;

use super::volume::PhasorVolume;
use crate::error::{PrefError, Result};

/// Gaussian gain `exp(-|k|^2 sigma^2)` for a frequency vector normalized by `N`.
pub fn gaussian_gain(freq: &[i64], resolution: usize, sigma: f64) -> f64 {
    let n = resolution as f64;
    let k2: f64 = freq.iter().map(|&f| (f as f64 / n).powi(2)).sum();
    (-k2 * sigma * sigma).exp()
}

/// Low-pass the embedding field by scaling each coefficient with a Gaussian
/// of its normalized frequency. Equivalent to convolving the field with a
/// Gaussian kernel in space.
pub fn gaussian_filter(vol: &PhasorVolume, sigma: f64) -> Result<PhasorVolume> {
    let mut out = vol.clone();
    apply_gaussian_filter(&mut out, sigma)?;
    Ok(out)
}

pub fn apply_gaussian_filter(vol: &mut PhasorVolume, sigma: f64) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(PrefError::Domain(format!(
            "filter width must be a finite non-negative number, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(());
    }
    let n = vol.layout().resolution();
    let dims = vol.dims();
    vol.map_coefficients(|_, f, z: Complex64| z * gaussian_gain(&f[..dims], n, sigma));
    Ok(())
}

/// Energy `sum |c|^2` of coefficients whose frequency exceeds `cutoff` in
/// magnitude on at least one axis.
pub fn high_band_energy(vol: &PhasorVolume, cutoff: i64) -> f64 {
    let dims = vol.dims();
    let mut e = 0.0;
    vol.for_each(|_, f, z| {
        if f[..dims].iter().any(|v| v.abs() > cutoff) {
            e += z.norm_sqr();
        }
    });
    e
}

/// Total spectral energy `sum |c|^2` over every stored coefficient.
pub fn coefficient_energy(vol: &PhasorVolume) -> f64 {
    vol.coefficients().iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::{FrequencyLayout, InitMode};

    fn volume_with_entries(entries: &[(usize, [i64; 2], Complex64)]) -> PhasorVolume {
        let l = FrequencyLayout::new(2, 8, 3).unwrap();
        let mut v = PhasorVolume::new(l, 1, InitMode::Zero).unwrap();
        v.map_coefficients(|a, f, z| {
            for (fa, ff, val) in entries {
                if *fa == a && f[..2] == ff[..] {
                    return *val;
                }
            }
            z
        });
        v
    }

    #[test]
    fn sigma_zero_is_identity() {
        let v = volume_with_entries(&[(0, [1, 3], Complex64::new(0.3, -1.2))]);
        let out = gaussian_filter(&v, 0.0).unwrap();
        assert_eq!(out.coefficients(), v.coefficients());
    }

    #[test]
    fn dc_is_untouched_and_nyquist_matches_closed_form() {
        let v = volume_with_entries(&[
            (0, [0, 0], Complex64::new(2.0, 0.0)),
            (1, [-4, 0], Complex64::new(1.0, 0.0)),
        ]);
        let out = gaussian_filter(&v, 2.0).unwrap();
        out.for_each(|a, f, z| {
            if a == 0 && f[..2] == [0, 0] {
                assert_eq!(z.re, 2.0);
            }
            if a == 1 && f[..2] == [-4, 0] {
                assert!((z.re - (-1.0f64).exp()).abs() < 1e-15);
            }
        });
    }

    #[test]
    fn negative_sigma_rejected() {
        let v = volume_with_entries(&[]);
        assert!(matches!(gaussian_filter(&v, -1.0), Err(PrefError::Domain(_))));
        assert!(gaussian_filter(&v, f64::NAN).is_err());
    }
}
