use std::collections::HashMap;

use num_complex::Complex64;

use super::FastTransform;
use crate::error::{dim_err, Result};
use crate::linalg::Matrix;
use crate::phasor::{FreqVec, PhasorVolume};

// The evaluated field is Re(sum c e^{j2pi<f,x>}) = sum (c e^{..} + conj(c) e^{-..}) / 2,
// so its true spectrum places c/2 at f and conj(c)/2 at -f. Copies of the same
// frequency in different factors add before the magnitude is taken, which
// accounts for the cross-factor terms exactly.
fn accumulate<'a>(
    vol: &PhasorVolume,
    factors: impl Iterator<Item = usize> + 'a,
) -> Vec<HashMap<FreqVec, Complex64>> {
    let k = vol.channels();
    let dims = vol.dims();
    let plane = vol.layout().factor_plane_len();
    let mut spectra: Vec<HashMap<FreqVec, Complex64>> = vec![HashMap::new(); k];
    for a in factors {
        let freqs = vol.layout().factor_frequencies(a);
        let coeffs = vol.factor(a);
        for (c, spectrum) in spectra.iter_mut().enumerate() {
            for (i, f) in freqs.iter().enumerate() {
                let z = coeffs[c * plane + i];
                if z == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let mut neg = [0i64; 3];
                for b in 0..dims {
                    neg[b] = -f[b];
                }
                *spectrum.entry(*f).or_default() += z * 0.5;
                *spectrum.entry(neg).or_default() += z.conj() * 0.5;
            }
        }
    }
    spectra
}

fn total(spectra: &[HashMap<FreqVec, Complex64>]) -> f64 {
    // sort for a reproducible summation order
    spectra
        .iter()
        .map(|s| {
            let mut keys: Vec<&FreqVec> = s.keys().collect();
            keys.sort();
            keys.into_iter().map(|f| s[f].norm_sqr()).sum::<f64>()
        })
        .sum()
}

/// Energy of the real field over the unit domain computed from coefficients,
/// summed over channels.
pub fn spectral_energy(vol: &PhasorVolume) -> f64 {
    total(&accumulate(vol, 0..vol.dims()))
}

/// Spectral energy of the field produced by factor `a` alone.
pub fn factor_spectral_energy(vol: &PhasorVolume, a: usize) -> f64 {
    total(&accumulate(vol, std::iter::once(a)))
}

/// Mean of `sum_c f_c^2` over a `grid_res^n` lattice of the unit domain.
///
/// The quadrature is exact for the squared field once `grid_res` exceeds the
/// resolution, because the lattice coincides with the fast evaluator's.
pub fn spatial_energy(vol: &PhasorVolume, grid_res: usize) -> Result<f64> {
    let n = vol.layout().resolution();
    if grid_res < n {
        return Err(dim_err(format!("grid resolution {grid_res} below volume resolution {n}")));
    }
    let dims = vol.dims();
    let points = grid_res.pow(dims as u32);
    let mut transform = FastTransform::with_lattice(grid_res);
    let chunk = 1 << 15;
    let mut sum = 0.0;
    let mut start = 0;
    while start < points {
        let end = (start + chunk).min(points);
        let mut coords = Matrix::zeros(end - start, dims);
        for p in start..end {
            let mut rem = p;
            let row = coords.row_mut(p - start);
            for a in (0..dims).rev() {
                row[a] = (rem % grid_res) as f64 / grid_res as f64;
                rem /= grid_res;
            }
        }
        let f = transform.eval(vol, &coords)?;
        sum += f.data.iter().map(|v| v * v).sum::<f64>();
        start = end;
    }
    Ok(sum / points as f64)
}

/// [`spatial_energy`] of the field produced by factor `a` alone.
pub fn spatial_energy_of_factor(vol: &PhasorVolume, a: usize, grid_res: usize) -> Result<f64> {
    if a >= vol.dims() {
        return Err(dim_err(format!("factor {a} out of range")));
    }
    let mut single = vol.clone();
    for b in 0..vol.dims() {
        if b != a {
            single.factor_mut(b).iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        }
    }
    spatial_energy(&single, grid_res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::{FrequencyLayout, InitMode};

    #[test]
    fn unit_cosine_has_half_energy() {
        let l = FrequencyLayout::new(2, 8, 3).unwrap();
        let mut v = PhasorVolume::new(l, 1, InitMode::Zero).unwrap();
        v.map_coefficients(|a, f, z| {
            if a == 1 && f[0] == 3 && f[1] == 2 {
                Complex64::new(1.0, 0.0)
            } else {
                z
            }
        });
        assert!((spectral_energy(&v) - 0.5).abs() < 1e-15);
        assert!((spatial_energy(&v, 32).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_volume_has_zero_energy() {
        let l = FrequencyLayout::new(3, 8, 2).unwrap();
        let v = PhasorVolume::new(l, 2, InitMode::Zero).unwrap();
        assert_eq!(spectral_energy(&v), 0.0);
        assert_eq!(spatial_energy(&v, 8).unwrap(), 0.0);
    }
}
