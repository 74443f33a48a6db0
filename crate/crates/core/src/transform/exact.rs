use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{check_coords, check_derivative, real_part, wrap_unit, Derivative};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::phasor::PhasorVolume;

/// Brute-force field evaluation: the real part of every stored exponential
/// summed per sample. Cost grows with the full coefficient count, so this is
/// meant for checking and for tiny problems.
pub fn eval_exact(vol: &PhasorVolume, coords: &Matrix) -> Result<Matrix> {
    let z = eval_exact_complex(vol, coords, None)?;
    Ok(real_part(&z, coords.rows, vol.channels()))
}

pub fn eval_exact_derivative(vol: &PhasorVolume, coords: &Matrix, d: Derivative) -> Result<Matrix> {
    let z = eval_exact_complex(vol, coords, Some(d))?;
    Ok(real_part(&z, coords.rows, vol.channels()))
}

/// Complex factor sum before the real part is taken, row-major `[B, k]`.
pub fn eval_exact_complex(
    vol: &PhasorVolume,
    coords: &Matrix,
    deriv: Option<Derivative>,
) -> Result<Vec<Complex64>> {
    check_coords(vol, coords)?;
    check_derivative(vol, deriv)?;
    let k = vol.channels();
    let layout = *vol.layout();
    let dims = vol.dims();
    let plane = layout.factor_plane_len();
    let factor_freqs: Vec<_> = (0..dims).map(|a| layout.factor_frequencies(a)).collect();

    let mut out = vec![Complex64::new(0.0, 0.0); coords.rows * k];
    out.par_chunks_mut(k)
        .enumerate()
        .for_each(|(s, row)| {
            let x: Vec<f64> = coords.row(s).iter().map(|&v| wrap_unit(v)).collect();
            for (a, freqs) in factor_freqs.iter().enumerate() {
                let coeffs = vol.factor(a);
                for (i, f) in freqs.iter().enumerate() {
                    let phase: f64 = (0..dims).map(|b| f[b] as f64 * x[b]).sum();
                    let mut basis = Complex64::from_polar(1.0, 2.0 * PI * phase);
                    if let Some(d) = deriv {
                        basis *= d.multiplier(f[d.axis]);
                    }
                    for (c, acc) in row.iter_mut().enumerate() {
                        *acc += coeffs[c * plane + i] * basis;
                    }
                }
            }
        });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::{FrequencyLayout, InitMode};

    #[test]
    fn single_cosine() {
        let l = FrequencyLayout::new(2, 8, 3).unwrap();
        let mut v = PhasorVolume::new(l, 1, InitMode::Zero).unwrap();
        // factor 0 reduces x; entry (u=1 on x, v=0 on y)
        v.map_coefficients(|a, f, z| {
            if a == 0 && f[0] == 1 && f[1] == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                z
            }
        });
        let coords = Matrix::from_rows(&[vec![0.25, 0.3], vec![0.0, 0.9], vec![1.5, 0.1]]).unwrap();
        let f = eval_exact(&v, &coords).unwrap();
        assert!(f.get(0, 0).abs() < 1e-7);
        assert!((f.get(1, 0) - 1.0).abs() < 1e-12);
        // 1.5 wraps to 0.5
        assert!((f.get(2, 0) + 1.0).abs() < 1e-12);

        let d = eval_exact_derivative(&v, &coords, Derivative::new(0, 1).unwrap()).unwrap();
        assert!((d.get(0, 0) + 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_shapes() {
        let l = FrequencyLayout::new(3, 8, 3).unwrap();
        let v = PhasorVolume::new(l, 1, InitMode::Zero).unwrap();
        let coords = Matrix::zeros(4, 2);
        assert!(eval_exact(&v, &coords).is_err());
        let coords = Matrix::zeros(4, 3);
        assert!(eval_exact_derivative(&v, &coords, Derivative { axis: 3, order: 1 }).is_err());
        assert!(Derivative::new(0, 3).is_err());
    }
}
