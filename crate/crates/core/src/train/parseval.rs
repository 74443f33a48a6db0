use std::f64::consts::PI;

use num_complex::Complex64;

use crate::phasor::PhasorVolume;

/// Frequency-weighted coefficient norm, one term per spatial axis:
/// `sum_axis sqrt(sum |2 pi f_axis c|^2)`.
///
/// Each axis term equals the L2 norm of the complex field's derivative along
/// that axis, so the sum acts as an anisotropic total-variation penalty.
/// Returns the value and its gradient as `(d/d re, d/d im)` pairs packed into
/// complex numbers. An axis term that is exactly zero contributes a zero
/// subgradient.
pub fn parseval_reg(vol: &PhasorVolume) -> (f64, Vec<Complex64>) {
    let dims = vol.dims();
    let mut sums = [0.0f64; 3];
    vol.for_each(|_, f, z| {
        for a in 0..dims {
            let w = 2.0 * PI * f[a] as f64;
            sums[a] += w * w * z.norm_sqr();
        }
    });
    let norms: Vec<f64> = sums[..dims].iter().map(|s| s.sqrt()).collect();
    let value = norms.iter().sum();

    let mut grad = vec![Complex64::new(0.0, 0.0); vol.coefficients().len()];
    let plane = vol.layout().factor_plane_len();
    let len = vol.factor_len();
    for a in 0..dims {
        let freqs = vol.layout().factor_frequencies(a);
        for (i, (g, z)) in grad[a * len..(a + 1) * len]
            .iter_mut()
            .zip(vol.factor(a))
            .enumerate()
        {
            let f = &freqs[i % plane];
            let mut scale = 0.0;
            for b in 0..dims {
                if norms[b] > 0.0 {
                    let w = 2.0 * PI * f[b] as f64;
                    scale += w * w / norms[b];
                }
            }
            *g = z * scale;
        }
    }
    (value, grad)
}

/// Value of a single axis term of [`parseval_reg`].
pub fn parseval_axis_term(vol: &PhasorVolume, axis: usize) -> f64 {
    let mut s = 0.0;
    vol.for_each(|_, f, z| {
        let w = 2.0 * PI * f[axis] as f64;
        s += w * w * z.norm_sqr();
    });
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::{FrequencyLayout, InitMode};
    use rand::{Rng, SeedableRng};

    fn with_entry(factor: usize, f: [i64; 2], z: Complex64) -> PhasorVolume {
        let l = FrequencyLayout::new(2, 8, 3).unwrap();
        let mut v = PhasorVolume::new(l, 1, InitMode::Zero).unwrap();
        v.map_coefficients(|a, fv, old| if a == factor && fv[..2] == f[..] { z } else { old });
        v
    }

    #[test]
    fn zero_and_dc_volumes_vanish() {
        let l = FrequencyLayout::new(2, 8, 3).unwrap();
        let v = PhasorVolume::new(l, 1, InitMode::Zero).unwrap();
        let (r, g) = parseval_reg(&v);
        assert_eq!(r, 0.0);
        assert!(g.iter().all(|z| z.norm() == 0.0));
        let v = with_entry(0, [0, 0], Complex64::new(1.0, 0.0));
        assert_eq!(parseval_reg(&v).0, 0.0);
    }

    #[test]
    fn unit_diagonal_frequency() {
        let v = with_entry(0, [1, 1], Complex64::new(1.0, 0.0));
        let (r, _) = parseval_reg(&v);
        assert!((r - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let l = FrequencyLayout::new(3, 4, 2).unwrap();
        let mut v = PhasorVolume::new(l, 2, InitMode::Zero).unwrap();
        for z in v.coefficients_mut() {
            *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let (_, g) = parseval_reg(&v);
        let h = 1e-6;
        let reals = v.as_reals().to_vec();
        for i in 0..reals.len() {
            let mut p = v.clone();
            p.as_reals_mut()[i] += h;
            let mut m = v.clone();
            m.as_reals_mut()[i] -= h;
            let fd = (parseval_reg(&p).0 - parseval_reg(&m).0) / (2.0 * h);
            let an = if i % 2 == 0 { g[i / 2].re } else { g[i / 2].im };
            assert!((fd - an).abs() <= 1e-4 * fd.abs().max(1e-2), "{i}: {fd} vs {an}");
        }
    }
}
