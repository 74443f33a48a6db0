//! Gradients of the fast transform with respect to phasor coefficients.
//!
//! The evaluated feature is `Re(sum_d e_d * sum_corner w * M[corner, d])`
//! with `M` an inverse FFT of the coefficients. Writing each coefficient as
//! `a + jb`, the gradient pair `(dL/da, dL/db)` is stored as the complex
//! number `dL/da + j dL/db`, which is `conj` of the chain of linear factors.
//! The adjoint therefore scatters `conj(e_d) * g` with the interpolation
//! weights and applies a forward FFT.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{dim_err, Result};
use crate::fft::Plans;
use crate::linalg::Matrix;
use crate::phasor::PhasorVolume;
use crate::transform::{corners, wrap_unit, FastTransform};
use crate::transform::fast_internals::{other_axes, plane_geometry, reduced_phasors};

/// Samples handled by one scatter partition.
const PARTITION: usize = 4096;
/// Upper bound on partial scatter buffers.
const MAX_PARTITIONS: usize = 4;

/// Adjoint of the fast transform: coefficient gradients for upstream feature
/// gradients `grad_features` (`[B, k]`), in the volume's coefficient layout.
pub fn backprop_to_volume(
    transform: &FastTransform,
    vol: &PhasorVolume,
    coords: &Matrix,
    grad_features: &Matrix,
) -> Result<Vec<Complex64>> {
    let k = vol.channels();
    let dims = vol.dims();
    if coords.cols != dims {
        return Err(dim_err(format!(
            "coordinates have {} columns, volume is {dims}-D",
            coords.cols
        )));
    }
    if grad_features.rows != coords.rows || grad_features.cols != k {
        return Err(dim_err(format!(
            "feature gradient is {}x{}, expected {}x{k}",
            grad_features.rows, grad_features.cols, coords.rows
        )));
    }
    let layout = *vol.layout();
    let lattice = transform.lattice_for(vol)?;
    let reduced = layout.reduced_size();
    let plane = layout.factor_plane_len();
    let m = dims - 1;
    let points = lattice.pow(m as u32);
    let plans = Plans::new(lattice);

    let rows = coords.rows;
    let parts = rows.div_ceil(PARTITION).clamp(1, MAX_PARTITIONS);
    let per_part = rows.div_ceil(parts);

    let mut grads = vec![Complex64::new(0.0, 0.0); vol.coefficients().len()];
    for a in 0..dims {
        let axes = other_axes(dims, a);
        // Partial scatter buffers over fixed sample ranges, summed in order so
        // the result does not depend on the thread count.
        let partials: Vec<Vec<Complex64>> = (0..parts)
            .into_par_iter()
            .map(|p| {
                let mut buf = vec![Complex64::new(0.0, 0.0); points * k * reduced];
                let mut phasors = vec![Complex64::new(0.0, 0.0); reduced];
                let end = ((p + 1) * per_part).min(rows);
                for s in p * per_part..end {
                    let x = coords.row(s);
                    reduced_phasors(&layout, wrap_unit(x[a]), &mut phasors);
                    let st = corners(x, &axes, lattice);
                    let g = grad_features.row(s);
                    for (c, &gc) in g.iter().enumerate() {
                        if gc == 0.0 {
                            continue;
                        }
                        for j in 0..st.count {
                            let w = st.w[j] * gc;
                            let base = (st.idx[j] * k + c) * reduced;
                            for (slot, e) in buf[base..base + reduced].iter_mut().zip(&phasors) {
                                *slot += e.conj() * w;
                            }
                        }
                    }
                }
                buf
            })
            .collect();
        let mut map_grad = partials[0].clone();
        for part in &partials[1..] {
            for (acc, v) in map_grad.iter_mut().zip(part) {
                *acc += v;
            }
        }

        let geometry = plane_geometry(&layout, a, lattice);
        let factor_base = a * k * plane;
        let mut line = vec![Complex64::new(0.0, 0.0); points];
        for c in 0..k {
            for d in 0..reduced {
                for (pt, slot) in line.iter_mut().enumerate() {
                    *slot = map_grad[(pt * k + c) * reduced + d];
                }
                plans.forward_nd(&mut line, m);
                for (i, &(di, pos)) in geometry.iter().enumerate() {
                    if di == d {
                        grads[factor_base + c * plane + i] = line[pos];
                    }
                }
            }
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::{FrequencyLayout, InitMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let l = FrequencyLayout::new(2, 8, 3).unwrap();
        let v = PhasorVolume::new(l, 2, InitMode::Zero).unwrap();
        let coords = Matrix::from_rows(&[vec![0.1, 0.2], vec![0.7, 0.4]]).unwrap();
        let g = backprop_to_volume(&FastTransform::new(), &v, &coords, &Matrix::zeros(2, 2)).unwrap();
        assert!(g.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn single_frequency_gradient_is_the_cosine() {
        let l = FrequencyLayout::new(2, 8, 3).unwrap();
        let v = PhasorVolume::new(l, 1, InitMode::Zero).unwrap();
        // on-lattice along y so interpolation is exact
        let (x, y) = (0.37, 3.0 / 8.0);
        let coords = Matrix::from_rows(&[vec![x, y]]).unwrap();
        let g = backprop_to_volume(&FastTransform::new(), &v, &coords, &Matrix::from_vec(1, 1, vec![1.0]).unwrap())
            .unwrap();
        let freqs = l.factor_frequencies(0);
        for (i, f) in freqs.iter().enumerate() {
            let phase = 2.0 * PI * (f[0] as f64 * x + f[1] as f64 * y);
            assert!((g[i].re - phase.cos()).abs() < 1e-12);
            assert!((g[i].im + phase.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn dot_product_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dims in [2, 3] {
            let l = FrequencyLayout::new(dims, 8, 3).unwrap();
            let mut v = PhasorVolume::new(l, 2, InitMode::Zero).unwrap();
            for z in v.coefficients_mut() {
                *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            let coords = Matrix::from_vec(50, dims, (0..50 * dims).map(|_| rng.gen()).collect()).unwrap();
            let g = Matrix::from_vec(50, 2, (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let mut t = FastTransform::new();
            // the transform is linear, so J * delta = eval(delta)
            let jd = t.eval(&v, &coords).unwrap();
            let lhs: f64 = jd.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
            let jt = backprop_to_volume(&t, &v, &coords, &g).unwrap();
            let rhs: f64 = jt
                .iter()
                .zip(v.coefficients())
                .map(|(gz, dz)| gz.re * dz.re + gz.im * dz.im)
                .sum();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }
}
