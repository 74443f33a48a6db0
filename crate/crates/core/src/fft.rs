//! Multi-dimensional FFT helpers over row-major complex buffers.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Cached plans for one transform length.
pub(crate) struct Plans {
    inverse: Arc<dyn Fft<f64>>,
    len: usize,
}

impl Plans {
    pub(crate) fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    /// Unnormalized inverse transform (`exp(+j...)`) along every axis of a cube
    /// of side `self.len` with `ndim` axes.
    pub(crate) fn inverse_nd(&self, buf: &mut [Complex64], ndim: usize) {
        apply_along_axes(buf, self.len, ndim, |line| self.inverse.process(line));
    }

    /// Unnormalized forward transform (`exp(-j...)`), computed by conjugating
    /// around the inverse kernel.
    pub(crate) fn forward_nd(&self, buf: &mut [Complex64], ndim: usize) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.inverse_nd(buf, ndim);
        for v in buf.iter_mut() {
            *v = v.conj();
        }
    }
}

fn apply_along_axes<F>(buf: &mut [Complex64], len: usize, ndim: usize, mut kernel: F)
where
    F: FnMut(&mut [Complex64]),
{
    debug_assert_eq!(buf.len(), len.pow(ndim as u32));
    if ndim == 0 {
        return;
    }
    let mut line = vec![Complex64::new(0.0, 0.0); len];
    for axis in 0..ndim {
        // stride of `axis` in row-major order
        let stride = len.pow((ndim - 1 - axis) as u32);
        if stride == 1 {
            for chunk in buf.chunks_exact_mut(len) {
                kernel(chunk);
            }
            continue;
        }
        let block = stride * len;
        for outer in (0..buf.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = buf[base + t * stride];
                }
                kernel(&mut line);
                for (t, v) in line.iter().enumerate() {
                    buf[base + t * stride] = *v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn inverse_2d_matches_direct_sum() {
        let n = 6;
        let data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.3).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let mut buf = data.clone();
        Plans::new(n).inverse_nd(&mut buf, 2);
        for x in 0..n {
            for y in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for u in 0..n {
                    for v in 0..n {
                        let ph = 2.0 * PI * ((u * x + v * y) as f64) / n as f64;
                        acc += data[u * n + v] * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((acc - buf[x * n + y]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn forward_then_inverse_scales_by_volume() {
        let n = 4;
        let data: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new(i as f64, -(i as f64) * 0.5))
            .collect();
        let mut buf = data.clone();
        let plans = Plans::new(n);
        plans.forward_nd(&mut buf, 3);
        plans.inverse_nd(&mut buf, 3);
        let scale = (n * n * n) as f64;
        for (a, b) in buf.iter().zip(&data) {
            assert!((a / scale - b).norm() < 1e-10);
        }
    }
}
