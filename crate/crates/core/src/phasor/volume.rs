use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::layout::{FreqVec, FrequencyLayout};
use crate::error::{dim_err, PrefError, Result};
use crate::fft::Plans;

static NEXT_REVISION: AtomicU64 = AtomicU64::new(1);

fn fresh_revision() -> u64 {
    NEXT_REVISION.fetch_add(1, Ordering::Relaxed)
}

/// Real samples of a field on the regular lattice `j / N` of the unit domain.
///
/// Values are row-major `[channel][axis 0][axis 1]...`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub dims: usize,
    pub resolution: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl FieldGrid {
    /// Sample `f` at every lattice point; `f` returns one value per channel.
    pub fn from_fn<F>(dims: usize, resolution: usize, channels: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let points = resolution.pow(dims as u32);
        let mut values = vec![0.0; points * channels];
        let mut x = vec![0.0; dims];
        for p in 0..points {
            let mut rem = p;
            for a in (0..dims).rev() {
                x[a] = (rem % resolution) as f64 / resolution as f64;
                rem /= resolution;
            }
            let v = f(&x);
            assert_eq!(v.len(), channels, "field closure returned wrong channel count");
            for (c, val) in v.into_iter().enumerate() {
                values[c * points + p] = val;
            }
        }
        Self {
            dims,
            resolution,
            channels,
            values,
        }
    }

    pub fn constant(dims: usize, resolution: usize, value: f64) -> Self {
        Self {
            dims,
            resolution,
            channels: 1,
            values: vec![value; resolution.pow(dims as u32)],
        }
    }
}

/// Phasor volume initialization.
#[derive(Debug, Clone)]
pub enum InitMode {
    Zero,
    /// Project a sampled target field onto the layout's frequencies.
    FromField(FieldGrid),
}

/// Factorized multi-channel complex coefficient volume.
///
/// Factor `a` keeps the log-sampled frequencies on axis `a` and the full signed
/// frequency range on every other axis. Coefficients of all factors live in
/// one contiguous buffer, factor-major then channel-major.
#[derive(Debug, Clone)]
pub struct PhasorVolume {
    layout: FrequencyLayout,
    channels: usize,
    coeffs: Vec<Complex64>,
    revision: u64,
}

impl PartialEq for PhasorVolume {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout && self.channels == other.channels && self.coeffs == other.coeffs
    }
}

impl PhasorVolume {
    pub fn new(layout: FrequencyLayout, channels: usize, init: InitMode) -> Result<Self> {
        if channels == 0 {
            return Err(PrefError::Layout("channel count must be >= 1".into()));
        }
        let len = layout.dims() * channels * layout.factor_plane_len();
        let mut vol = Self {
            layout,
            channels,
            coeffs: vec![Complex64::new(0.0, 0.0); len],
            revision: fresh_revision(),
        };
        if let InitMode::FromField(grid) = init {
            vol.project_field(&grid)?;
        }
        Ok(vol)
    }

    /// Random coefficients scaled so each feature channel has roughly
    /// `feature_std` standard deviation over the domain.
    pub fn random<R: Rng>(
        layout: FrequencyLayout,
        channels: usize,
        feature_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut vol = Self::new(layout, channels, InitMode::Zero)?;
        let terms = (vol.layout.dims() * vol.layout.factor_plane_len()) as f64;
        let normal = Normal::new(0.0, feature_std / terms.sqrt())
            .map_err(|e| PrefError::Domain(e.to_string()))?;
        for z in vol.coeffs.iter_mut() {
            *z = Complex64::new(normal.sample(rng), normal.sample(rng));
        }
        Ok(vol)
    }

    /// Build a volume from raw coefficients (e.g. when loading a checkpoint).
    pub fn from_coefficients(
        layout: FrequencyLayout,
        channels: usize,
        coeffs: Vec<Complex64>,
    ) -> Result<Self> {
        let expected = layout.dims() * channels * layout.factor_plane_len();
        if coeffs.len() != expected || channels == 0 {
            return Err(dim_err(format!(
                "expected {expected} coefficients for layout, got {}",
                coeffs.len()
            )));
        }
        Ok(Self {
            layout,
            channels,
            coeffs,
            revision: fresh_revision(),
        })
    }

    pub fn layout(&self) -> &FrequencyLayout {
        &self.layout
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> usize {
        self.layout.dims()
    }

    /// Identifier that changes whenever the coefficients may have changed.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn factor_len(&self) -> usize {
        self.channels * self.layout.factor_plane_len()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Mutable access to every coefficient; invalidates cached transforms.
    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        self.revision = fresh_revision();
        &mut self.coeffs
    }

    pub fn factor(&self, a: usize) -> &[Complex64] {
        let len = self.factor_len();
        &self.coeffs[a * len..(a + 1) * len]
    }

    pub fn factor_mut(&mut self, a: usize) -> &mut [Complex64] {
        let len = self.factor_len();
        self.revision = fresh_revision();
        &mut self.coeffs[a * len..(a + 1) * len]
    }

    /// Coefficients viewed as interleaved `(re, im)` reals.
    pub fn as_reals(&self) -> &[f64] {
        bytemuck::cast_slice(&self.coeffs)
    }

    pub fn as_reals_mut(&mut self) -> &mut [f64] {
        self.revision = fresh_revision();
        bytemuck::cast_slice_mut(&mut self.coeffs)
    }

    /// Number of real parameters (two per complex coefficient).
    pub fn param_count(&self) -> usize {
        2 * self.coeffs.len()
    }

    pub fn all_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Visit every coefficient with its factor index and frequency vector.
    pub fn for_each<F>(&self, mut f: F)
    where
        F: FnMut(usize, &FreqVec, Complex64),
    {
        let plane = self.layout.factor_plane_len();
        for a in 0..self.dims() {
            let freqs = self.layout.factor_frequencies(a);
            for (c, chunk) in self.factor(a).chunks_exact(plane).enumerate() {
                let _ = c;
                for (fv, &z) in freqs.iter().zip(chunk) {
                    f(a, fv, z);
                }
            }
        }
    }

    /// Mutate every coefficient given its factor index and frequency vector.
    pub fn map_coefficients<F>(&mut self, mut f: F)
    where
        F: FnMut(usize, &FreqVec, Complex64) -> Complex64,
    {
        let plane = self.layout.factor_plane_len();
        let dims = self.dims();
        let per_factor: Vec<Vec<FreqVec>> =
            (0..dims).map(|a| self.layout.factor_frequencies(a)).collect();
        let len = self.factor_len();
        for (i, z) in self.coefficients_mut().iter_mut().enumerate() {
            let a = i / len;
            let fv = &per_factor[a][(i % len) % plane];
            *z = f(a, fv, *z);
        }
    }

    /// `alpha * self + beta * other`, coefficient-wise.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.layout != other.layout || self.channels != other.channels {
            return Err(dim_err("volumes have different layouts"));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * alpha + b * beta)
            .collect();
        Self::from_coefficients(self.layout, self.channels, coeffs)
    }

    fn project_field(&mut self, grid: &FieldGrid) -> Result<()> {
        let n = self.layout.resolution();
        let dims = self.dims();
        if grid.dims != dims || grid.resolution != n {
            return Err(dim_err(format!(
                "field grid is {}-D at resolution {}, layout is {dims}-D at resolution {n}",
                grid.dims, grid.resolution
            )));
        }
        if grid.channels != 1 && grid.channels != self.channels {
            return Err(dim_err(format!(
                "field grid has {} channels, volume has {}",
                grid.channels, self.channels
            )));
        }
        let points = n.pow(dims as u32);
        if grid.values.len() != points * grid.channels {
            return Err(dim_err("field grid value count does not match its shape"));
        }

        // A frequency may be stored by several factors, and its conjugate
        // partner may or may not be stored. Weight each stored copy so the
        // real part of the factor sum reproduces the band-limited projection.
        let mut multiplicity: HashMap<FreqVec, u32> = HashMap::new();
        let per_factor: Vec<Vec<FreqVec>> =
            (0..dims).map(|a| self.layout.factor_frequencies(a)).collect();
        for freqs in &per_factor {
            for f in freqs {
                *multiplicity.entry(*f).or_insert(0) += 1;
            }
        }

        let plans = Plans::new(n);
        let scale = 1.0 / points as f64;
        let spectra: Vec<Vec<Complex64>> = (0..grid.channels)
            .map(|c| {
                let mut buf: Vec<Complex64> = grid.values[c * points..(c + 1) * points]
                    .iter()
                    .map(|&v| Complex64::new(v, 0.0))
                    .collect();
                plans.forward_nd(&mut buf, dims);
                buf.iter_mut().for_each(|z| *z *= scale);
                buf
            })
            .collect();

        let layout = self.layout;
        let spectrum_index = |f: &FreqVec| -> usize {
            let mut idx = 0usize;
            for &v in f.iter().take(dims) {
                idx = idx * n + v.rem_euclid(n as i64) as usize;
            }
            idx
        };
        let weight = |f: &FreqVec| -> f64 {
            let own = multiplicity[f];
            let partner = multiplicity
                .get(&layout.negate_wrapped(f))
                .copied()
                .unwrap_or(0);
            2.0 / f64::from(own + partner)
        };

        let plane = layout.factor_plane_len();
        let channels = self.channels;
        let factor_len = self.factor_len();
        let coeffs = self.coefficients_mut();
        for a in 0..dims {
            for c in 0..channels {
                let spectrum = &spectra[if grid.channels == 1 { 0 } else { c }];
                let base = a * factor_len + c * plane;
                for (i, f) in per_factor[a].iter().enumerate() {
                    coeffs[base + i] = spectrum[spectrum_index(f)] * weight(f);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_volume_has_expected_size() {
        let l = FrequencyLayout::new(3, 16, 4).unwrap();
        let v = PhasorVolume::new(l, 16, InitMode::Zero).unwrap();
        assert_eq!(v.coefficients().len(), 3 * 16 * 4 * 16 * 16);
        assert!(v.coefficients().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn constant_field_populates_only_dc() {
        let l = FrequencyLayout::new(2, 8, 3).unwrap();
        let v = PhasorVolume::new(l, 1, InitMode::FromField(FieldGrid::constant(2, 8, 0.7)))
            .unwrap();
        v.for_each(|_, f, z| {
            if f.iter().all(|&x| x == 0) {
                assert!((z.re - 0.35).abs() < 1e-12 && z.im.abs() < 1e-12);
            } else {
                assert!(z.norm() < 1e-12);
            }
        });
    }

    #[test]
    fn grid_mismatch_is_a_dimension_error() {
        let l = FrequencyLayout::new(2, 8, 3).unwrap();
        let r = PhasorVolume::new(l, 1, InitMode::FromField(FieldGrid::constant(2, 16, 1.0)));
        assert!(matches!(r, Err(PrefError::Dimension(_))));
        assert!(PhasorVolume::new(l, 0, InitMode::Zero).is_err());
    }

    #[test]
    fn mutation_bumps_revision() {
        let l = FrequencyLayout::new(2, 8, 3).unwrap();
        let mut v = PhasorVolume::new(l, 2, InitMode::Zero).unwrap();
        let r0 = v.revision();
        v.coefficients_mut()[0] = Complex64::new(1.0, 0.0);
        assert_ne!(r0, v.revision());
        let clone = v.clone();
        assert_eq!(clone.revision(), v.revision());
    }
}
