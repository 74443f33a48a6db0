//! Coordinate encoders trained jointly with the decoder head.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::diff::backprop_to_volume;
use crate::error::{dim_err, Result};
use crate::linalg::Matrix;
use crate::phasor::PhasorVolume;
use crate::train::{parseval_reg, UnlockSchedule};
use crate::transform::FastTransform;

/// A trainable map from unit-domain coordinates to feature vectors.
pub trait Encoder {
    fn dims(&self) -> usize;
    fn channels(&self) -> usize;
    fn param_count(&self) -> usize;

    /// Features for every coordinate row, `[B, channels]`.
    fn encode(&mut self, coords: &Matrix) -> Result<Matrix>;

    /// Gradient of `sum(features * grad_features)` over the flat parameters.
    fn backward(&mut self, coords: &Matrix, grad_features: &Matrix) -> Result<Vec<f64>>;

    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    /// Per-parameter lock flags under a frequency limit; `None` if the
    /// encoder has no notion of frequency.
    fn locked_params(&self, _max_frequency: usize) -> Option<Vec<bool>> {
        None
    }

    /// Spectral smoothness penalty and its gradient, if supported.
    fn regularizer(&self) -> Option<(f64, Vec<f64>)> {
        None
    }
}

/// Phasor volume with its fast evaluator.
#[derive(Debug, Clone)]
pub struct PrefEncoder {
    pub volume: PhasorVolume,
    transform: FastTransform,
}

impl PrefEncoder {
    pub fn new(volume: PhasorVolume) -> Self {
        Self {
            volume,
            transform: FastTransform::new(),
        }
    }

    pub fn with_transform(volume: PhasorVolume, transform: FastTransform) -> Self {
        Self { volume, transform }
    }

    pub fn transform(&self) -> &FastTransform {
        &self.transform
    }

    pub fn into_volume(self) -> PhasorVolume {
        self.volume
    }
}

fn complex_to_reals(v: Vec<Complex64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() * 2);
    for z in v {
        out.push(z.re);
        out.push(z.im);
    }
    out
}

impl Encoder for PrefEncoder {
    fn dims(&self) -> usize {
        self.volume.dims()
    }

    fn channels(&self) -> usize {
        self.volume.channels()
    }

    fn param_count(&self) -> usize {
        self.volume.param_count()
    }

    fn encode(&mut self, coords: &Matrix) -> Result<Matrix> {
        self.transform.eval(&self.volume, coords)
    }

    fn backward(&mut self, coords: &Matrix, grad_features: &Matrix) -> Result<Vec<f64>> {
        let g = backprop_to_volume(&self.transform, &self.volume, coords, grad_features)?;
        Ok(complex_to_reals(g))
    }

    fn params(&self) -> &[f64] {
        self.volume.as_reals()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.volume.as_reals_mut()
    }

    fn locked_params(&self, max_frequency: usize) -> Option<Vec<bool>> {
        let dims = self.volume.dims();
        let mut locked = Vec::with_capacity(self.volume.param_count());
        self.volume.for_each(|_, f, _| {
            let l = !UnlockSchedule::admits(max_frequency, &f[..dims]);
            locked.push(l);
            locked.push(l);
        });
        Some(locked)
    }

    fn regularizer(&self) -> Option<(f64, Vec<f64>)> {
        let (r, g) = parseval_reg(&self.volume);
        Some((r, complex_to_reals(g)))
    }
}

/// Real-valued feature grid with multilinear interpolation (baseline).
///
/// Grid vertices sit at `i / (res - 1)` on each axis; coordinates are clamped
/// to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGridEncoder {
    dims: usize,
    resolution: usize,
    channels: usize,
    /// `[vertex][channel]`, vertices row-major.
    data: Vec<f64>,
}

impl DenseGridEncoder {
    pub fn zeros(dims: usize, resolution: usize, channels: usize) -> Result<Self> {
        if !(2..=3).contains(&dims) || resolution < 2 || channels == 0 {
            return Err(dim_err(format!(
                "invalid dense grid {dims}-D res {resolution} channels {channels}"
            )));
        }
        Ok(Self {
            dims,
            resolution,
            channels,
            data: vec![0.0; resolution.pow(dims as u32) * channels],
        })
    }

    pub fn from_data(dims: usize, resolution: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        let mut g = Self::zeros(dims, resolution, channels)?;
        if data.len() != g.data.len() {
            return Err(dim_err("dense grid data length mismatch"));
        }
        g.data = data;
        Ok(g)
    }

    /// Grid with independent normal vertex features.
    pub fn random<R: Rng>(
        dims: usize,
        resolution: usize,
        channels: usize,
        feature_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut g = Self::zeros(dims, resolution, channels)?;
        let normal = Normal::new(0.0, feature_std).map_err(|e| dim_err(e.to_string()))?;
        for v in &mut g.data {
            *v = normal.sample(rng);
        }
        Ok(g)
    }

    /// Resolution whose parameter count is closest to `target`.
    pub fn matched_resolution(target: usize, dims: usize, channels: usize) -> usize {
        let mut best = 2;
        let mut best_err = f64::INFINITY;
        for r in 2..=4096usize {
            let count = (r.pow(dims as u32) * channels) as f64;
            let err = (count - target as f64).abs();
            if err < best_err {
                best = r;
                best_err = err;
            }
            if count > 2.0 * target as f64 {
                break;
            }
        }
        best
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Vertex indices and weights of the cell containing `x`.
    fn stencil(&self, x: &[f64]) -> ([usize; 8], [f64; 8], usize) {
        let r = self.resolution;
        let mut lo = [0usize; 3];
        let mut t = [0.0f64; 3];
        for a in 0..self.dims {
            let s = x[a].clamp(0.0, 1.0) * (r - 1) as f64;
            let i = (s.floor() as usize).min(r - 2);
            lo[a] = i;
            t[a] = s - i as f64;
        }
        let count = 1usize << self.dims;
        let mut idx = [0usize; 8];
        let mut w = [0.0f64; 8];
        for corner in 0..count {
            let mut flat = 0usize;
            let mut weight = 1.0;
            for a in 0..self.dims {
                let bit = (corner >> (self.dims - 1 - a)) & 1;
                flat = flat * r + lo[a] + bit;
                weight *= if bit == 1 { t[a] } else { 1.0 - t[a] };
            }
            idx[corner] = flat;
            w[corner] = weight;
        }
        (idx, w, count)
    }
}

impl Encoder for DenseGridEncoder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn param_count(&self) -> usize {
        self.data.len()
    }

    fn encode(&mut self, coords: &Matrix) -> Result<Matrix> {
        if coords.cols != self.dims {
            return Err(dim_err("coordinate width does not match grid"));
        }
        let k = self.channels;
        let mut out = Matrix::zeros(coords.rows, k);
        out.data.par_chunks_mut(k).enumerate().for_each(|(s, row)| {
            let (idx, w, count) = self.stencil(coords.row(s));
            for j in 0..count {
                let v = &self.data[idx[j] * k..(idx[j] + 1) * k];
                for (o, x) in row.iter_mut().zip(v) {
                    *o += w[j] * x;
                }
            }
        });
        Ok(out)
    }

    fn backward(&mut self, coords: &Matrix, grad_features: &Matrix) -> Result<Vec<f64>> {
        if grad_features.rows != coords.rows || grad_features.cols != self.channels {
            return Err(dim_err("feature gradient shape mismatch"));
        }
        let k = self.channels;
        let mut g = vec![0.0; self.data.len()];
        for s in 0..coords.rows {
            let (idx, w, count) = self.stencil(coords.row(s));
            let gf = grad_features.row(s);
            for j in 0..count {
                for (o, x) in g[idx[j] * k..(idx[j] + 1) * k].iter_mut().zip(gf) {
                    *o += w[j] * x;
                }
            }
        }
        Ok(g)
    }

    fn params(&self) -> &[f64] {
        &self.data
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Either encoder, for code paths that pick one at run time.
#[derive(Debug, Clone)]
pub enum AnyEncoder {
    Pref(PrefEncoder),
    DenseGrid(DenseGridEncoder),
}

macro_rules! delegate {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            AnyEncoder::Pref($e) => $body,
            AnyEncoder::DenseGrid($e) => $body,
        }
    };
}

impl Encoder for AnyEncoder {
    fn dims(&self) -> usize {
        delegate!(self, e => e.dims())
    }
    fn channels(&self) -> usize {
        delegate!(self, e => e.channels())
    }
    fn param_count(&self) -> usize {
        delegate!(self, e => e.param_count())
    }
    fn encode(&mut self, coords: &Matrix) -> Result<Matrix> {
        delegate!(self, e => e.encode(coords))
    }
    fn backward(&mut self, coords: &Matrix, grad_features: &Matrix) -> Result<Vec<f64>> {
        delegate!(self, e => e.backward(coords, grad_features))
    }
    fn params(&self) -> &[f64] {
        delegate!(self, e => e.params())
    }
    fn params_mut(&mut self) -> &mut [f64] {
        delegate!(self, e => e.params_mut())
    }
    fn locked_params(&self, max_frequency: usize) -> Option<Vec<bool>> {
        delegate!(self, e => e.locked_params(max_frequency))
    }
    fn regularizer(&self) -> Option<(f64, Vec<f64>)> {
        delegate!(self, e => e.regularizer())
    }
}
