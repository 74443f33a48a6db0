//! Evaluation of the continuous embedding field defined by a phasor volume.
//!
//! Two routes produce the same field: [`eval_exact`] sums every stored complex
//! exponential per sample, while [`FastTransform`] runs an FFT over each
//! factor's full axes once per volume revision, interpolates the resulting
//! intermediate map, and integrates the few reduced-axis frequencies per
//! sample. Both take the real part of the summed factors.

mod energy;
mod exact;
mod fast;

use std::f64::consts::PI;

use num_complex::Complex64;

pub use energy::{factor_spectral_energy, spatial_energy, spatial_energy_of_factor, spectral_energy};
pub use exact::{eval_exact, eval_exact_complex, eval_exact_derivative};
pub use fast::{eval_derivative, eval_fast, FastTransform, IntermediateMap};
pub(crate) use fast::corners;

pub(crate) mod fast_internals {
    pub(crate) use super::fast::{other_axes, plane_geometry, reduced_phasors};
}

use crate::error::{dim_err, PrefError, Result};
use crate::linalg::Matrix;
use crate::phasor::PhasorVolume;

/// Spatial derivative selector: `d^order / dx_axis^order`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Derivative {
    pub axis: usize,
    pub order: u32,
}

impl Derivative {
    pub fn new(axis: usize, order: u32) -> Result<Self> {
        if order != 1 && order != 2 {
            return Err(PrefError::Domain(format!(
                "derivative order must be 1 or 2, got {order}"
            )));
        }
        Ok(Self { axis, order })
    }

    /// Spectral multiplier `(j 2 pi f)^order` for frequency `f` on the selected axis.
    #[inline]
    pub fn multiplier(&self, freq_on_axis: i64) -> Complex64 {
        let w = Complex64::new(0.0, 2.0 * PI * freq_on_axis as f64);
        w.powu(self.order)
    }
}

/// Coordinates paired with the features evaluated at them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    pub coords: Matrix,
    pub features: Matrix,
}

impl FeatureBatch {
    pub fn new(coords: Matrix, features: Matrix) -> Result<Self> {
        if coords.rows == 0 || coords.rows != features.rows {
            return Err(dim_err(format!(
                "batch has {} coordinates and {} feature rows",
                coords.rows, features.rows
            )));
        }
        Ok(Self { coords, features })
    }

    pub fn len(&self) -> usize {
        self.coords.rows
    }

    pub fn is_empty(&self) -> bool {
        self.coords.rows == 0
    }
}

/// Wrap a coordinate into `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let w = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

pub(crate) fn check_coords(vol: &PhasorVolume, coords: &Matrix) -> Result<()> {
    if coords.cols != vol.dims() {
        return Err(dim_err(format!(
            "coordinates have {} columns, volume is {}-D",
            coords.cols,
            vol.dims()
        )));
    }
    Ok(())
}

pub(crate) fn check_derivative(vol: &PhasorVolume, d: Option<Derivative>) -> Result<()> {
    if let Some(d) = d {
        if d.axis >= vol.dims() {
            return Err(dim_err(format!(
                "derivative axis {} out of range for {}-D volume",
                d.axis,
                vol.dims()
            )));
        }
        if d.order != 1 && d.order != 2 {
            return Err(PrefError::Domain(format!("unsupported derivative order {}", d.order)));
        }
    }
    Ok(())
}

/// Real part of a row-major `[B, k]` complex buffer.
pub(crate) fn real_part(values: &[Complex64], rows: usize, cols: usize) -> Matrix {
    Matrix {
        rows,
        cols,
        data: values.iter().map(|z| z.re).collect(),
    }
}
