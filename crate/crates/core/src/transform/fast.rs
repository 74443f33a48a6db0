use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{check_coords, check_derivative, real_part, wrap_unit, Derivative};
use crate::error::{dim_err, Result};
use crate::fft::Plans;
use crate::linalg::Matrix;
use crate::phasor::{FrequencyLayout, PhasorVolume};

/// One factor's coefficients transformed over every full axis onto a regular
/// lattice, keeping the reduced axis in frequency form.
///
/// Entries are stored `[lattice point][channel][reduced index]` so the corner
/// reads of one sample touch contiguous memory.
#[derive(Debug, Clone)]
pub struct IntermediateMap {
    factor: usize,
    lattice: usize,
    other_axes: Vec<usize>,
    channels: usize,
    reduced: usize,
    data: Vec<Complex64>,
}

impl IntermediateMap {
    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn lattice(&self) -> usize {
        self.lattice
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    fn entry(&self, point: usize, channel: usize) -> &[Complex64] {
        let base = (point * self.channels + channel) * self.reduced;
        &self.data[base..base + self.reduced]
    }
}

/// Interpolation stencil over the full axes of one factor.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Corners {
    pub idx: [usize; 4],
    pub w: [f64; 4],
    pub count: usize,
}

/// Periodic multilinear stencil of the point `x` on an `L^m` lattice spanned by
/// `axes` (m is 1 or 2).
#[inline]
pub(crate) fn corners(x: &[f64], axes: &[usize], lattice: usize) -> Corners {
    let mut lo = [0usize; 2];
    let mut hi = [0usize; 2];
    let mut frac = [0.0f64; 2];
    for (j, &b) in axes.iter().enumerate() {
        let t = wrap_unit(x[b]) * lattice as f64;
        let fl = t.floor();
        let i0 = (fl as usize) % lattice;
        lo[j] = i0;
        hi[j] = (i0 + 1) % lattice;
        frac[j] = t - fl;
    }
    match axes.len() {
        1 => Corners {
            idx: [lo[0], hi[0], 0, 0],
            w: [1.0 - frac[0], frac[0], 0.0, 0.0],
            count: 2,
        },
        2 => {
            let (u, v) = (frac[0], frac[1]);
            Corners {
                idx: [
                    lo[0] * lattice + lo[1],
                    lo[0] * lattice + hi[1],
                    hi[0] * lattice + lo[1],
                    hi[0] * lattice + hi[1],
                ],
                w: [(1.0 - u) * (1.0 - v), (1.0 - u) * v, u * (1.0 - v), u * v],
                count: 4,
            }
        }
        m => unreachable!("unsupported interpolation rank {m}"),
    }
}

/// Position of every plane entry of factor `a`: (reduced index, lattice point).
pub(crate) fn plane_geometry(layout: &FrequencyLayout, a: usize, lattice: usize) -> Vec<(usize, usize)> {
    let dims = layout.dims();
    layout
        .factor_frequencies(a)
        .iter()
        .map(|f| {
            let d = if f[a] == 0 {
                0
            } else {
                f[a].trailing_zeros() as usize + 1
            };
            let mut pos = 0usize;
            for b in (0..dims).filter(|&b| b != a) {
                pos = pos * lattice + f[b].rem_euclid(lattice as i64) as usize;
            }
            (d, pos)
        })
        .collect()
}

pub(crate) fn other_axes(dims: usize, a: usize) -> Vec<usize> {
    (0..dims).filter(|&b| b != a).collect()
}

/// Per-sample reduced-axis phasors `exp(j 2 pi r_d x)`.
#[inline]
pub(crate) fn reduced_phasors(layout: &FrequencyLayout, x: f64, out: &mut [Complex64]) {
    for (d, e) in out.iter_mut().enumerate() {
        *e = Complex64::from_polar(1.0, 2.0 * PI * layout.reduced_freq(d) as f64 * x);
    }
}

fn build_maps(
    vol: &PhasorVolume,
    lattice: usize,
    deriv: Option<Derivative>,
    plans: &Plans,
) -> Vec<IntermediateMap> {
    let layout = *vol.layout();
    let dims = layout.dims();
    let k = vol.channels();
    let reduced = layout.reduced_size();
    let plane = layout.factor_plane_len();
    let m = dims - 1;
    let points = lattice.pow(m as u32);

    (0..dims)
        .map(|a| {
            let geometry = plane_geometry(&layout, a, lattice);
            let freqs = deriv.map(|_| layout.factor_frequencies(a));
            let coeffs = vol.factor(a);
            let mut data = vec![Complex64::new(0.0, 0.0); points * k * reduced];
            let mut buf = vec![Complex64::new(0.0, 0.0); points];
            for c in 0..k {
                for d in 0..reduced {
                    buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                    for (i, &(di, pos)) in geometry.iter().enumerate() {
                        if di != d {
                            continue;
                        }
                        let mut z = coeffs[c * plane + i];
                        if let (Some(dv), Some(fs)) = (deriv, &freqs) {
                            z *= dv.multiplier(fs[i][dv.axis]);
                        }
                        buf[pos] = z;
                    }
                    plans.inverse_nd(&mut buf, m);
                    for (p, z) in buf.iter().enumerate() {
                        data[(p * k + c) * reduced + d] = *z;
                    }
                }
            }
            IntermediateMap {
                factor: a,
                lattice,
                other_axes: other_axes(dims, a),
                channels: k,
                reduced,
                data,
            }
        })
        .collect()
}

fn integrate(vol: &PhasorVolume, maps: &[IntermediateMap], coords: &Matrix) -> Vec<Complex64> {
    let layout = *vol.layout();
    let k = vol.channels();
    let reduced = layout.reduced_size();
    let mut out = vec![Complex64::new(0.0, 0.0); coords.rows * k];
    out.par_chunks_mut(k).enumerate().for_each(|(s, row)| {
        let x = coords.row(s);
        let mut phasors = vec![Complex64::new(0.0, 0.0); reduced];
        for map in maps {
            reduced_phasors(&layout, wrap_unit(x[map.factor]), &mut phasors);
            let st = corners(x, &map.other_axes, map.lattice);
            for (c, acc) in row.iter_mut().enumerate() {
                let mut sum = Complex64::new(0.0, 0.0);
                for j in 0..st.count {
                    let w = st.w[j];
                    let entry = map.entry(st.idx[j], c);
                    let mut partial = Complex64::new(0.0, 0.0);
                    for (e, v) in phasors.iter().zip(entry) {
                        partial += e * v;
                    }
                    sum += partial * w;
                }
                *acc += sum;
            }
        }
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LatticeSpec {
    Oversample(usize),
    Fixed(usize),
}

/// Fast evaluator with a per-revision cache of intermediate maps.
///
/// The FFT work is done once per volume revision and shared by every sample
/// of every batch evaluated against that revision.
pub struct FastTransform {
    spec: LatticeSpec,
    plans: Option<Plans>,
    cache: Option<(u64, Vec<IntermediateMap>)>,
}

impl std::fmt::Debug for FastTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FastTransform")
            .field("spec", &self.spec)
            .field("cached_revision", &self.cached_revision())
            .finish()
    }
}

impl Default for FastTransform {
    fn default() -> Self {
        Self::new()
    }
}

impl Clone for FastTransform {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec,
            plans: None,
            cache: self.cache.clone(),
        }
    }
}

impl FastTransform {
    /// Lattice equal to the volume resolution.
    pub fn new() -> Self {
        Self::with_oversample(1)
    }

    /// Lattice of `factor * N` points per full axis (zero-padded spectrum).
    pub fn with_oversample(factor: usize) -> Self {
        Self {
            spec: LatticeSpec::Oversample(factor.max(1)),
            plans: None,
            cache: None,
        }
    }

    /// Explicit lattice size; must be at least the volume resolution.
    pub fn with_lattice(lattice: usize) -> Self {
        Self {
            spec: LatticeSpec::Fixed(lattice),
            plans: None,
            cache: None,
        }
    }

    pub fn lattice_for(&self, vol: &PhasorVolume) -> Result<usize> {
        let n = vol.layout().resolution();
        let l = match self.spec {
            LatticeSpec::Oversample(s) => s * n,
            LatticeSpec::Fixed(l) => l,
        };
        if l < n {
            return Err(dim_err(format!("lattice {l} is coarser than resolution {n}")));
        }
        Ok(l)
    }

    /// Revision of the volume whose maps are cached, if any.
    pub fn cached_revision(&self) -> Option<u64> {
        self.cache.as_ref().map(|(r, _)| *r)
    }

    pub fn invalidate(&mut self) {
        self.cache = None;
    }

    fn plans(&mut self, lattice: usize) -> &Plans {
        if self.plans.as_ref().map(Plans::len) != Some(lattice) {
            self.plans = Some(Plans::new(lattice));
        }
        self.plans.as_ref().unwrap()
    }

    /// Intermediate maps for `vol`, rebuilt only if its revision changed.
    pub fn maps(&mut self, vol: &PhasorVolume) -> Result<&[IntermediateMap]> {
        let lattice = self.lattice_for(vol)?;
        let stale = match &self.cache {
            Some((rev, maps)) => *rev != vol.revision() || maps.first().map(|m| m.lattice) != Some(lattice),
            None => true,
        };
        if stale {
            let maps = build_maps(vol, lattice, None, self.plans(lattice));
            self.cache = Some((vol.revision(), maps));
        }
        Ok(&self.cache.as_ref().unwrap().1)
    }

    pub fn eval(&mut self, vol: &PhasorVolume, coords: &Matrix) -> Result<Matrix> {
        let z = self.eval_complex(vol, coords, None)?;
        Ok(real_part(&z, coords.rows, vol.channels()))
    }

    pub fn eval_derivative(
        &mut self,
        vol: &PhasorVolume,
        coords: &Matrix,
        deriv: Derivative,
    ) -> Result<Matrix> {
        let z = self.eval_complex(vol, coords, Some(deriv))?;
        Ok(real_part(&z, coords.rows, vol.channels()))
    }

    /// Complex factor sum before taking the real part, row-major `[B, k]`.
    pub fn eval_complex(
        &mut self,
        vol: &PhasorVolume,
        coords: &Matrix,
        deriv: Option<Derivative>,
    ) -> Result<Vec<Complex64>> {
        check_coords(vol, coords)?;
        check_derivative(vol, deriv)?;
        match deriv {
            None => {
                self.maps(vol)?;
                let maps = &self.cache.as_ref().unwrap().1;
                Ok(integrate(vol, maps, coords))
            }
            Some(d) => {
                let lattice = self.lattice_for(vol)?;
                let maps = build_maps(vol, lattice, Some(d), self.plans(lattice));
                Ok(integrate(vol, &maps, coords))
            }
        }
    }
}

/// One-shot fast evaluation at the volume's own resolution.
pub fn eval_fast(vol: &PhasorVolume, coords: &Matrix) -> Result<Matrix> {
    FastTransform::new().eval(vol, coords)
}

/// One-shot analytic derivative through the fast path.
pub fn eval_derivative(
    vol: &PhasorVolume,
    coords: &Matrix,
    axis: usize,
    order: u32,
) -> Result<Matrix> {
    let d = Derivative::new(axis, order)?;
    FastTransform::new().eval_derivative(vol, coords, d)
}
