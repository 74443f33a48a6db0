//! Oracle and invariant checks runnable from the library or the command line.
//!
//! Every check compares a library routine against an independent reference:
//! a direct sum over a zero-padded dense spectrum, finite differences,
//! lattice quadrature, or an algebraic identity. All inputs are seeded, so
//! the report is identical from run to run.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diff::backprop_to_volume;
use crate::encoder::{DenseGridEncoder, Encoder, PrefEncoder};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::mlp::{backward, forward, Activation, MlpParams};
use crate::phasor::{gaussian_filter, high_band_energy, FrequencyLayout, PhasorVolume};
use crate::train::{loss, parseval_axis_term, LossKind};
use crate::transform::{
    eval_exact, eval_exact_complex, spatial_energy, spectral_energy, Derivative, FastTransform,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Worst observed error (or the checked quantity).
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<32} measured={:.3e} tol={:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

pub fn random_volume(dims: usize, n: usize, d: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<PhasorVolume> {
    PhasorVolume::random(FrequencyLayout::new(dims, n, d)?, k, 1.0, rng)
}

/// Frequency of storage index `i` on an axis: log-sampled on the factor's own
/// axis, signed FFT order elsewhere.
fn oracle_freq(is_reduced: bool, i: usize, n: usize) -> i64 {
    if is_reduced {
        if i == 0 {
            0
        } else {
            1i64 << (i - 1)
        }
    } else if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Reference evaluation: zero-pad every factor into one dense spectrum and sum
/// the complex exponentials directly; returns the real part, `[B, k]`.
pub fn dense_idft(vol: &PhasorVolume, coords: &Matrix) -> Matrix {
    let dims = vol.dims();
    let n = vol.layout().resolution();
    let d = vol.layout().reduced_size();
    let k = vol.channels();
    let mut spectrum: Vec<Vec<([i64; 3], Complex64)>> = vec![Vec::new(); k];
    for a in 0..dims {
        let extents: Vec<usize> = (0..dims).map(|b| if b == a { d } else { n }).collect();
        let plane: usize = extents.iter().product();
        let coeffs = vol.factor(a);
        for (c, spec) in spectrum.iter_mut().enumerate() {
            for i in 0..plane {
                let mut rem = i;
                let mut f = [0i64; 3];
                for b in (0..dims).rev() {
                    f[b] = oracle_freq(b == a, rem % extents[b], n);
                    rem /= extents[b];
                }
                let z = coeffs[c * plane + i];
                match spec.iter_mut().find(|(g, _)| *g == f) {
                    Some(slot) => slot.1 += z,
                    None => spec.push((f, z)),
                }
            }
        }
    }
    let mut out = Matrix::zeros(coords.rows, k);
    for s in 0..coords.rows {
        let x = coords.row(s);
        for c in 0..k {
            let mut acc = 0.0;
            for (f, z) in &spectrum[c] {
                let phase: f64 = (0..dims).map(|b| f[b] as f64 * x[b]).sum();
                acc += (z * Complex64::from_polar(1.0, 2.0 * PI * phase)).re;
            }
            out.row_mut(s)[c] = acc;
        }
    }
    out
}

fn scaled_max_error(a: &Matrix, b: &Matrix) -> f64 {
    let scale = b.max_abs().max(1e-300);
    a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

fn random_coords(rows: usize, dims: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, dims);
    for v in &mut m.data {
        *v = rng.gen();
    }
    m
}

fn lattice_coords(rows: usize, dims: usize, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, dims);
    for v in &mut m.data {
        *v = rng.gen_range(0..n) as f64 / n as f64;
    }
    m
}

/// Fast transform, exact transform and dense oracle agree at lattice points.
pub fn transform_agreement(volumes: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for v in 0..volumes {
        let n: usize = [8, 16, 32][v % 3];
        let d = [2, 3, 4][(v / 3) % 3].min(n.trailing_zeros() as usize);
        let k = [1, 8][(v / 9) % 2];
        let dims = [2, 3][(v / 18) % 2];
        let vol = random_volume(dims, n, d, k, &mut rng)?;
        let x = lattice_coords(24, dims, n, &mut rng);
        let fast = FastTransform::new().eval(&vol, &x)?;
        let exact = eval_exact(&vol, &x)?;
        let oracle = dense_idft(&vol, &x);
        worst = worst
            .max(scaled_max_error(&fast, &exact))
            .max(scaled_max_error(&exact, &oracle));
    }
    Ok(Check::below("transform lattice agreement", worst, 1e-5))
}

/// Off-lattice interpolation error of the fast path at lattice oversampling
/// 1, 2, 4, 8; returns the errors.
pub fn interpolation_errors(seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vol = random_volume(2, 16, 3, 2, &mut rng)?;
    let x = random_coords(400, 2, &mut rng);
    let exact = eval_exact(&vol, &x)?;
    [1, 2, 4, 8]
        .iter()
        .map(|&s| Ok(scaled_max_error(&FastTransform::with_oversample(s).eval(&vol, &x)?, &exact)))
        .collect()
}

/// Off-lattice error shrinks fourfold per lattice doubling once the lattice
/// resolves the spectrum; coarser doublings must at least beat first order.
/// Measured is the distance of the finest doubling's log2 ratio from 2.
pub fn interpolation_convergence(seed: u64) -> Result<Check> {
    let e = interpolation_errors(seed)?;
    let ratios: Vec<f64> = e.windows(2).map(|w| w[0] / w[1]).collect();
    let finest = (ratios[ratios.len() - 1].log2() - 2.0).abs();
    let mut c = Check::below("interpolation order (log2 dev)", finest, 0.5);
    c.passed &= ratios.iter().all(|&r| r > 2.0);
    Ok(c)
}

/// Fast-path derivatives at lattice points against central differences of the
/// exact transform.
/// Returns the worst first- and second-order scaled errors.
pub fn derivative_errors(samples: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0f64, 0.0f64);
    for (dims, n, d) in [(2, 8, 3), (2, 16, 4), (3, 8, 3)] {
        let vol = random_volume(dims, n, d, 2, &mut rng)?;
        let x = lattice_coords(samples / 3 + 1, dims, n, &mut rng);
        let mut ft = FastTransform::new();
        for axis in 0..dims {
            let shifted = |h: f64| {
                let mut y = x.clone();
                for r in 0..y.rows {
                    y.row_mut(r)[axis] += h;
                }
                eval_exact(&vol, &y)
            };
            let h1 = 1e-6;
            let (p, m) = (shifted(h1)?, shifted(-h1)?);
            let mut fd1 = Matrix::zeros(x.rows, vol.channels());
            for i in 0..fd1.data.len() {
                fd1.data[i] = (p.data[i] - m.data[i]) / (2.0 * h1);
            }
            let d1 = ft.eval_derivative(&vol, &x, Derivative::new(axis, 1)?)?;
            worst.0 = worst.0.max(scaled_max_error(&d1, &fd1));

            let h2 = 1e-4;
            let (p, c, m) = (shifted(h2)?, eval_exact(&vol, &x)?, shifted(-h2)?);
            let mut fd2 = Matrix::zeros(x.rows, vol.channels());
            for i in 0..fd2.data.len() {
                fd2.data[i] = (p.data[i] - 2.0 * c.data[i] + m.data[i]) / (h2 * h2);
            }
            let d2 = ft.eval_derivative(&vol, &x, Derivative::new(axis, 2)?)?;
            worst.1 = worst.1.max(scaled_max_error(&d2, &fd2));
        }
    }
    Ok(worst)
}

pub fn derivative_checks(seed: u64) -> Result<Vec<Check>> {
    let (e1, e2) = derivative_errors(200, seed)?;
    Ok(vec![
        Check::below("first derivative vs differences", e1, 1e-4),
        Check::below("second derivative vs differences", e2, 1e-3),
    ])
}

/// Per-factor and whole-volume spectral energy against lattice quadrature.
pub fn energy_identity(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for (dims, n, d) in [(2, 8, 3), (2, 16, 4), (3, 8, 3)] {
        let vol = random_volume(dims, n, d, 2, &mut rng)?;
        for a in 0..dims {
            let spec = crate::transform::factor_spectral_energy(&vol, a);
            let spat = crate::transform::spatial_energy_of_factor(&vol, a, 2 * n)?;
            worst = worst.max((spec - spat).abs() / spat);
        }
        let spec = spectral_energy(&vol);
        let spat = spatial_energy(&vol, 2 * n)?;
        worst = worst.max((spec - spat).abs() / spat);
    }
    Ok(Check::below("spectral = spatial energy", worst, 1e-4))
}

/// Regularizer axis terms against the quadrature of the analytic derivative
/// energy of a single-factor field.
pub fn regularizer_axis_terms(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for (dims, n, d, factor) in [(2, 8, 3, 0), (2, 16, 4, 1), (3, 8, 3, 2)] {
        let mut vol = random_volume(dims, n, d, 1, &mut rng)?;
        for a in 0..dims {
            if a != factor {
                vol.factor_mut(a).fill(Complex64::new(0.0, 0.0));
            }
        }
        let m = 2 * n;
        let total = m.pow(dims as u32);
        let mut grid = Matrix::zeros(total, dims);
        for p in 0..total {
            let mut rem = p;
            for b in 0..dims {
                grid.row_mut(p)[b] = (rem % m) as f64 / m as f64;
                rem /= m;
            }
        }
        for axis in 0..dims {
            let z = eval_exact_complex(&vol, &grid, Some(Derivative::new(axis, 1)?))?;
            let quad = (z.iter().map(|v| v.norm_sqr()).sum::<f64>() / total as f64).sqrt();
            let reg = parseval_axis_term(&vol, axis);
            worst = worst.max((quad - reg).abs() / reg.max(1e-300));
        }
    }
    Ok(Check::below("regularizer = derivative energy", worst, 1e-3))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Central differences of an L2 loss through encoder and decoder against the
/// analytic gradients of every decoder parameter and every coefficient part.
pub fn gradient_errors(seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vol = random_volume(2, 8, 3, 3, &mut rng)?;
    let mut enc = PrefEncoder::new(vol);
    let mut mlp = MlpParams::init(&[3, 6, 5, 2], Activation::Softplus, Activation::Sigmoid, &mut rng)?;
    let x = random_coords(12, 2, &mut rng);
    let mut t = Matrix::zeros(12, 2);
    for v in &mut t.data {
        *v = rng.gen();
    }
    let objective = |enc: &mut PrefEncoder, mlp: &MlpParams| -> Result<f64> {
        let feats = enc.encode(&x)?;
        let (pred, _) = forward(mlp, &feats)?;
        Ok(loss(LossKind::L2, &pred, &t)?.0)
    };
    let feats = enc.encode(&x)?;
    let (pred, tape) = forward(&mlp, &feats)?;
    let (_, gpred) = loss(LossKind::L2, &pred, &t)?;
    let (g_mlp, g_feat) = backward(&mlp, &tape, &gpred)?;
    let g_enc = enc.backward(&x, &g_feat)?;

    let h = 1e-6;
    let mut worst_mlp = 0.0f64;
    for i in 0..mlp.param_count() {
        let orig = mlp.params()[i];
        mlp.params_mut()[i] = orig + h;
        let p = objective(&mut enc, &mlp)?;
        mlp.params_mut()[i] = orig - h;
        let m = objective(&mut enc, &mlp)?;
        mlp.params_mut()[i] = orig;
        worst_mlp = worst_mlp.max(rel((p - m) / (2.0 * h), g_mlp[i]).min((p - m) / (2.0 * h) - g_mlp[i]).abs());
    }
    let mut worst_enc = 0.0f64;
    for i in 0..enc.param_count() {
        let orig = enc.params()[i];
        enc.params_mut()[i] = orig + h;
        let p = objective(&mut enc, &mlp)?;
        enc.params_mut()[i] = orig - h;
        let m = objective(&mut enc, &mlp)?;
        enc.params_mut()[i] = orig;
        let fd = (p - m) / (2.0 * h);
        worst_enc = worst_enc.max(rel(fd, g_enc[i]).min((fd - g_enc[i]).abs()));
    }
    Ok((worst_mlp, worst_enc))
}

/// `<A c, g> = <c, A* g>` for the fast transform `A` and its adjoint.
pub fn adjoint_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for (dims, n, d) in [(2, 16, 4), (3, 8, 3)] {
        let vol = random_volume(dims, n, d, 4, &mut rng)?;
        let x = random_coords(300, dims, &mut rng);
        let mut g = Matrix::zeros(300, 4);
        for v in &mut g.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mut ft = FastTransform::new();
        let ac = ft.eval(&vol, &x)?;
        let lhs: f64 = ac.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
        let adj = backprop_to_volume(&ft, &vol, &x, &g)?;
        let rhs: f64 = adj
            .iter()
            .zip(vol.coefficients())
            .map(|(a, c)| a.re * c.re + a.im * c.im)
            .sum();
        worst = worst.max(rel(lhs, rhs));
    }
    Ok(worst)
}

pub fn gradient_checks(seed: u64) -> Result<Vec<Check>> {
    let (m, e) = gradient_errors(seed)?;
    Ok(vec![
        Check::below("decoder gradients vs differences", m, 1e-4),
        Check::below("coefficient gradients vs diffs", e, 1e-4),
        Check::below("adjoint dot-product identity", adjoint_error(seed)?, 1e-6),
    ])
}

/// Identity at zero width, semigroup composition and monotone high-band decay.
pub fn filter_checks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vol = random_volume(3, 16, 4, 2, &mut rng)?;
    let same = gaussian_filter(&vol, 0.0)?.coefficients() == vol.coefficients();
    let (s1, s2) = (1.3, 2.1);
    let twice = gaussian_filter(&gaussian_filter(&vol, s1)?, s2)?;
    let once = gaussian_filter(&vol, (s1 * s1 + s2 * s2).sqrt())?;
    let semigroup = twice
        .coefficients()
        .iter()
        .zip(once.coefficients())
        .map(|(a, b)| (a - b).norm() / b.norm().max(1e-12))
        .fold(0.0, f64::max);
    let cutoff = 16 / 4;
    let energies: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&s| Ok(high_band_energy(&gaussian_filter(&vol, s)?, cutoff)))
        .collect::<Result<_>>()?;
    let violations = energies.windows(2).filter(|w| !(w[1] < w[0])).count();
    Ok(vec![
        Check::below("filter identity at zero width", f64::from(u8::from(!same)), 0.0),
        Check::below("filter semigroup", semigroup, 1e-6),
        Check::below("high-band energy decay (viol.)", violations as f64, 0.0),
    ])
}

/// Second derivative along a factor's reduced axis (phasor field) and inside
/// grid cells (dense grid). Returns the phasor field's finite-difference
/// error, its derivative magnitude, and the dense grid's largest magnitude.
pub fn derivative_contrast(seed: u64) -> Result<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vol = random_volume(2, 16, 4, 2, &mut rng)?;
    vol.factor_mut(1).fill(Complex64::new(0.0, 0.0));
    let x = lattice_coords(100, 2, 16, &mut rng);
    let d2 = FastTransform::new().eval_derivative(&vol, &x, Derivative::new(0, 2)?)?;
    let h = 1e-4;
    let shift = |dx: f64| {
        let mut y = x.clone();
        for r in 0..y.rows {
            y.row_mut(r)[0] += dx;
        }
        eval_exact(&vol, &y)
    };
    let (p, c, m) = (shift(h)?, shift(0.0)?, shift(-h)?);
    let mut fd = Matrix::zeros(x.rows, 2);
    for i in 0..fd.data.len() {
        fd.data[i] = (p.data[i] - 2.0 * c.data[i] + m.data[i]) / (h * h);
    }
    let pref_err = scaled_max_error(&d2, &fd);
    let pref_mag = d2.max_abs();

    let res = 16;
    let mut grid = DenseGridEncoder::random(2, res, 2, 1.0, &mut rng)?;
    let cell = 1.0 / (res - 1) as f64;
    let hg = 1e-3;
    let mut y = Matrix::zeros(100, 2);
    for r in 0..100 {
        // interior of a random cell, at least 2h from its walls
        let i = rng.gen_range(0..res - 1) as f64;
        let j = rng.gen_range(0..res - 1) as f64;
        y.row_mut(r)[0] = (i + rng.gen_range(0.1..0.9)) * cell;
        y.row_mut(r)[1] = (j + rng.gen_range(0.1..0.9)) * cell;
    }
    let at = |dx: f64, grid: &mut DenseGridEncoder| {
        let mut z = y.clone();
        for r in 0..z.rows {
            z.row_mut(r)[0] += dx;
        }
        grid.encode(&z)
    };
    let (gp, gc, gm) = (at(hg, &mut grid)?, at(0.0, &mut grid)?, at(-hg, &mut grid)?);
    let dense_mag = (0..gp.data.len())
        .map(|i| ((gp.data[i] - 2.0 * gc.data[i] + gm.data[i]) / (hg * hg)).abs())
        .fold(0.0, f64::max);
    Ok((pref_err, pref_mag, dense_mag))
}

pub fn contrast_checks(seed: u64) -> Result<Vec<Check>> {
    let (err, mag, dense) = derivative_contrast(seed)?;
    let nonzero = Check {
        name: "phasor second derivative nonzero".to_string(),
        measured: mag,
        tolerance: 0.0,
        passed: mag > 0.0 && mag.is_finite(),
    };
    Ok(vec![
        nonzero,
        Check::below("phasor 2nd deriv vs differences", err, 1e-3),
        Check::below("dense grid 2nd deriv in cells", dense, 1e-6),
    ])
}

/// Run the whole suite with fixed seeds.
pub fn run_all() -> Result<Vec<Check>> {
    let mut out = vec![
        transform_agreement(12, 1)?,
        interpolation_convergence(2)?,
    ];
    out.extend(derivative_checks(3)?);
    out.push(energy_identity(4)?);
    out.push(regularizer_axis_terms(5)?);
    out.extend(gradient_checks(6)?);
    out.extend(filter_checks(7)?);
    out.extend(contrast_checks(8)?);
    Ok(out)
}
