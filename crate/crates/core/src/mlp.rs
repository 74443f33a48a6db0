//! Shallow fully connected decoder head with a hand-written backward pass.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{dim_err, PrefError, Result};
use crate::linalg::{matmul_ab, matmul_abt, matmul_atb_acc, Matrix};

static NEXT_GENERATION: AtomicU64 = AtomicU64::new(1);

fn fresh_generation() -> u64 {
    NEXT_GENERATION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Softplus,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
            Activation::Softplus => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::Sigmoid,
            3 => Activation::Softplus,
            _ => return None,
        })
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Softplus => {
                if z > 30.0 {
                    z
                } else {
                    z.exp().ln_1p()
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    #[inline]
    fn slope(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Softplus => sigmoid(z),
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weights and biases of every layer in one flat buffer.
///
/// Layer `l` stores its `[out, in]` weight matrix followed by its `[out]` bias.
#[derive(Debug, Clone)]
pub struct MlpParams {
    sizes: Vec<usize>,
    hidden: Vec<Activation>,
    output: Activation,
    data: Vec<f64>,
    offsets: Vec<usize>,
    generation: u64,
}

impl PartialEq for MlpParams {
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes
            && self.hidden == other.hidden
            && self.output == other.output
            && self.data == other.data
    }
}

impl MlpParams {
    /// Zero-initialized network with layer widths `sizes` (input first).
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(dim_err(format!("invalid layer widths {sizes:?}")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for w in sizes.windows(2) {
            offsets.push(total);
            total += w[1] * w[0] + w[1];
        }
        offsets.push(total);
        Ok(Self {
            sizes: sizes.to_vec(),
            hidden: vec![hidden; sizes.len() - 2],
            output,
            data: vec![0.0; total],
            offsets,
            generation: fresh_generation(),
        })
    }

    /// Weights uniform in `+-sqrt(6 / fan_in)`, biases zero.
    pub fn init<R: Rng>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(sizes, hidden, output)?;
        for l in 0..p.layer_count() {
            let bound = (6.0 / p.sizes[l] as f64).sqrt();
            for w in p.weight_mut(l) {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(p)
    }

    /// Rebuild from stored parts.
    pub fn from_parts(
        sizes: &[usize],
        hidden: Vec<Activation>,
        output: Activation,
        data: Vec<f64>,
    ) -> Result<Self> {
        let mut p = Self::zeros(sizes, Activation::Relu, output)?;
        if hidden.len() != sizes.len() - 2 {
            return Err(dim_err("hidden activation count does not match layer count"));
        }
        if data.len() != p.data.len() {
            return Err(dim_err(format!(
                "expected {} parameters, got {}",
                p.data.len(),
                data.len()
            )));
        }
        p.hidden = hidden;
        p.data = data;
        Ok(p)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn hidden_activations(&self) -> &[Activation] {
        &self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    fn activation(&self, l: usize) -> Activation {
        if l + 1 == self.layer_count() {
            self.output
        } else {
            self.hidden[l]
        }
    }

    pub fn weight(&self, l: usize) -> &[f64] {
        let o = self.offsets[l];
        &self.data[o..o + self.sizes[l + 1] * self.sizes[l]]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let o = self.offsets[l] + self.sizes[l + 1] * self.sizes[l];
        &self.data[o..o + self.sizes[l + 1]]
    }

    pub fn weight_mut(&mut self, l: usize) -> &mut [f64] {
        self.generation = fresh_generation();
        let o = self.offsets[l];
        let len = self.sizes[l + 1] * self.sizes[l];
        &mut self.data[o..o + len]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        self.generation = fresh_generation();
        let o = self.offsets[l] + self.sizes[l + 1] * self.sizes[l];
        let len = self.sizes[l + 1];
        &mut self.data[o..o + len]
    }

    /// Offset of layer `l` inside the flat parameter buffer.
    pub fn layer_offset(&self, l: usize) -> usize {
        self.offsets[l]
    }

    pub fn params(&self) -> &[f64] {
        &self.data
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation = fresh_generation();
        &mut self.data
    }

    pub fn param_count(&self) -> usize {
        self.data.len()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Intermediate values recorded by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ActivationTape {
    generation: u64,
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
}

fn affine(params: &MlpParams, l: usize, x: &Matrix) -> Matrix {
    let (inp, out) = (params.sizes[l], params.sizes[l + 1]);
    let mut z = Matrix::zeros(x.rows, out);
    matmul_abt(&x.data, params.weight(l), &mut z.data, x.rows, inp, out);
    let b = params.bias(l);
    for row in z.data.chunks_exact_mut(out) {
        for (v, bi) in row.iter_mut().zip(b) {
            *v += bi;
        }
    }
    z
}

fn check_input(params: &MlpParams, x: &Matrix) -> Result<()> {
    if x.cols != params.input_dim() {
        return Err(dim_err(format!(
            "features have {} columns, network expects {}",
            x.cols,
            params.input_dim()
        )));
    }
    Ok(())
}

/// Forward pass recording pre-activations.
pub fn forward(params: &MlpParams, features: &Matrix) -> Result<(Matrix, ActivationTape)> {
    check_input(params, features)?;
    let mut inputs = Vec::with_capacity(params.layer_count());
    let mut pre = Vec::with_capacity(params.layer_count());
    let mut x = features.clone();
    for l in 0..params.layer_count() {
        let z = affine(params, l, &x);
        let act = params.activation(l);
        let y = Matrix {
            rows: z.rows,
            cols: z.cols,
            data: z.data.iter().map(|&v| act.apply(v)).collect(),
        };
        inputs.push(x);
        pre.push(z);
        x = y;
    }
    Ok((
        x,
        ActivationTape {
            generation: params.generation,
            inputs,
            pre,
        },
    ))
}

/// Forward pass without recording, evaluated in row chunks.
pub fn predict(params: &MlpParams, features: &Matrix) -> Result<Matrix> {
    check_input(params, features)?;
    const CHUNK: usize = 1 << 14;
    let mut out = Matrix::zeros(features.rows, params.output_dim());
    let mut start = 0;
    while start < features.rows {
        let end = (start + CHUNK).min(features.rows);
        let mut x = features.slice_rows(start, end);
        for l in 0..params.layer_count() {
            let mut z = affine(params, l, &x);
            let act = params.activation(l);
            z.data.iter_mut().for_each(|v| *v = act.apply(*v));
            x = z;
        }
        out.data[start * out.cols..end * out.cols].copy_from_slice(&x.data);
        start = end;
    }
    Ok(out)
}

/// Reverse pass: gradients of `sum(outputs * grad_out)` with respect to the
/// flat parameter buffer and to the input features.
pub fn backward(
    params: &MlpParams,
    tape: &ActivationTape,
    grad_out: &Matrix,
) -> Result<(Vec<f64>, Matrix)> {
    if tape.generation != params.generation {
        return Err(PrefError::Usage(
            "activation tape was recorded with different parameters".into(),
        ));
    }
    let rows = tape.inputs[0].rows;
    if grad_out.rows != rows || grad_out.cols != params.output_dim() {
        return Err(dim_err(format!(
            "output gradient is {}x{}, expected {rows}x{}",
            grad_out.rows,
            grad_out.cols,
            params.output_dim()
        )));
    }
    let mut grads = vec![0.0; params.param_count()];
    let mut delta = grad_out.clone();
    for l in (0..params.layer_count()).rev() {
        let act = params.activation(l);
        for (g, &z) in delta.data.iter_mut().zip(&tape.pre[l].data) {
            *g *= act.slope(z);
        }
        let (inp, out) = (params.sizes[l], params.sizes[l + 1]);
        let x = &tape.inputs[l];
        let o = params.offsets[l];
        {
            let (gw, gb) = grads[o..o + out * inp + out].split_at_mut(out * inp);
            matmul_atb_acc(&delta.data, &x.data, gw, rows, out, inp);
            for row in delta.data.chunks_exact(out) {
                for (b, d) in gb.iter_mut().zip(row) {
                    *b += d;
                }
            }
        }
        let mut dx = Matrix::zeros(rows, inp);
        matmul_ab(&delta.data, params.weight(l), &mut dx.data, rows, out, inp);
        delta = dx;
    }
    Ok((grads, delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straight-line reference evaluation with explicit loops.
    fn reference(params: &MlpParams, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for l in 0..params.layer_count() {
            let (inp, out) = (params.sizes()[l], params.sizes()[l + 1]);
            let w = params.weight(l);
            let b = params.bias(l);
            let mut next = vec![0.0; out];
            for o in 0..out {
                let mut s = b[o];
                for i in 0..inp {
                    s += w[o * inp + i] * h[i];
                }
                next[o] = if l + 1 == params.layer_count() {
                    s
                } else {
                    s.max(0.0)
                };
            }
            h = next;
        }
        h
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = MlpParams::zeros(&[4, 8, 2], Activation::Relu, Activation::Identity).unwrap();
        let x = Matrix::from_vec(3, 4, vec![1.0; 12]).unwrap();
        let (y, _) = forward(&p, &x).unwrap();
        assert!(y.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_input() {
        let mut p = MlpParams::zeros(&[3, 3], Activation::Relu, Activation::Identity).unwrap();
        for i in 0..3 {
            p.weight_mut(0)[i * 3 + i] = 1.0;
        }
        let x = Matrix::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -0.5]).unwrap();
        let (y, _) = forward(&p, &x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn matches_reference_and_predict() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = MlpParams::init(&[5, 16, 16, 2], Activation::Relu, Activation::Identity, &mut rng)
            .unwrap();
        let x = Matrix::from_vec(
            9,
            5,
            (0..45).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let (y, _) = forward(&p, &x).unwrap();
        let y2 = predict(&p, &x).unwrap();
        assert_eq!(y, y2);
        for i in 0..9 {
            let r = reference(&p, x.row(i));
            for (a, b) in y.row(i).iter().zip(&r) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn single_linear_layer_gradient_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = MlpParams::init(&[3, 2], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let x = Matrix::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap();
        let (_, tape) = forward(&p, &x).unwrap();
        let g = Matrix::from_vec(1, 2, vec![3.0, -0.25]).unwrap();
        let (grads, gx) = backward(&p, &tape, &g).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                assert_eq!(grads[o * 3 + i], g.data[o] * x.data[i]);
            }
            assert_eq!(grads[6 + o], g.data[o]);
        }
        for i in 0..3 {
            let expect = g.data[0] * p.weight(0)[i] + g.data[1] * p.weight(0)[3 + i];
            assert!((gx.data[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = MlpParams::init(&[3, 8, 1], Activation::Relu, Activation::Sigmoid, &mut rng).unwrap();
        let x = Matrix::from_vec(2, 3, vec![0.1, 0.2, 0.3, -0.1, 0.4, 0.9]).unwrap();
        let (_, tape) = forward(&p, &x).unwrap();
        let (grads, gx) = backward(&p, &tape, &Matrix::zeros(2, 1)).unwrap();
        assert!(grads.iter().all(|&v| v == 0.0));
        assert!(gx.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_tape_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = MlpParams::init(&[2, 4, 1], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let x = Matrix::zeros(1, 2);
        let (_, tape) = forward(&p, &x).unwrap();
        p.bias_mut(0)[0] = 1.0;
        assert!(matches!(
            backward(&p, &tape, &Matrix::zeros(1, 1)),
            Err(PrefError::Usage(_))
        ));
    }

    #[test]
    fn finite_difference_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for output in [Activation::Identity, Activation::Sigmoid, Activation::Softplus] {
            let p = MlpParams::init(&[4, 12, 10, 2], Activation::Relu, output, &mut rng).unwrap();
            let x = Matrix::from_vec(6, 4, (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let g = Matrix::from_vec(6, 2, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let objective = |p: &MlpParams, x: &Matrix| -> f64 {
                let y = predict(p, x).unwrap();
                y.data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
            };
            let (_, tape) = forward(&p, &x).unwrap();
            let (grads, gx) = backward(&p, &tape, &g).unwrap();
            let h = 1e-6;
            for i in 0..p.param_count() {
                let mut plus = p.clone();
                plus.params_mut()[i] += h;
                let mut minus = p.clone();
                minus.params_mut()[i] -= h;
                let fd = (objective(&plus, &x) - objective(&minus, &x)) / (2.0 * h);
                assert!((fd - grads[i]).abs() <= 1e-5 * fd.abs().max(1.0), "param {i}: {fd} vs {}", grads[i]);
            }
            for i in 0..x.data.len() {
                let mut xp = x.clone();
                xp.data[i] += h;
                let mut xm = x.clone();
                xm.data[i] -= h;
                let fd = (objective(&p, &xp) - objective(&p, &xm)) / (2.0 * h);
                assert!((fd - gx.data[i]).abs() <= 1e-5 * fd.abs().max(1.0));
            }
        }
    }
}
