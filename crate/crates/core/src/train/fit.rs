use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::Serialize;

use super::adam::{Adam, AdamConfig};
use super::loss::{loss, LossKind};
use super::schedule::{LrSchedule, UnlockSchedule};
use crate::encoder::Encoder;
use crate::error::{PrefError, Result};
use crate::linalg::Matrix;
use crate::mlp::{backward, forward, MlpParams};

/// Supplies `(coords, targets)` training batches.
pub trait BatchSource {
    fn next_batch(&mut self, step: u64, rng: &mut ChaCha8Rng) -> Result<(Matrix, Matrix)>;
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub iterations: u64,
    pub loss: LossKind,
    pub lr_encoder: LrSchedule,
    pub lr_mlp: LrSchedule,
    pub adam: AdamConfig,
    /// Weight of the spectral smoothness penalty; 0 disables it.
    pub lambda_parseval: f64,
    pub unlock: UnlockSchedule,
    /// Emit a metrics record every this many steps (and at the last step).
    pub log_every: u64,
    /// Include wall-clock seconds in metrics records.
    pub record_time: bool,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            loss: LossKind::L2,
            lr_encoder: LrSchedule::constant(1e-4),
            lr_mlp: LrSchedule::constant(1e-4),
            adam: AdamConfig::default(),
            lambda_parseval: 0.0,
            unlock: UnlockSchedule::disabled(),
            log_every: 100,
            record_time: false,
            seed: 0,
        }
    }
}

/// One line of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub step: u64,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_s: Option<f64>,
}

impl MetricRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metric records serialize")
    }
}

/// Optimizer state of a training run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub encoder_opt: Adam,
    pub mlp_opt: Adam,
    pub step: u64,
    pub unlock: UnlockSchedule,
    pub lr_encoder: LrSchedule,
    pub lr_mlp: LrSchedule,
}

impl TrainState {
    pub fn new(encoder_params: usize, mlp_params: usize, config: &FitConfig) -> Self {
        Self {
            encoder_opt: Adam::new(encoder_params, config.adam),
            mlp_opt: Adam::new(mlp_params, config.adam),
            step: 0,
            unlock: config.unlock.clone(),
            lr_encoder: config.lr_encoder.clone(),
            lr_mlp: config.lr_mlp.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub records: Vec<MetricRecord>,
    pub losses: Vec<f64>,
    pub state: TrainState,
}

impl FitReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.losses.last().copied()
    }

    /// The last `n` losses.
    pub fn loss_tail(&self, n: usize) -> &[f64] {
        &self.losses[self.losses.len().saturating_sub(n)..]
    }
}

/// Optional metric probe evaluated at logging steps.
pub type Probe<'a, E> = dyn FnMut(&mut E, &MlpParams) -> Result<(String, f64)> + 'a;

/// Jointly optimize an encoder and decoder head.
///
/// Each step draws a batch, evaluates encoder then MLP, computes the loss
/// (plus the weighted spectral penalty), backpropagates through both, masks
/// locked frequencies, and applies Adam to each parameter group.
pub fn fit<E: Encoder, S: BatchSource>(
    source: &mut S,
    encoder: &mut E,
    mlp: &mut MlpParams,
    config: &FitConfig,
    mut probe: Option<&mut Probe<'_, E>>,
) -> Result<FitReport> {
    if encoder.channels() != mlp.input_dim() {
        return Err(PrefError::Dimension(format!(
            "encoder emits {} channels, MLP expects {}",
            encoder.channels(),
            mlp.input_dim()
        )));
    }
    let mut state = TrainState::new(encoder.param_count(), mlp.param_count(), config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let start = Instant::now();
    let mut records = Vec::new();
    let mut losses = Vec::with_capacity(config.iterations as usize);
    let mut last_finite = None;

    let mut current_limit = state.unlock.max_frequency(0);
    let mut locked = current_limit.and_then(|l| encoder.locked_params(l));
    if let Some(mask) = &locked {
        for (p, &l) in encoder.params_mut().iter_mut().zip(mask) {
            if l {
                *p = 0.0;
            }
        }
    }

    for step in 0..config.iterations {
        let limit = state.unlock.max_frequency(step);
        if limit != current_limit {
            current_limit = limit;
            locked = limit.and_then(|l| encoder.locked_params(l));
        }

        let (coords, targets) = source.next_batch(step, &mut rng)?;
        let features = encoder.encode(&coords)?;
        let (pred, tape) = forward(mlp, &features)?;
        let (mut value, grad_pred) = match loss(config.loss, &pred, &targets) {
            Ok(v) => v,
            Err(PrefError::Numeric(_)) => {
                return Err(divergence(step, f64::NAN, last_finite, encoder, mlp));
            }
            Err(e) => return Err(e),
        };
        let (grad_mlp, grad_features) = backward(mlp, &tape, &grad_pred)?;
        let mut grad_enc = encoder.backward(&coords, &grad_features)?;
        if config.lambda_parseval > 0.0 {
            if let Some((r, g)) = encoder.regularizer() {
                value += config.lambda_parseval * r;
                for (a, b) in grad_enc.iter_mut().zip(g) {
                    *a += config.lambda_parseval * b;
                }
            }
        }
        if !value.is_finite() {
            return Err(divergence(step, value, last_finite, encoder, mlp));
        }
        if let Some(mask) = &locked {
            for (g, &l) in grad_enc.iter_mut().zip(mask) {
                if l {
                    *g = 0.0;
                }
            }
        }

        let lr_e = state.lr_encoder.at(step);
        let lr_m = state.lr_mlp.at(step);
        state
            .encoder_opt
            .step(encoder.params_mut(), &grad_enc, lr_e)
            .map_err(|_| divergence(step, value, last_finite, encoder, mlp))?;
        state.mlp_opt.step(mlp.params_mut(), &grad_mlp, lr_m)?;
        state.step = step + 1;
        losses.push(value);
        last_finite = Some(value);

        let is_last = step + 1 == config.iterations;
        if config.log_every > 0 && ((step + 1) % config.log_every == 0 || is_last) {
            let (metric_name, metric) = match probe.as_deref_mut() {
                Some(p) => {
                    let (n, v) = p(encoder, mlp)?;
                    (Some(n), Some(v))
                }
                None => (None, None),
            };
            records.push(MetricRecord {
                step: step + 1,
                loss: value,
                metric_name,
                metric,
                elapsed_s: config.record_time.then(|| start.elapsed().as_secs_f64()),
            });
        }
    }
    Ok(FitReport {
        records,
        losses,
        state,
    })
}

fn divergence<E: Encoder>(
    step: u64,
    loss: f64,
    last_finite: Option<f64>,
    encoder: &E,
    mlp: &MlpParams,
) -> PrefError {
    let enc_norm: f64 = encoder.params().iter().map(|v| v * v).sum::<f64>().sqrt();
    let mlp_norm: f64 = mlp.params().iter().map(|v| v * v).sum::<f64>().sqrt();
    PrefError::Numeric(format!(
        "training diverged at step {step}: loss {loss}, last finite loss {last_finite:?}, \
         encoder param norm {enc_norm:.6e}, mlp param norm {mlp_norm:.6e}"
    ))
}
