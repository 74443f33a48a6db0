//! 2D image regression and completion.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::imageio::Image;
use crate::checkpoint::{Checkpoint, TaskMeta, TrainMeta};
use crate::encoder::{AnyEncoder, DenseGridEncoder, Encoder, PrefEncoder};
use crate::error::{dim_err, PrefError, Result};
use crate::linalg::Matrix;
use crate::mlp::{predict, Activation, MlpParams};
use crate::phasor::{FrequencyLayout, PhasorVolume};
use crate::train::{fit, psnr, BatchSource, FitConfig, FitReport, LossKind, LrSchedule};
use crate::transform::eval_fast;

/// How pixels are split between training and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    /// Every pixel is observed and evaluated.
    Full,
    /// Observe pixels with even row and column; evaluate odd row and column.
    Regular4,
}

impl std::str::FromStr for MaskKind {
    type Err = PrefError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "none" => Ok(Self::Full),
            "regular4" => Ok(Self::Regular4),
            _ => Err(PrefError::Usage(format!("unknown mask '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImageTask {
    pub image: Image,
    observed: Vec<bool>,
    test: Vec<bool>,
}

impl ImageTask {
    pub fn new(image: Image, mask: MaskKind) -> Self {
        let (w, h) = (image.width, image.height);
        let mut observed = vec![true; w * h];
        let mut test = vec![true; w * h];
        if mask == MaskKind::Regular4 {
            for i in 0..h {
                for j in 0..w {
                    observed[i * w + j] = i % 2 == 0 && j % 2 == 0;
                    test[i * w + j] = i % 2 == 1 && j % 2 == 1;
                }
            }
        }
        Self {
            image,
            observed,
            test,
        }
    }

    /// Task with an explicit observation mask; every unobserved pixel is a test pixel.
    pub fn with_mask(image: Image, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != image.pixel_count() {
            return Err(dim_err(format!(
                "mask has {} entries for a {}x{} image",
                observed.len(),
                image.width,
                image.height
            )));
        }
        let test = observed.iter().map(|o| !o).collect();
        Ok(Self {
            image,
            observed,
            test,
        })
    }

    pub fn observed_mask(&self) -> &[bool] {
        &self.observed
    }

    pub fn test_mask(&self) -> &[bool] {
        &self.test
    }

    pub fn train_pixels(&self) -> Vec<usize> {
        (0..self.observed.len()).filter(|&p| self.observed[p]).collect()
    }

    /// Evaluation pixels; falls back to the training pixels for pure regression.
    pub fn test_pixels(&self) -> Vec<usize> {
        let t: Vec<usize> = (0..self.test.len()).filter(|&p| self.test[p]).collect();
        if t.is_empty() {
            self.train_pixels()
        } else {
            t
        }
    }

    pub fn coords(&self, pixels: &[usize]) -> Matrix {
        pixel_coords(self.image.width, self.image.height, pixels)
    }

    pub fn targets(&self, pixels: &[usize]) -> Matrix {
        let c = self.image.channels;
        let mut m = Matrix::zeros(pixels.len(), c);
        for (r, &p) in pixels.iter().enumerate() {
            m.row_mut(r)
                .copy_from_slice(&self.image.data[p * c..(p + 1) * c]);
        }
        m
    }
}

/// Pixel centers as `[x, y] = [(j + 0.5) / W, (i + 0.5) / H]`.
pub fn pixel_coords(width: usize, height: usize, pixels: &[usize]) -> Matrix {
    let mut m = Matrix::zeros(pixels.len(), 2);
    for (r, &p) in pixels.iter().enumerate() {
        let (i, j) = (p / width, p % width);
        let row = m.row_mut(r);
        row[0] = (j as f64 + 0.5) / width as f64;
        row[1] = (i as f64 + 0.5) / height as f64;
    }
    m
}

/// Random minibatches (or the full set) of observed pixels.
pub struct PixelBatches {
    coords: Matrix,
    targets: Matrix,
    batch_size: Option<usize>,
}

impl PixelBatches {
    pub fn new(task: &ImageTask, batch_size: Option<usize>) -> Self {
        let pixels = task.train_pixels();
        Self {
            coords: task.coords(&pixels),
            targets: task.targets(&pixels),
            batch_size,
        }
    }
}

impl BatchSource for PixelBatches {
    fn next_batch(&mut self, _step: u64, rng: &mut ChaCha8Rng) -> Result<(Matrix, Matrix)> {
        match self.batch_size {
            Some(b) if b < self.coords.rows => {
                let mut idx = index::sample(rng, self.coords.rows, b).into_vec();
                idx.sort_unstable();
                Ok((self.coords.select_rows(&idx), self.targets.select_rows(&idx)))
            }
            _ => Ok((self.coords.clone(), self.targets.clone())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    Pref,
    /// Dense feature grid with parameter count matched to the phasor layout.
    DenseGrid,
}

impl std::str::FromStr for EncoderKind {
    type Err = PrefError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pref" => Ok(Self::Pref),
            "dense-grid" | "dense" => Ok(Self::DenseGrid),
            _ => Err(PrefError::Usage(format!("unknown encoder '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImageFitConfig {
    pub resolution: usize,
    pub reduced: usize,
    pub channels: usize,
    /// Hidden layer widths of the decoder.
    pub hidden: Vec<usize>,
    pub output: Activation,
    pub encoder: EncoderKind,
    /// Standard deviation of the initial features.
    pub init_std: f64,
    /// `None` trains on every observed pixel each step.
    pub batch_size: Option<usize>,
    pub fit: FitConfig,
}

impl Default for ImageFitConfig {
    fn default() -> Self {
        Self {
            resolution: 128,
            reduced: 7,
            channels: 8,
            hidden: vec![64, 64],
            output: Activation::Identity,
            encoder: EncoderKind::Pref,
            init_std: 0.1,
            batch_size: None,
            fit: FitConfig {
                iterations: 1000,
                loss: LossKind::L1,
                lr_encoder: LrSchedule::constant(default_encoder_lr(EncoderKind::Pref)),
                lr_mlp: LrSchedule::constant(3e-3),
                ..FitConfig::default()
            },
        }
    }
}

/// Encoder learning rate used when none is given. Phasor coefficients act
/// on the whole domain, so they take smaller steps than grid vertices.
pub fn default_encoder_lr(kind: EncoderKind) -> f64 {
    match kind {
        EncoderKind::Pref => 1e-3,
        EncoderKind::DenseGrid => 1e-2,
    }
}

impl ImageFitConfig {
    /// Settings for 75%-missing completion: shorter schedule and a spectral
    /// smoothness penalty.
    pub fn completion(encoder: EncoderKind) -> Self {
        let mut c = Self::default().with_encoder(encoder);
        c.fit.iterations = 500;
        c.fit.lambda_parseval = 1e-3;
        c
    }

    /// Switch encoder kind along with its default learning rate.
    pub fn with_encoder(mut self, encoder: EncoderKind) -> Self {
        self.encoder = encoder;
        self.fit.lr_encoder = LrSchedule::constant(default_encoder_lr(encoder));
        self
    }

    pub fn layout(&self) -> Result<FrequencyLayout> {
        FrequencyLayout::new(2, self.resolution, self.reduced)
    }

    pub fn mlp_sizes(&self, out: usize) -> Vec<usize> {
        let mut s = vec![self.channels];
        s.extend(&self.hidden);
        s.push(out);
        s
    }

    /// Freshly initialized encoder of the configured kind.
    pub fn build_encoder<R: Rng>(&self, rng: &mut R) -> Result<AnyEncoder> {
        let layout = self.layout()?;
        Ok(match self.encoder {
            EncoderKind::Pref => AnyEncoder::Pref(PrefEncoder::new(PhasorVolume::random(
                layout,
                self.channels,
                self.init_std,
                rng,
            )?)),
            EncoderKind::DenseGrid => {
                let target = 2 * layout.dims() * layout.factor_plane_len() * self.channels;
                let res = DenseGridEncoder::matched_resolution(target, 2, self.channels);
                AnyEncoder::DenseGrid(DenseGridEncoder::random(
                    2,
                    res,
                    self.channels,
                    self.init_std,
                    rng,
                )?)
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct ImageFitOutcome {
    pub encoder: AnyEncoder,
    pub mlp: MlpParams,
    pub report: FitReport,
    pub train_psnr: f64,
    pub test_psnr: f64,
}

/// Predictions for the given pixels.
pub fn predict_pixels<E: Encoder>(
    encoder: &mut E,
    mlp: &MlpParams,
    width: usize,
    height: usize,
    pixels: &[usize],
) -> Result<Matrix> {
    const CHUNK: usize = 1 << 15;
    let mut out = Matrix::zeros(pixels.len(), mlp.output_dim());
    for (c, chunk) in pixels.chunks(CHUNK).enumerate() {
        let feats = encoder.encode(&pixel_coords(width, height, chunk))?;
        let pred = predict(mlp, &feats)?;
        let o = c * CHUNK * out.cols;
        out.data[o..o + pred.data.len()].copy_from_slice(&pred.data);
    }
    Ok(out)
}

/// Render the full image.
pub fn render<E: Encoder>(encoder: &mut E, mlp: &MlpParams, width: usize, height: usize) -> Result<Image> {
    let pixels: Vec<usize> = (0..width * height).collect();
    let pred = predict_pixels(encoder, mlp, width, height, &pixels)?;
    Image::new(
        width,
        height,
        mlp.output_dim(),
        pred.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    )
}

/// PSNR of the model on a pixel subset.
pub fn pixel_psnr<E: Encoder>(
    encoder: &mut E,
    mlp: &MlpParams,
    task: &ImageTask,
    pixels: &[usize],
) -> Result<f64> {
    let pred = predict_pixels(encoder, mlp, task.image.width, task.image.height, pixels)?;
    let clamped: Vec<f64> = pred.data.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(psnr(&clamped, &task.targets(pixels).data))
}

/// Train an encoder and decoder on the observed pixels and report train and
/// held-out PSNR.
pub fn image_fit(task: &ImageTask, config: &ImageFitConfig) -> Result<ImageFitOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.fit.seed ^ 0x5eed_0001);
    let encoder = config.build_encoder(&mut rng)?;
    let mlp = MlpParams::init(
        &config.mlp_sizes(task.image.channels),
        Activation::Relu,
        config.output,
        &mut rng,
    )?;
    image_fit_from(task, config, encoder, mlp)
}

/// As [`image_fit`], starting from the given parameters.
pub fn image_fit_from(
    task: &ImageTask,
    config: &ImageFitConfig,
    mut encoder: AnyEncoder,
    mut mlp: MlpParams,
) -> Result<ImageFitOutcome> {
    if mlp.output_dim() != task.image.channels {
        return Err(dim_err("decoder output does not match image channels"));
    }
    let mut batches = PixelBatches::new(task, config.batch_size);
    let test = task.test_pixels();
    let mut probe = |e: &mut AnyEncoder, m: &MlpParams| -> Result<(String, f64)> {
        Ok(("psnr".to_string(), pixel_psnr(e, m, task, &test)?))
    };
    let report = fit(&mut batches, &mut encoder, &mut mlp, &config.fit, Some(&mut probe))?;
    let train_psnr = pixel_psnr(&mut encoder, &mlp, task, &task.train_pixels())?;
    let test_psnr = pixel_psnr(&mut encoder, &mlp, task, &test)?;
    Ok(ImageFitOutcome {
        encoder,
        mlp,
        report,
        train_psnr,
        test_psnr,
    })
}

impl ImageFitOutcome {
    pub fn checkpoint(&self, width: usize, height: usize) -> Checkpoint {
        let mut ck = Checkpoint::new(
            TaskMeta::Image {
                width: width as u32,
                height: height as u32,
                channels: self.mlp.output_dim() as u32,
            },
            self.encoder.clone(),
            self.mlp.clone(),
        );
        ck.meta = TrainMeta {
            step: self.report.state.step,
            loss_tail: self.report.loss_tail(16).to_vec(),
        };
        ck
    }
}

/// Image whose values are an affine map of a single-channel phasor field, so it
/// is exactly representable by a layout that contains the volume's support.
pub fn synthetic_image(vol: &PhasorVolume, width: usize, height: usize) -> Result<Image> {
    if vol.dims() != 2 || vol.channels() != 1 {
        return Err(dim_err("synthetic image needs a 2-D single-channel volume"));
    }
    let pixels: Vec<usize> = (0..width * height).collect();
    let field = eval_fast(vol, &pixel_coords(width, height, &pixels))?;
    let lo = field.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = field.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let data = field.data.iter().map(|v| 0.1 + 0.8 * (v - lo) / span).collect();
    Image::new(width, height, 1, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular4_split_is_disjoint_and_quarter() {
        let img = Image::from_fn(6, 4, |i, j| (i + j) as f64 / 10.0);
        let t = ImageTask::new(img, MaskKind::Regular4);
        let train = t.train_pixels();
        let test = t.test_pixels();
        assert_eq!(train.len(), 6);
        assert_eq!(test.len(), 6);
        assert!(train.iter().all(|p| !test.contains(p)));
    }

    #[test]
    fn pixel_centers() {
        let c = pixel_coords(4, 2, &[0, 7]);
        assert_eq!(c.row(0), &[0.125, 0.25]);
        assert_eq!(c.row(1), &[0.875, 0.75]);
    }

    #[test]
    fn batches_never_contain_test_pixels() {
        let img = Image::from_fn(8, 8, |i, j| (i * 8 + j) as f64 / 64.0);
        let t = ImageTask::new(img, MaskKind::Regular4);
        let test_coords = t.coords(&t.test_pixels());
        let mut b = PixelBatches::new(&t, Some(5));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in 0..20 {
            let (c, _) = b.next_batch(s, &mut rng).unwrap();
            for r in 0..c.rows {
                assert!((0..test_coords.rows).all(|q| test_coords.row(q) != c.row(r)));
            }
        }
    }

    #[test]
    fn mask_length_checked() {
        let img = Image::from_fn(3, 3, |_, _| 0.5);
        assert!(ImageTask::with_mask(img, vec![true; 8]).is_err());
    }
}
