//! Signed distance regression in `[-1, 1]^3`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use super::mcubes::{marching_cubes, Lattice};
use super::mesh::{add, norm, scale, MeshDistance, TriMesh, Vec3};
use crate::encoder::{AnyEncoder, DenseGridEncoder, Encoder, PrefEncoder};
use crate::checkpoint::{Checkpoint, TaskMeta, TrainMeta};
use crate::error::{dim_err, PrefError, Result};
use crate::linalg::Matrix;
use crate::mlp::{predict, Activation, MlpParams};
use crate::phasor::{apply_gaussian_filter, FrequencyLayout, PhasorVolume};
use crate::train::{
    fit, AdamConfig, BatchSource, FitConfig, FitReport, LossKind, LrSchedule, UnlockSchedule,
};

use super::image::EncoderKind;

/// Affine map from the `[-1, 1]^3` task box into the unit domain. The margin
/// keeps opposite faces of the box apart under periodic evaluation.
pub const DOMAIN_SCALE: f64 = 0.45;

pub fn to_unit(p: Vec3) -> Vec3 {
    [
        0.5 + DOMAIN_SCALE * p[0],
        0.5 + DOMAIN_SCALE * p[1],
        0.5 + DOMAIN_SCALE * p[2],
    ]
}

/// Unit-domain coordinates of box points, clamped to `[0, 1)`.
pub fn unit_coords(points: &[Vec3]) -> Matrix {
    let mut m = Matrix::zeros(points.len(), 3);
    for (r, p) in points.iter().enumerate() {
        let u = to_unit(*p);
        for a in 0..3 {
            m.row_mut(r)[a] = u[a].clamp(0.0, 1.0 - f64::EPSILON);
        }
    }
    m
}

/// A shape that can report signed distances and sample its surface.
pub trait SdfSource: Sync {
    fn signed_distance(&self, p: Vec3) -> f64;
    fn sample_surface(&self, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec3>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

impl Sphere {
    pub fn new(radius: f64) -> Self {
        Self {
            center: [0.0; 3],
            radius,
        }
    }
}

fn random_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v: Vec3 = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = norm(v);
        if n > 1e-12 {
            return scale(v, 1.0 / n);
        }
    }
}

impl SdfSource for Sphere {
    fn signed_distance(&self, p: Vec3) -> f64 {
        norm(super::mesh::sub(p, self.center)) - self.radius
    }

    fn sample_surface(&self, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec3>> {
        Ok((0..count)
            .map(|_| add(self.center, scale(random_direction(rng), self.radius)))
            .collect())
    }
}

/// Sphere with a radial bump pattern, `r(u) = radius + amplitude * prod_a sin(freq * pi * u_a)`.
///
/// The returned value is the radial offset `|p| - r(p / |p|)`, a signed
/// distance only to first order in the amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpySphere {
    pub radius: f64,
    pub amplitude: f64,
    pub frequency: f64,
}

impl BumpySphere {
    fn radius_along(&self, u: Vec3) -> f64 {
        let w = self.frequency * std::f64::consts::PI;
        self.radius + self.amplitude * (w * u[0]).sin() * (w * u[1]).sin() * (w * u[2]).sin()
    }
}

impl SdfSource for BumpySphere {
    fn signed_distance(&self, p: Vec3) -> f64 {
        let n = norm(p);
        if n < 1e-12 {
            return -self.radius;
        }
        n - self.radius_along(scale(p, 1.0 / n))
    }

    fn sample_surface(&self, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec3>> {
        Ok((0..count)
            .map(|_| {
                let u = random_direction(rng);
                scale(u, self.radius_along(u))
            })
            .collect())
    }
}

impl SdfSource for MeshDistance {
    fn signed_distance(&self, p: Vec3) -> f64 {
        MeshDistance::signed_distance(self, p)
    }

    fn sample_surface(&self, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec3>> {
        self.mesh().sample_surface(count, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Surface,
    NearSurface,
    Uniform,
}

/// Standard deviation of the near-surface perturbation.
pub const NEAR_SURFACE_SIGMA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SdfSampleSet {
    pub points: Vec<Vec3>,
    pub sdf: Vec<f64>,
    pub provenance: Vec<Provenance>,
}

impl SdfSampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count(&self, tag: Provenance) -> usize {
        self.provenance.iter().filter(|&&p| p == tag).count()
    }
}

/// Draw `count` samples: 4/8 on the surface (sdf 0), 3/8 near it (Gaussian
/// offsets), and the rest uniform in the box.
pub fn sdf_sample<S: SdfSource + ?Sized>(
    source: &S,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SdfSampleSet> {
    let n_surface = count * 4 / 8;
    let n_near = count * 3 / 8;
    let n_uniform = count - n_surface - n_near;
    let surface = source.sample_surface(n_surface + n_near, rng)?;
    let noise = Normal::new(0.0, NEAR_SURFACE_SIGMA).expect("valid sigma");
    let mut points = Vec::with_capacity(count);
    let mut provenance = Vec::with_capacity(count);
    points.extend_from_slice(&surface[..n_surface]);
    provenance.extend(std::iter::repeat(Provenance::Surface).take(n_surface));
    for p in &surface[n_surface..] {
        let offset = [noise.sample(rng), noise.sample(rng), noise.sample(rng)];
        points.push(add(*p, offset));
    }
    provenance.extend(std::iter::repeat(Provenance::NearSurface).take(n_near));
    for _ in 0..n_uniform {
        points.push([
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ]);
    }
    provenance.extend(std::iter::repeat(Provenance::Uniform).take(n_uniform));
    let mut sdf: Vec<f64> = points[n_surface..]
        .par_iter()
        .map(|&p| source.signed_distance(p))
        .collect();
    let mut all = vec![0.0; n_surface];
    all.append(&mut sdf);
    Ok(SdfSampleSet {
        points,
        sdf: all,
        provenance,
    })
}

/// Random minibatches from a fixed sample set.
pub struct SdfBatches {
    coords: Matrix,
    targets: Matrix,
    batch_size: usize,
}

impl SdfBatches {
    pub fn new(samples: &SdfSampleSet, batch_size: usize) -> Self {
        let mut targets = Matrix::zeros(samples.len(), 1);
        targets.data.copy_from_slice(&samples.sdf);
        Self {
            coords: unit_coords(&samples.points),
            targets,
            batch_size,
        }
    }
}

impl BatchSource for SdfBatches {
    fn next_batch(&mut self, _step: u64, rng: &mut ChaCha8Rng) -> Result<(Matrix, Matrix)> {
        if self.batch_size >= self.coords.rows {
            return Ok((self.coords.clone(), self.targets.clone()));
        }
        let mut idx = index::sample(rng, self.coords.rows, self.batch_size).into_vec();
        idx.sort_unstable();
        Ok((self.coords.select_rows(&idx), self.targets.select_rows(&idx)))
    }
}

#[derive(Debug, Clone)]
pub struct SdfFitConfig {
    pub resolution: usize,
    pub reduced: usize,
    pub channels: usize,
    pub hidden: Vec<usize>,
    pub encoder: EncoderKind,
    pub init_std: f64,
    pub samples: usize,
    pub batch_size: usize,
    pub fit: FitConfig,
}

impl Default for SdfFitConfig {
    fn default() -> Self {
        let iterations = 2000;
        let decay_at = iterations * 13 / 20;
        Self {
            resolution: 32,
            reduced: 4,
            channels: 8,
            hidden: vec![64, 64],
            encoder: EncoderKind::Pref,
            init_std: 0.01,
            samples: 1 << 16,
            batch_size: 1 << 12,
            fit: FitConfig {
                iterations,
                loss: LossKind::Mape,
                lr_encoder: LrSchedule::step_decay(3e-4, decay_at, 3e-5),
                lr_mlp: LrSchedule::step_decay(3e-3, decay_at, 3e-4),
                adam: AdamConfig {
                    beta1: 0.9,
                    beta2: 0.99,
                    eps: 1e-5,
                },
                lambda_parseval: 1e-2,
                unlock: UnlockSchedule::disabled(),
                ..FitConfig::default()
            },
        }
    }
}

impl SdfFitConfig {
    pub fn layout(&self) -> Result<FrequencyLayout> {
        FrequencyLayout::new(3, self.resolution, self.reduced)
    }

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
                let res = DenseGridEncoder::matched_resolution(target, 3, self.channels);
                AnyEncoder::DenseGrid(DenseGridEncoder::random(
                    3,
                    res,
                    self.channels,
                    self.init_std,
                    rng,
                )?)
            }
        })
    }

    pub fn build_mlp<R: Rng>(&self, rng: &mut R) -> Result<MlpParams> {
        let mut sizes = vec![self.channels];
        sizes.extend(&self.hidden);
        sizes.push(1);
        MlpParams::init(&sizes, Activation::Relu, Activation::Identity, rng)
    }
}

/// Predicted signed distance at box points.
pub fn predict_sdf<E: Encoder>(encoder: &mut E, mlp: &MlpParams, points: &[Vec3]) -> Result<Vec<f64>> {
    if mlp.output_dim() != 1 {
        return Err(dim_err("SDF decoder must have one output"));
    }
    const CHUNK: usize = 1 << 15;
    let mut out = Vec::with_capacity(points.len());
    for chunk in points.chunks(CHUNK) {
        let feats = encoder.encode(&unit_coords(chunk))?;
        out.extend(predict(mlp, &feats)?.data);
    }
    Ok(out)
}

/// Extract the model's zero level set on a `res^3` lattice over the box.
pub fn extract_mesh<E: Encoder>(encoder: &mut E, mlp: &MlpParams, res: usize) -> Result<TriMesh> {
    marching_cubes(|pts| predict_sdf(encoder, mlp, pts), Lattice::cube(res))
}

#[derive(Debug, Clone)]
pub struct SdfFitOutcome {
    pub encoder: AnyEncoder,
    pub mlp: MlpParams,
    pub report: FitReport,
}

/// Train on samples drawn from `source`.
pub fn sdf_fit<S: SdfSource + ?Sized>(source: &S, config: &SdfFitConfig) -> Result<SdfFitOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.fit.seed ^ 0x5eed_0002);
    let samples = sdf_sample(source, config.samples, &mut rng)?;
    sdf_fit_samples(&samples, config, &mut rng)
}

/// Train on an existing sample set.
pub fn sdf_fit_samples(
    samples: &SdfSampleSet,
    config: &SdfFitConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SdfFitOutcome> {
    if samples.is_empty() {
        return Err(PrefError::Usage("empty SDF sample set".into()));
    }
    let mut encoder = config.build_encoder(rng)?;
    let mut mlp = config.build_mlp(rng)?;
    let mut batches = SdfBatches::new(samples, config.batch_size);
    let report = fit(&mut batches, &mut encoder, &mut mlp, &config.fit, None)?;
    Ok(SdfFitOutcome {
        encoder,
        mlp,
        report,
    })
}

/// Gaussian-filter the phasor volume of an SDF checkpoint, keeping the decoder.
pub fn sdf_smooth(ckpt: &Checkpoint, sigma: f64) -> Result<Checkpoint> {
    let mut out = ckpt.clone();
    match &mut out.encoder {
        AnyEncoder::Pref(e) => apply_gaussian_filter(&mut e.volume, sigma)?,
        AnyEncoder::DenseGrid(_) => {
            return Err(PrefError::Usage(
                "spectral smoothing needs a phasor-volume checkpoint".into(),
            ))
        }
    }
    Ok(out)
}

impl SdfFitOutcome {
    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(
            TaskMeta::Sdf {
                domain_scale: DOMAIN_SCALE,
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_ratio_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sdf_sample(&Sphere::new(0.5), 800, &mut rng).unwrap();
        assert_eq!(s.count(Provenance::Surface), 400);
        assert_eq!(s.count(Provenance::NearSurface), 300);
        assert_eq!(s.count(Provenance::Uniform), 100);
    }

    #[test]
    fn mesh_sphere_samples() {
        let q = MeshDistance::new(TriMesh::icosphere([0.0; 3], 0.5, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = sdf_sample(&q, 64, &mut rng).unwrap();
        for (i, p) in s.points.iter().enumerate() {
            if s.provenance[i] == Provenance::Surface {
                assert!(q.signed_distance(*p).abs() <= 1e-3);
                assert_eq!(s.sdf[i], 0.0);
            } else {
                let analytic = norm(*p) - 0.5;
                assert!((s.sdf[i] - analytic).abs() < 5e-3);
            }
        }
        assert!((SdfSource::signed_distance(&q, [0.0; 3]) + 0.5).abs() < 5e-3);
    }

    #[test]
    fn unit_map_keeps_margin() {
        let c = unit_coords(&[[-1.0, 0.0, 1.0]]);
        for (a, b) in c.row(0).iter().zip([0.05, 0.5, 0.95]) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
