//! Binary checkpoints of an encoder, decoder and training metadata.
//!
//! All integers and floats are little-endian.
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 8 | magic `PREFCKPT` |
//! | 8 | 4 | format version (`1`) |
//! | 12 | 1 | task tag: 0 none, 1 image, 2 SDF |
//! | 13 | 1 | encoder tag: 0 phasor volume, 1 dense grid |
//! | 14 | 1 | encoder value width in bytes: 4 (`f32`) or 8 (`f64`) |
//! | 15 | 1 | reserved, 0 |
//!
//! Encoder section. Phasor volume: `u32` dims, resolution, reduced size,
//! channels; then every coefficient as interleaved (re, im) in storage order
//! (factor, channel, then row-major over the factor's axes). Dense grid:
//! `u32` dims, resolution, channels; then `[vertex][channel]` values.
//!
//! Task section. Image: `u32` width, height, channels. SDF: `f64` domain
//! scale. None: empty.
//!
//! Decoder section: `u32` layer count `L`; `L + 1` `u32` layer sizes; `L`
//! `u8` activation tags (hidden layers, then output); every parameter as `f64`
//! (per layer, weights `[out][in]` then biases).
//!
//! Metadata: `u64` training step; `u32` tail length; that many `f64` losses.
//! No bytes may follow.

use std::path::Path;

use num_complex::Complex64;

use crate::encoder::{AnyEncoder, DenseGridEncoder, Encoder, PrefEncoder};
use crate::error::{PrefError, Result};
use crate::mlp::{Activation, MlpParams};
use crate::phasor::{FrequencyLayout, PhasorVolume};

pub const MAGIC: &[u8; 8] = b"PREFCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskMeta {
    None,
    Image {
        width: u32,
        height: u32,
        channels: u32,
    },
    Sdf {
        domain_scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    /// Lossless.
    #[default]
    F64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainMeta {
    pub step: u64,
    pub loss_tail: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub task: TaskMeta,
    pub encoder: AnyEncoder,
    pub mlp: MlpParams,
    pub meta: TrainMeta,
}

struct Writer {
    buf: Vec<u8>,
    precision: Precision,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| PrefError::Usage(format!("{v} does not fit in u32")))?;
        self.buf.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn value(&mut self, v: f64) {
        match self.precision {
            Precision::F32 => self.buf.extend_from_slice(&(v as f32).to_le_bytes()),
            Precision::F64 => self.f64(v),
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    width: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> PrefError {
        PrefError::Format {
            offset: self.pos as u64,
            message: message.into(),
        }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| self.err(format!("truncated: needed {n} more bytes")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn value(&mut self) -> Result<f64> {
        if self.width == 4 {
            Ok(f64::from(f32::from_le_bytes(self.take(4)?.try_into().unwrap())))
        } else {
            self.f64()
        }
    }
    /// Fail early instead of allocating for an impossible element count.
    fn expect_room(&self, count: usize, size: usize) -> Result<()> {
        let need = count.checked_mul(size).ok_or_else(|| self.err("size overflow"))?;
        if self.bytes.len() - self.pos < need {
            return Err(self.err(format!("truncated: {count} values declared")));
        }
        Ok(())
    }
}

impl Checkpoint {
    pub fn new(task: TaskMeta, encoder: AnyEncoder, mlp: MlpParams) -> Self {
        Self {
            task,
            encoder,
            mlp,
            meta: TrainMeta::default(),
        }
    }

    pub fn volume(&self) -> Option<&PhasorVolume> {
        match &self.encoder {
            AnyEncoder::Pref(e) => Some(&e.volume),
            AnyEncoder::DenseGrid(_) => None,
        }
    }

    pub fn to_bytes(&self, precision: Precision) -> Result<Vec<u8>> {
        let mut w = Writer {
            buf: Vec::new(),
            precision,
        };
        w.buf.extend_from_slice(MAGIC);
        w.u32(VERSION as usize)?;
        w.u8(match self.task {
            TaskMeta::None => 0,
            TaskMeta::Image { .. } => 1,
            TaskMeta::Sdf { .. } => 2,
        });
        w.u8(match self.encoder {
            AnyEncoder::Pref(_) => 0,
            AnyEncoder::DenseGrid(_) => 1,
        });
        w.u8(match precision {
            Precision::F32 => 4,
            Precision::F64 => 8,
        });
        w.u8(0);
        match &self.encoder {
            AnyEncoder::Pref(e) => {
                let l = e.volume.layout();
                w.u32(l.dims())?;
                w.u32(l.resolution())?;
                w.u32(l.reduced_size())?;
                w.u32(e.volume.channels())?;
                for z in e.volume.coefficients() {
                    w.value(z.re);
                    w.value(z.im);
                }
            }
            AnyEncoder::DenseGrid(g) => {
                w.u32(g.dims())?;
                w.u32(g.resolution())?;
                w.u32(g.channels())?;
                for &v in g.params() {
                    w.value(v);
                }
            }
        }
        match self.task {
            TaskMeta::None => {}
            TaskMeta::Image {
                width,
                height,
                channels,
            } => {
                w.u32(width as usize)?;
                w.u32(height as usize)?;
                w.u32(channels as usize)?;
            }
            TaskMeta::Sdf { domain_scale } => w.f64(domain_scale),
        }
        let sizes = self.mlp.sizes();
        w.u32(sizes.len() - 1)?;
        for &s in sizes {
            w.u32(s)?;
        }
        for a in self.mlp.hidden_activations() {
            w.u8(a.tag());
        }
        w.u8(self.mlp.output_activation().tag());
        for &p in self.mlp.params() {
            w.f64(p);
        }
        w.u64(self.meta.step);
        w.u32(self.meta.loss_tail.len())?;
        for &v in &self.meta.loss_tail {
            w.f64(v);
        }
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader {
            bytes,
            pos: 0,
            width: 8,
        };
        if r.take(8)? != MAGIC {
            return Err(PrefError::Format {
                offset: 0,
                message: "bad magic bytes".into(),
            });
        }
        let version = r.u32()?;
        if version != VERSION as usize {
            r.pos -= 4;
            return Err(r.err(format!("unsupported version {version}")));
        }
        let task_tag = r.u8()?;
        let enc_tag = r.u8()?;
        r.width = match r.u8()? {
            w @ (4 | 8) => w as usize,
            w => {
                r.pos -= 1;
                return Err(r.err(format!("bad value width {w}")));
            }
        };
        r.u8()?;
        let section = r.pos;
        let shape_err = |pos: usize, e: PrefError| PrefError::Format {
            offset: pos as u64,
            message: e.to_string(),
        };
        let encoder = match enc_tag {
            0 => {
                let (dims, res, reduced, channels) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
                let layout =
                    FrequencyLayout::new(dims, res, reduced).map_err(|e| shape_err(section, e))?;
                let count = dims * layout.factor_plane_len() * channels;
                r.expect_room(count, 2 * r.width)?;
                let mut coeffs = Vec::with_capacity(count);
                for _ in 0..count {
                    coeffs.push(Complex64::new(r.value()?, r.value()?));
                }
                let vol = PhasorVolume::from_coefficients(layout, channels, coeffs)
                    .map_err(|e| shape_err(section, e))?;
                AnyEncoder::Pref(PrefEncoder::new(vol))
            }
            1 => {
                let (dims, res, channels) = (r.u32()?, r.u32()?, r.u32()?);
                if !(2..=3).contains(&dims) || res < 2 || res > 1 << 16 {
                    return Err(shape_err(section, PrefError::Dimension("bad dense grid shape".into())));
                }
                let count = res.pow(dims as u32) * channels;
                r.expect_room(count, r.width)?;
                let data = (0..count).map(|_| r.value()).collect::<Result<Vec<_>>>()?;
                AnyEncoder::DenseGrid(
                    DenseGridEncoder::from_data(dims, res, channels, data)
                        .map_err(|e| shape_err(section, e))?,
                )
            }
            t => {
                return Err(PrefError::Format {
                    offset: 13,
                    message: format!("unknown encoder tag {t}"),
                })
            }
        };
        let task = match task_tag {
            0 => TaskMeta::None,
            1 => TaskMeta::Image {
                width: r.u32()? as u32,
                height: r.u32()? as u32,
                channels: r.u32()? as u32,
            },
            2 => TaskMeta::Sdf {
                domain_scale: r.f64()?,
            },
            t => {
                return Err(PrefError::Format {
                    offset: 12,
                    message: format!("unknown task tag {t}"),
                })
            }
        };
        let mlp_at = r.pos;
        let layers = r.u32()?;
        if layers == 0 || layers > 64 {
            return Err(shape_err(mlp_at, PrefError::Dimension(format!("bad layer count {layers}"))));
        }
        let sizes = (0..=layers).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let mut acts = Vec::with_capacity(layers);
        for _ in 0..layers {
            let t = r.u8()?;
            acts.push(Activation::from_tag(t).ok_or_else(|| {
                PrefError::Format {
                    offset: (r.pos - 1) as u64,
                    message: format!("unknown activation tag {t}"),
                }
            })?);
        }
        let count: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        r.expect_room(count, 8)?;
        let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let output = acts.pop().expect("layers >= 1");
        let mlp = MlpParams::from_parts(&sizes, acts, output, params)
            .map_err(|e| shape_err(mlp_at, e))?;
        if encoder.channels() != mlp.input_dim() {
            return Err(shape_err(
                mlp_at,
                PrefError::Dimension("decoder input does not match encoder channels".into()),
            ));
        }
        let step = r.u64()?;
        let tail = r.u32()?;
        r.expect_room(tail, 8)?;
        let loss_tail = (0..tail).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(r.err("trailing bytes"));
        }
        Ok(Self {
            task,
            encoder,
            mlp,
            meta: TrainMeta { step, loss_tail },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.save_with(path, Precision::F64)
    }

    pub fn save_with(&self, path: &Path, precision: Precision) -> Result<()> {
        std::fs::write(path, self.to_bytes(precision)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Save a phasor volume and decoder without task information.
pub fn save(vol: &PhasorVolume, mlp: &MlpParams, path: &Path) -> Result<()> {
    Checkpoint::new(
        TaskMeta::None,
        AnyEncoder::Pref(PrefEncoder::new(vol.clone())),
        mlp.clone(),
    )
    .save(path)
}

/// Load a phasor-volume checkpoint.
pub fn load(path: &Path) -> Result<(PhasorVolume, MlpParams)> {
    let ck = Checkpoint::load(path)?;
    match ck.encoder {
        AnyEncoder::Pref(e) => Ok((e.into_volume(), ck.mlp)),
        AnyEncoder::DenseGrid(_) => Err(PrefError::Format {
            offset: 13,
            message: "checkpoint holds a dense grid, not a phasor volume".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::InitMode;
    use rand::SeedableRng;

    fn sample() -> Checkpoint {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vol = PhasorVolume::random(FrequencyLayout::new(2, 8, 3).unwrap(), 2, 0.3, &mut rng).unwrap();
        let mlp = MlpParams::init(&[2, 5, 1], Activation::Relu, Activation::Sigmoid, &mut rng).unwrap();
        let mut ck = Checkpoint::new(
            TaskMeta::Image {
                width: 4,
                height: 3,
                channels: 1,
            },
            AnyEncoder::Pref(PrefEncoder::new(vol)),
            mlp,
        );
        ck.meta = TrainMeta {
            step: 12,
            loss_tail: vec![0.5, 0.25],
        };
        ck
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let bytes = ck.to_bytes(Precision::F64).unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.volume(), ck.volume());
        assert_eq!(back.mlp.params(), ck.mlp.params());
        assert_eq!(back.mlp.sizes(), ck.mlp.sizes());
        assert_eq!(back.task, ck.task);
        assert_eq!(back.meta, ck.meta);
        assert_eq!(back.to_bytes(Precision::F64).unwrap(), bytes);
    }

    #[test]
    fn f32_round_trip_is_stable() {
        let ck = sample();
        let once = Checkpoint::from_bytes(&ck.to_bytes(Precision::F32).unwrap()).unwrap();
        let twice_bytes = once.to_bytes(Precision::F32).unwrap();
        let twice = Checkpoint::from_bytes(&twice_bytes).unwrap();
        assert_eq!(once.volume(), twice.volume());
        let err = once
            .volume()
            .unwrap()
            .coefficients()
            .iter()
            .zip(ck.volume().unwrap().coefficients())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-6);
    }

    #[test]
    fn dense_grid_round_trip() {
        let g = DenseGridEncoder::from_data(2, 3, 1, (0..9).map(f64::from).collect()).unwrap();
        let mlp = MlpParams::zeros(&[1, 1], Activation::Identity, Activation::Identity).unwrap();
        let ck = Checkpoint::new(TaskMeta::Sdf { domain_scale: 0.45 }, AnyEncoder::DenseGrid(g.clone()), mlp);
        let back = Checkpoint::from_bytes(&ck.to_bytes(Precision::F64).unwrap()).unwrap();
        match back.encoder {
            AnyEncoder::DenseGrid(b) => assert_eq!(b, g),
            _ => panic!("wrong encoder"),
        }
    }

    #[test]
    fn corrupt_inputs_are_format_errors() {
        let bytes = sample().to_bytes(Precision::F64).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(PrefError::Format { offset: 0, .. })));
        let mut ver = bytes.clone();
        ver[8] = 9;
        assert!(matches!(Checkpoint::from_bytes(&ver), Err(PrefError::Format { offset: 8, .. })));
        for cut in [3, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(
                Checkpoint::from_bytes(&bytes[..cut]),
                Err(PrefError::Format { .. })
            ));
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(Checkpoint::from_bytes(&extra), Err(PrefError::Format { .. })));
    }

    #[test]
    fn save_load_zero_volume() {
        let vol = PhasorVolume::new(FrequencyLayout::new(3, 8, 3).unwrap(), 2, InitMode::Zero).unwrap();
        let mlp = MlpParams::zeros(&[2, 4, 1], Activation::Relu, Activation::Identity).unwrap();
        let path = std::env::temp_dir().join(format!("pref-ckpt-{}.bin", std::process::id()));
        save(&vol, &mlp, &path).unwrap();
        let (v2, m2) = load(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(v2, vol);
        assert_eq!(m2.params(), mlp.params());
    }
}
