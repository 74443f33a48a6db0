//! Command-line front end.
//!
//! Every subcommand flag can also come from a plain-text `key=value` file
//! given with `--config`; keys are long flag names without the dashes.
//! Explicit flags override the file, which overrides built-in defaults.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::checkpoint::{Checkpoint, TaskMeta};
use crate::encoder::{AnyEncoder, Encoder};
use crate::error::{PrefError, Result};
use crate::phasor::apply_gaussian_filter;
use crate::selftest;
use crate::tasks::{
    chamfer_l1, extract_mesh, image_fit, iou, pixel_psnr, predict_sdf, read_image, read_obj, sdf_fit,
    write_obj, EncoderKind, ImageFitConfig, ImageTask, MaskKind, MeshDistance, SdfFitConfig, SdfSource,
    Sphere, TriMesh,
};
use crate::train::{LossKind, LrSchedule, UnlockSchedule};

/// Half-width that meshes are scaled to inside the `[-1, 1]^3` box.
pub const MESH_EXTENT: f64 = 0.9;

#[derive(Debug, Parser)]
#[command(name = "pref", version, about = "Phasor-volume neural fields for images and signed distances")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Add wall-clock seconds to metrics records.
    #[arg(long, global = true)]
    pub timing: bool,
    /// `key=value` file supplying defaults for subcommand flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an image (optionally with 3/4 of the pixels held out).
    FitImage(FitImageArgs),
    /// Fit a signed distance field to a mesh or an analytic sphere.
    FitSdf(FitSdfArgs),
    /// Extract the zero level set of an SDF checkpoint as OBJ.
    Extract(ExtractArgs),
    /// Gaussian-filter the phasor volume of a checkpoint.
    Filter(FilterArgs),
    /// Score a checkpoint against an image or a mesh.
    Eval(EvalArgs),
    /// Run the built-in oracle and invariant checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct FitImageArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub res: usize,
    #[arg(long, default_value_t = 7)]
    pub reduced: usize,
    #[arg(long, default_value_t = 8)]
    pub channels: usize,
    #[arg(long, default_value_t = 1000)]
    pub iters: u64,
    /// Encoder learning rate (default depends on the encoder).
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 3e-3)]
    pub lr_mlp: f64,
    #[arg(long, default_value = "l2")]
    pub loss: LossKind,
    #[arg(long, default_value = "full")]
    pub mask: MaskKind,
    /// Replace the phasor volume with a parameter-matched encoder.
    #[arg(long)]
    pub baseline: Option<EncoderKind>,
    /// Smoothness weight (default 1e-3 with a mask, 0 without).
    #[arg(long)]
    pub lambda_parseval: Option<f64>,
    /// Pixels per step (default: every observed pixel).
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub log_every: u64,
}

#[derive(Debug, Args)]
pub struct FitSdfArgs {
    /// Watertight OBJ mesh; scaled into the unit box.
    #[arg(long, required_unless_present = "sphere", conflicts_with = "sphere")]
    pub mesh: Option<PathBuf>,
    /// Fit an analytic sphere of this radius instead of a mesh.
    #[arg(long)]
    pub sphere: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub res: usize,
    #[arg(long, default_value_t = 4)]
    pub reduced: usize,
    #[arg(long, default_value_t = 8)]
    pub channels: usize,
    #[arg(long, default_value_t = 2000)]
    pub iters: u64,
    /// Coarse-to-fine release, `step:limit,...`.
    #[arg(long)]
    pub unlock: Option<String>,
    /// Initial encoder learning rate.
    #[arg(long, default_value_t = 3e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 3e-3)]
    pub lr_mlp: f64,
    #[arg(long, default_value = "mape")]
    pub loss: LossKind,
    #[arg(long, default_value_t = 1e-2)]
    pub lambda_parseval: f64,
    #[arg(long, default_value_t = 1 << 16)]
    pub samples: usize,
    #[arg(long, default_value_t = 1 << 12)]
    pub batch: usize,
    #[arg(long, default_value_t = 100)]
    pub log_every: u64,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Lattice points per axis.
    #[arg(long, default_value_t = 128)]
    pub res: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, conflicts_with_all = ["mesh", "sphere"])]
    pub image: Option<PathBuf>,
    #[arg(long, default_value = "full")]
    pub mask: MaskKind,
    #[arg(long, conflicts_with = "sphere")]
    pub mesh: Option<PathBuf>,
    #[arg(long)]
    pub sphere: Option<f64>,
    #[arg(long, default_value_t = 64)]
    pub iou_res: usize,
    #[arg(long, default_value_t = 100_000)]
    pub chamfer_samples: usize,
    /// Marching-cubes lattice used for the Chamfer distance.
    #[arg(long, default_value_t = 128)]
    pub extract_res: usize,
}

/// Process exit status for an error.
pub fn exit_code(err: &PrefError) -> i32 {
    match err {
        PrefError::Numeric(_) => 3,
        PrefError::Io(_) | PrefError::Format { .. } | PrefError::Image(_) | PrefError::Mesh(_) => 2,
        PrefError::Layout(_) | PrefError::Dimension(_) | PrefError::Domain(_) | PrefError::Usage(_) => 1,
    }
}

/// Parse a `key=value` file. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| PrefError::Usage(format!("config line {}: expected key=value", n + 1)))?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().map(|a| a.to_string_lossy().into_owned());
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Splice config-file values into `args` for every flag not given explicitly.
pub fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let values = parse_config(&fs::read_to_string(&path)?)?;
    let strings: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cmd = Cli::command();
    let Some((pos, sub)) = strings
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| cmd.find_subcommand(a).map(|s| (i, s)))
    else {
        return Ok(args);
    };
    let given = |name: &str| {
        let flag = format!("--{name}");
        strings
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
    };
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in &values {
        if key == "config" || given(key) {
            continue;
        }
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| PrefError::Usage(format!("unknown config key '{key}'")))?;
        if arg.get_action().takes_values() {
            extra.push(format!("--{key}").into());
            extra.push(value.into());
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => extra.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                other => return Err(PrefError::Usage(format!("config key '{key}': not a boolean '{other}'"))),
            }
        }
    }
    let mut merged = args;
    let tail = merged.split_off(pos + 1);
    merged.extend(extra);
    merged.extend(tail);
    Ok(merged)
}

/// Run with process arguments, returning the exit status.
pub fn main_with_args(args: Vec<OsString>) -> i32 {
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    if cli.threads > 0 {
        // a second build in the same process leaves the first pool in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let mut out = std::io::stdout().lock();
    match &cli.command {
        Command::FitImage(a) => fit_image(cli, a, &mut out),
        Command::FitSdf(a) => fit_sdf(cli, a, &mut out),
        Command::Extract(a) => extract(a, &mut out),
        Command::Filter(a) => filter(a, &mut out),
        Command::Eval(a) => eval(cli, a, &mut out),
        Command::Selftest => run_selftest(&mut out),
    }
}

fn emit(out: &mut impl Write, value: serde_json::Value) -> Result<()> {
    writeln!(out, "{value}")?;
    Ok(())
}

fn fit_image(cli: &Cli, a: &FitImageArgs, out: &mut impl Write) -> Result<i32> {
    let image = read_image(&a.input)?;
    let encoder = a.baseline.unwrap_or(EncoderKind::Pref);
    let mut cfg = ImageFitConfig::default().with_encoder(encoder);
    cfg.resolution = a.res;
    cfg.reduced = a.reduced;
    cfg.channels = a.channels;
    cfg.batch_size = a.batch;
    cfg.fit.iterations = a.iters;
    cfg.fit.loss = a.loss;
    if let Some(lr) = a.lr {
        cfg.fit.lr_encoder = LrSchedule::constant(lr);
    }
    cfg.fit.lr_mlp = LrSchedule::constant(a.lr_mlp);
    cfg.fit.lambda_parseval = a.lambda_parseval.unwrap_or(match a.mask {
        MaskKind::Full => 0.0,
        MaskKind::Regular4 => 1e-3,
    });
    cfg.fit.log_every = a.log_every.max(1);
    cfg.fit.record_time = cli.timing;
    cfg.fit.seed = cli.seed;
    let (w, h) = (image.width, image.height);
    let task = ImageTask::new(image, a.mask);
    let start = Instant::now();
    let outcome = image_fit(&task, &cfg)?;
    for r in &outcome.report.records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    outcome.checkpoint(w, h).save(&a.out)?;
    let mut summary = json!({
        "train_psnr": outcome.train_psnr,
        "test_psnr": outcome.test_psnr,
        "params": outcome.encoder.param_count(),
    });
    if cli.timing {
        summary["elapsed_s"] = json!(start.elapsed().as_secs_f64());
    }
    emit(out, summary)?;
    Ok(0)
}

fn load_reference(mesh: Option<&Path>) -> Result<MeshDistance> {
    let path = mesh.ok_or_else(|| PrefError::Usage("a reference mesh or --sphere is required".into()))?;
    let mut m = read_obj(path)?;
    if m.is_empty() {
        return Err(PrefError::Mesh(format!("{} has no faces", path.display())));
    }
    m.normalize(MESH_EXTENT);
    let d = MeshDistance::new(m)?;
    if !d.mesh().is_watertight() {
        eprintln!("warning: mesh is not watertight; inside/outside is decided by ray parity votes");
    }
    Ok(d)
}

fn fit_sdf(cli: &Cli, a: &FitSdfArgs, out: &mut impl Write) -> Result<i32> {
    let mut cfg = SdfFitConfig {
        resolution: a.res,
        reduced: a.reduced,
        channels: a.channels,
        samples: a.samples,
        batch_size: a.batch,
        ..SdfFitConfig::default()
    };
    let decay_at = a.iters * 13 / 20;
    cfg.fit.iterations = a.iters;
    cfg.fit.loss = a.loss;
    cfg.fit.lr_encoder = LrSchedule::step_decay(a.lr, decay_at, a.lr / 10.0);
    cfg.fit.lr_mlp = LrSchedule::step_decay(a.lr_mlp, decay_at, a.lr_mlp / 10.0);
    cfg.fit.lambda_parseval = a.lambda_parseval;
    if let Some(u) = &a.unlock {
        cfg.fit.unlock = UnlockSchedule::parse(u)?;
    }
    cfg.fit.log_every = a.log_every.max(1);
    cfg.fit.record_time = cli.timing;
    cfg.fit.seed = cli.seed;
    let outcome = match a.sphere {
        Some(r) => sdf_fit(&Sphere::new(r), &cfg)?,
        None => sdf_fit(&load_reference(a.mesh.as_deref())?, &cfg)?,
    };
    for r in &outcome.report.records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    outcome.checkpoint().save(&a.out)?;
    Ok(0)
}

fn sdf_checkpoint(path: &Path) -> Result<Checkpoint> {
    let ck = Checkpoint::load(path)?;
    match ck.task {
        TaskMeta::Image { .. } => Err(PrefError::Usage(format!(
            "{} holds an image model, not a signed distance field",
            path.display()
        ))),
        _ if ck.encoder.dims() != 3 || ck.mlp.output_dim() != 1 => Err(PrefError::Usage(format!(
            "{} is not a 3-D single-output model",
            path.display()
        ))),
        _ => Ok(ck),
    }
}

fn extract(a: &ExtractArgs, out: &mut impl Write) -> Result<i32> {
    let mut ck = sdf_checkpoint(&a.ckpt)?;
    let mesh = extract_mesh(&mut ck.encoder, &ck.mlp, a.res)?;
    if mesh.is_empty() {
        eprintln!("warning: the field has no zero crossing; wrote an empty mesh");
    }
    write_obj(&a.out, &mesh)?;
    emit(
        out,
        json!({"vertices": mesh.vertices.len(), "faces": mesh.faces.len(), "watertight": mesh.is_watertight()}),
    )?;
    Ok(0)
}

fn filter(a: &FilterArgs, out: &mut impl Write) -> Result<i32> {
    let mut ck = Checkpoint::load(&a.ckpt)?;
    match &mut ck.encoder {
        AnyEncoder::Pref(e) => apply_gaussian_filter(&mut e.volume, a.sigma)?,
        AnyEncoder::DenseGrid(_) => {
            return Err(PrefError::Usage("filtering needs a phasor-volume checkpoint".into()))
        }
    }
    ck.save(&a.out)?;
    emit(out, json!({"sigma": a.sigma}))?;
    Ok(0)
}

fn eval(cli: &Cli, a: &EvalArgs, out: &mut impl Write) -> Result<i32> {
    if let Some(path) = &a.image {
        let mut ck = Checkpoint::load(&a.ckpt)?;
        let image = read_image(path)?;
        let TaskMeta::Image { width, height, .. } = ck.task else {
            return Err(PrefError::Usage("checkpoint does not hold an image model".into()));
        };
        if (width as usize, height as usize) != (image.width, image.height) {
            return Err(PrefError::Usage(format!(
                "checkpoint was fit at {width}x{height}, image is {}x{}",
                image.width, image.height
            )));
        }
        let task = ImageTask::new(image, a.mask);
        let train = pixel_psnr(&mut ck.encoder, &ck.mlp, &task, &task.train_pixels())?;
        let test = pixel_psnr(&mut ck.encoder, &ck.mlp, &task, &task.test_pixels())?;
        emit(out, json!({"train_psnr": train, "test_psnr": test}))?;
        return Ok(0);
    }
    let mut ck = sdf_checkpoint(&a.ckpt)?;
    let (reference, source): (TriMesh, Box<dyn SdfSource>) = match a.sphere {
        Some(r) => {
            let s = Sphere::new(r);
            (TriMesh::icosphere(s.center, r, 5), Box::new(s))
        }
        None => {
            let d = load_reference(a.mesh.as_deref())?;
            (d.mesh().clone(), Box::new(d))
        }
    };
    let model = &mut ck.encoder;
    let score = iou(
        |p| predict_sdf(model, &ck.mlp, p),
        |p| Ok(p.iter().map(|&q| source.signed_distance(q)).collect()),
        a.iou_res,
    )?;
    let extracted = extract_mesh(&mut ck.encoder, &ck.mlp, a.extract_res)?;
    let chamfer = if extracted.is_empty() {
        eprintln!("warning: the field has no zero crossing; Chamfer distance is undefined");
        None
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed ^ 0x5eed_0003);
        Some(chamfer_l1(&extracted, &reference, a.chamfer_samples, &mut rng)?)
    };
    emit(out, json!({"iou": score, "chamfer_l1": chamfer}))?;
    Ok(0)
}

fn run_selftest(out: &mut impl Write) -> Result<i32> {
    let checks = selftest::run_all()?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        writeln!(out, "{c}")?;
    }
    writeln!(out, "{} checks, {} failed", checks.len(), failed)?;
    Ok(if failed == 0 { 0 } else { 3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_parsing() {
        let m = parse_config("# c\nres = 64\n\nlambda_parseval=0.5\n").unwrap();
        assert_eq!(m["res"], "64");
        assert_eq!(m["lambda-parseval"], "0.5");
        assert!(parse_config("novalue").is_err());
    }

    #[test]
    fn flags_beat_config_beat_defaults() {
        let dir = std::env::temp_dir().join(format!("pref-cli-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let cfg = dir.join("run.cfg");
        fs::write(&cfg, "res=64\nreduced=5\ntiming=true\n").unwrap();
        let c = cfg.to_str().unwrap();
        let args = merge_config(os(&[
            "pref", "--config", c, "fit-image", "--input", "a.png", "--out", "b", "--res", "32",
        ]))
        .unwrap();
        let cli = Cli::try_parse_from(args).unwrap();
        assert!(cli.timing);
        let Command::FitImage(a) = cli.command else { panic!() };
        assert_eq!(a.res, 32);
        assert_eq!(a.reduced, 5);
        assert_eq!(a.channels, 8);
        fs::write(&cfg, "bogus=1\n").unwrap();
        assert!(merge_config(os(&["pref", "--config", c, "selftest"])).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(exit_code(&PrefError::Usage(String::new())), 1);
        assert_eq!(exit_code(&PrefError::Io(std::io::Error::other("x"))), 2);
        assert_eq!(exit_code(&PrefError::Numeric(String::new())), 3);
        assert_eq!(main_with_args(os(&["pref", "fit-image"])), 1);
        assert_eq!(main_with_args(os(&["pref", "extract", "--ckpt", "/nonexistent", "--out", "x"])), 2);
    }
}
