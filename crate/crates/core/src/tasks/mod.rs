//! Task pipelines: image fitting, SDF regression, meshes and metrics.

pub mod image;
pub mod imageio;
pub mod mcubes;
pub mod mesh;
pub mod metrics;
pub mod sdf;

pub use image::{
    image_fit, image_fit_from, pixel_coords, pixel_psnr, predict_pixels, render, synthetic_image,
    default_encoder_lr, EncoderKind, ImageFitConfig, ImageFitOutcome, ImageTask, MaskKind, PixelBatches,
};
pub use imageio::{read_image, write_image, write_pgm, write_png, Image};
pub use mcubes::{marching_cubes, Lattice};
pub use mesh::{parse_obj, read_obj, write_obj, MeshDistance, SignMethod, TriMesh, Vec3};
pub use sdf::{
    extract_mesh, predict_sdf, sdf_fit, sdf_fit_samples, sdf_smooth, sdf_sample, unit_coords, BumpySphere, Provenance,
    SdfBatches, SdfFitConfig, SdfFitOutcome, SdfSampleSet, SdfSource, Sphere,
};
pub use metrics::{cell_centers, chamfer_l1, chamfer_points, iou, KdTree};
