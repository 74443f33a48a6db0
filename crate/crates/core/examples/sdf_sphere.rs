//! Fit the signed distance of a sphere, score it and extract a mesh.
//!
//! cargo run --release --example sdf_sphere [mesh.obj]

use pref::tasks::{
    chamfer_l1, extract_mesh, iou, predict_sdf, read_obj, sdf_fit, write_obj, MeshDistance, SdfFitConfig,
    SdfSource, Sphere, TriMesh,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pref::Result<()> {
    let cfg = SdfFitConfig::default();
    let (source, reference): (Box<dyn SdfSource>, TriMesh) = match std::env::args().nth(1) {
        Some(path) => {
            let mut mesh = read_obj(path.as_ref())?;
            mesh.normalize(0.9);
            let d = MeshDistance::new(mesh)?;
            let m = d.mesh().clone();
            (Box::new(d), m)
        }
        None => (Box::new(Sphere::new(0.5)), TriMesh::icosphere([0.0; 3], 0.5, 5)),
    };

    let mut fit = sdf_fit(source.as_ref(), &cfg)?;
    for r in &fit.report.records {
        println!("step {:>5}  loss {:.4e}", r.step, r.loss);
    }
    let (enc, mlp) = (&mut fit.encoder, &fit.mlp);
    let score = iou(
        |p| predict_sdf(enc, mlp, p),
        |p| Ok(p.iter().map(|&q| source.signed_distance(q)).collect()),
        64,
    )?;
    let mesh = extract_mesh(&mut fit.encoder, &fit.mlp, 128)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let chamfer = chamfer_l1(&mesh, &reference, 100_000, &mut rng)?;
    println!("IoU {score:.4}  Chamfer-L1 {chamfer:.3e}  faces {}", mesh.faces.len());

    let path = std::env::temp_dir().join("pref_sdf.obj");
    write_obj(&path, &mesh)?;
    println!("wrote {}", path.display());
    Ok(())
}
