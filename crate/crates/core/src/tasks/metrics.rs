//! Shape metrics: occupancy IoU and Chamfer distance.

use rand_chacha::ChaCha8Rng;

use super::mesh::{sub, TriMesh, Vec3};
use crate::error::{PrefError, Result};

/// Cell-center lattice of `res^3` points over `[-1, 1]^3`, x fastest.
pub fn cell_centers(res: usize) -> Vec<Vec3> {
    let c = |i: usize| -1.0 + (i as f64 + 0.5) * 2.0 / res as f64;
    let mut out = Vec::with_capacity(res * res * res);
    for k in 0..res {
        for j in 0..res {
            for i in 0..res {
                out.push([c(i), c(j), c(k)]);
            }
        }
    }
    out
}

/// Intersection over union of the `f < 0` regions of two fields sampled at
/// `res^3` cell centers. Two empty occupancies count as identical.
pub fn iou<A, B>(field_a: A, field_b: B, res: usize) -> Result<f64>
where
    A: FnOnce(&[Vec3]) -> Result<Vec<f64>>,
    B: FnOnce(&[Vec3]) -> Result<Vec<f64>>,
{
    if res == 0 {
        return Err(PrefError::Domain("IoU lattice must be non-empty".into()));
    }
    let pts = cell_centers(res);
    let a = field_a(&pts)?;
    let b = field_b(&pts)?;
    if a.len() != pts.len() || b.len() != pts.len() {
        return Err(PrefError::Dimension("sampler returned wrong count".into()));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (x, y) in a.iter().zip(&b) {
        let (ia, ib) = (*x < 0.0, *y < 0.0);
        inter += usize::from(ia && ib);
        union += usize::from(ia || ib);
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Static 3-D k-d tree for nearest-neighbor queries.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    /// Implicit balanced tree: `points[lo..hi]` split at the median of `axis`.
    axes: Vec<u8>,
}

impl KdTree {
    pub fn new(mut points: Vec<Vec3>) -> Self {
        let mut axes = vec![0u8; points.len()];
        Self::build(&mut points, &mut axes, 0);
        Self { points, axes }
    }

    fn build(pts: &mut [Vec3], axes: &mut [u8], depth: usize) {
        if pts.len() <= 1 {
            return;
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for p in pts.iter() {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(depth % 3);
        let mid = pts.len() / 2;
        pts.select_nth_unstable_by(mid, |x, y| x[axis].total_cmp(&y[axis]));
        axes[mid] = axis as u8;
        let (lp, rp) = pts.split_at_mut(mid);
        let (la, ra) = axes.split_at_mut(mid);
        Self::build(lp, la, depth + 1);
        Self::build(&mut rp[1..], &mut ra[1..], depth + 1);
    }

    /// Euclidean distance to the nearest stored point.
    pub fn nearest_distance(&self, q: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        self.search(0, self.points.len(), q, &mut best);
        best.sqrt()
    }

    fn search(&self, lo: usize, hi: usize, q: Vec3, best: &mut f64) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = self.points[mid];
        let d = sub(p, q);
        let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        if d2 < *best {
            *best = d2;
        }
        if hi - lo == 1 {
            return;
        }
        let axis = self.axes[mid] as usize;
        let delta = q[axis] - p[axis];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, q, best);
        if delta * delta < *best {
            self.search(far.0, far.1, q, best);
        }
    }
}

/// Symmetric Chamfer distance between `samples` area-weighted surface points
/// of each mesh: the average of the two mean nearest-neighbor Euclidean
/// distances.
pub fn chamfer_l1(a: &TriMesh, b: &TriMesh, samples: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(PrefError::Mesh("Chamfer distance is undefined for an empty mesh".into()));
    }
    let pa = a.sample_surface(samples, rng)?;
    let pb = b.sample_surface(samples, rng)?;
    Ok(chamfer_points(&pa, &pb))
}

pub fn chamfer_points(pa: &[Vec3], pb: &[Vec3]) -> f64 {
    let ta = KdTree::new(pa.to_vec());
    let tb = KdTree::new(pb.to_vec());
    let ab: f64 = pa.iter().map(|&p| tb.nearest_distance(p)).sum::<f64>() / pa.len() as f64;
    let ba: f64 = pb.iter().map(|&p| ta.nearest_distance(p)).sum::<f64>() / pb.len() as f64;
    0.5 * (ab + ba)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::mesh::norm;
    use rand::{Rng, SeedableRng};

    fn sphere(r: f64) -> impl FnOnce(&[Vec3]) -> Result<Vec<f64>> {
        move |p: &[Vec3]| Ok(p.iter().map(|&x| norm(x) - r).collect())
    }

    #[test]
    fn iou_cases() {
        assert_eq!(iou(sphere(0.5), sphere(0.5), 32).unwrap(), 1.0);
        let disjoint = |p: &[Vec3]| Ok(p.iter().map(|x| if x[0] < 0.0 { -1.0 } else { 1.0 }).collect());
        let other = |p: &[Vec3]| Ok(p.iter().map(|x| if x[0] > 0.0 { -1.0 } else { 1.0 }).collect());
        assert_eq!(iou(disjoint, other, 16).unwrap(), 0.0);
        let v = iou(sphere(0.5), sphere(0.45), 128).unwrap();
        assert!((v - 0.729).abs() < 0.01, "{v}");
    }

    #[test]
    fn kdtree_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec3> = (0..500).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let t = KdTree::new(pts.clone());
        for _ in 0..100 {
            let q: Vec3 = [rng.gen(), rng.gen(), rng.gen()];
            let brute = pts.iter().map(|&p| norm(sub(p, q))).fold(f64::INFINITY, f64::min);
            assert!((t.nearest_distance(q) - brute).abs() < 1e-15);
        }
    }

    #[test]
    fn chamfer_of_identical_and_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = TriMesh::icosphere([0.0; 3], 0.5, 3);
        let same = chamfer_l1(&a, &a, 5000, &mut rng).unwrap();
        let b = TriMesh::icosphere([0.0; 3], 0.4, 3);
        let diff = chamfer_l1(&a, &b, 5000, &mut rng).unwrap();
        assert!(same < 0.02, "{same}");
        assert!((diff - 0.1).abs() < 0.01, "{diff}");
        assert!(chamfer_l1(&a, &TriMesh::default(), 10, &mut rng).is_err());
    }
}
