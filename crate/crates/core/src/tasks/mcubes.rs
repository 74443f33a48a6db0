//! Marching cubes over a sampled scalar field.
//!
//! The per-configuration triangulation is derived at first use: crossing
//! edges on each cube face are joined into segments (ambiguous faces keep
//! inside corners apart), segments are chained into closed loops, and each
//! loop is fanned into triangles wound so normals point toward positive values.

use std::collections::HashMap;
use std::sync::OnceLock;

use super::mesh::{add, cross, dot, scale, sub, TriMesh, Vec3};
use crate::error::{PrefError, Result};

/// Corner `c` sits at `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner_pos(c: usize) -> [f64; 3] {
    [(c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64]
}

fn edges() -> Vec<(usize, usize)> {
    let mut e = Vec::with_capacity(12);
    for a in 0..8 {
        for bit in [1, 2, 4] {
            if a & bit == 0 {
                e.push((a, a | bit));
            }
        }
    }
    e
}

/// Corners of the six faces in cyclic order.
const FACES: [[usize; 4]; 6] = [
    [0, 2, 6, 4],
    [1, 3, 7, 5],
    [0, 1, 5, 4],
    [2, 3, 7, 6],
    [0, 1, 3, 2],
    [4, 5, 7, 6],
];

struct Table {
    edges: Vec<(usize, usize)>,
    /// For each inside-corner bitmask, loops of edge indices rotated so a fan
    /// from the first entry adds no diagonal lying in a cube face. Loops
    /// where no such rotation exists are flagged for a center vertex.
    loops: Vec<Vec<(Vec<usize>, bool)>>,
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

fn build_table() -> Table {
    let edges = edges();
    let edge_of = |a: usize, b: usize| {
        edges
            .iter()
            .position(|&(x, y)| (x, y) == (a.min(b), a.max(b)))
            .unwrap()
    };
    let mut loops = Vec::with_capacity(256);
    for config in 0..256usize {
        let inside = |c: usize| (config >> c) & 1 == 1;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); 12];
        for face in FACES {
            // crossing edge k joins face[k] and face[k+1]
            let crossing: Vec<usize> = (0..4)
                .filter(|&k| inside(face[k]) != inside(face[(k + 1) % 4]))
                .collect();
            let pairs: Vec<(usize, usize)> = match crossing.len() {
                2 => vec![(crossing[0], crossing[1])],
                4 => {
                    // pair the two crossings around each inside corner
                    let first_in = (0..4).find(|&k| inside(face[k])).unwrap();
                    let around = |c: usize| ((c + 3) % 4, c);
                    vec![around(first_in), around((first_in + 2) % 4)]
                }
                _ => Vec::new(),
            };
            for (p, q) in pairs {
                let ep = edge_of(face[p], face[(p + 1) % 4]);
                let eq = edge_of(face[q], face[(q + 1) % 4]);
                adj[ep].push(eq);
                adj[eq].push(ep);
            }
        }
        let mut seen = [false; 12];
        let mut config_loops = Vec::new();
        for start in 0..12 {
            if seen[start] || adj[start].is_empty() {
                continue;
            }
            let mut lp = vec![start];
            seen[start] = true;
            let mut prev = start;
            let mut cur = adj[start][0];
            while cur != start {
                seen[cur] = true;
                lp.push(cur);
                let next = if adj[cur][0] != prev { adj[cur][0] } else { adj[cur][1] };
                prev = cur;
                cur = next;
            }
            // orient: polygon normal should follow inside -> outside
            let mid = |e: usize| {
                let (a, b) = edges[e];
                scale(add(corner_pos(a), corner_pos(b)), 0.5)
            };
            let mut normal = [0.0; 3];
            for i in 0..lp.len() {
                normal = add(normal, cross(mid(lp[i]), mid(lp[(i + 1) % lp.len()])));
            }
            let mut outward = [0.0; 3];
            for &e in &lp {
                let (a, b) = edges[e];
                let (i, o) = if inside(a) { (a, b) } else { (b, a) };
                outward = add(outward, sub(corner_pos(o), corner_pos(i)));
            }
            if dot(normal, outward) < 0.0 {
                lp.reverse();
            }
            let on_face = |e: usize, f: usize| {
                let (a, b) = edges[e];
                FACES.iter().any(|face| [a, b, edges[f].0, edges[f].1].iter().all(|c| face.contains(c)))
            };
            let n = lp.len();
            let rotation = (0..n).find(|&r| (2..n - 1).all(|m| !on_face(lp[r], lp[(r + m) % n])));
            match rotation {
                Some(r) => {
                    lp.rotate_left(r);
                    config_loops.push((lp, false));
                }
                None => config_loops.push((lp, true)),
            }
        }
        loops.push(config_loops);
    }
    Table { edges, loops }
}

/// Axis-aligned sampling lattice: `res` points per axis spanning `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub lo: Vec3,
    pub hi: Vec3,
    pub res: usize,
}

impl Lattice {
    pub fn cube(res: usize) -> Self {
        Self {
            lo: [-1.0; 3],
            hi: [1.0; 3],
            res,
        }
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let t = |a: usize, n: usize| self.lo[a] + (self.hi[a] - self.lo[a]) * n as f64 / (self.res - 1) as f64;
        [t(0, i), t(1, j), t(2, k)]
    }

    /// All lattice points, x fastest.
    pub fn points(&self) -> Vec<Vec3> {
        let r = self.res;
        let mut out = Vec::with_capacity(r * r * r);
        for k in 0..r {
            for j in 0..r {
                for i in 0..r {
                    out.push(self.point(i, j, k));
                }
            }
        }
        out
    }
}

/// Extract the zero level set of a field. `sampler` receives all lattice
/// points (x fastest) and returns one value per point; negative is inside.
pub fn marching_cubes<F>(sampler: F, lattice: Lattice) -> Result<TriMesh>
where
    F: FnOnce(&[Vec3]) -> Result<Vec<f64>>,
{
    let r = lattice.res;
    if r < 16 {
        return Err(PrefError::Domain(format!(
            "marching cubes needs res >= 16, got {r}"
        )));
    }
    let points = lattice.points();
    let values = sampler(&points)?;
    if values.len() != points.len() {
        return Err(PrefError::Dimension("sampler returned wrong count".into()));
    }
    let at = |i: usize, j: usize, k: usize| (k * r + j) * r + i;
    let t = table();
    let mut mesh = TriMesh::default();
    let mut vertex_of: HashMap<(usize, usize), u32> = HashMap::new();
    for k in 0..r - 1 {
        for j in 0..r - 1 {
            for i in 0..r - 1 {
                let corner = |c: usize| at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                let mut config = 0usize;
                for c in 0..8 {
                    if values[corner(c)] < 0.0 {
                        config |= 1 << c;
                    }
                }
                if config == 0 || config == 255 {
                    continue;
                }
                for (lp, centered) in &t.loops[config] {
                    let ids: Vec<u32> = lp
                        .iter()
                        .map(|&e| {
                            let (a, b) = t.edges[e];
                            let (ga, gb) = (corner(a), corner(b));
                            *vertex_of.entry((ga, gb)).or_insert_with(|| {
                                let (fa, fb) = (values[ga], values[gb]);
                                let s = fa / (fa - fb);
                                let (pa, pb) = (points[ga], points[gb]);
                                mesh.vertices.push(add(pa, scale(sub(pb, pa), s)));
                                (mesh.vertices.len() - 1) as u32
                            })
                        })
                        .collect();
                    if *centered {
                        let mut c = [0.0; 3];
                        for &v in &ids {
                            c = add(c, mesh.vertices[v as usize]);
                        }
                        mesh.vertices.push(scale(c, 1.0 / ids.len() as f64));
                        let center = (mesh.vertices.len() - 1) as u32;
                        for m in 0..ids.len() {
                            mesh.faces.push([center, ids[m], ids[(m + 1) % ids.len()]]);
                        }
                    } else {
                        for m in 1..ids.len() - 1 {
                            mesh.faces.push([ids[0], ids[m], ids[m + 1]]);
                        }
                    }
                }
            }
        }
    }
    Ok(mesh)
}
