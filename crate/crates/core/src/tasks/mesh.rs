//! Triangle meshes: OBJ I/O, surface sampling, closest points and inside tests.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{PrefError, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
#[inline]
pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
#[inline]
pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}
#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
#[inline]
pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
#[inline]
pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.triangle_area(f)).sum()
    }

    /// Signed enclosed volume; positive for outward-facing triangles.
    pub fn signed_volume(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for v in &self.vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        Some((lo, hi))
    }

    /// Uniformly scale and translate so the bounding box is centered at the
    /// origin with its longest side spanning `2 * extent`.
    pub fn normalize(&mut self, extent: f64) {
        let Some((lo, hi)) = self.bounds() else {
            return;
        };
        let center = scale(add(lo, hi), 0.5);
        let size = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        if size <= 0.0 {
            return;
        }
        let s = 2.0 * extent / size;
        for v in &mut self.vertices {
            *v = scale(sub(*v, center), s);
        }
    }

    /// Every undirected edge is shared by exactly two faces with opposite
    /// directions.
    pub fn is_watertight(&self) -> bool {
        if self.faces.is_empty() {
            return false;
        }
        let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
        for f in &self.faces {
            for e in 0..3 {
                *directed.entry((f[e], f[(e + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// Area-weighted uniform samples on the surface.
    pub fn sample_surface<R: Rng>(&self, count: usize, rng: &mut R) -> Result<Vec<Vec3>> {
        let mut cdf = Vec::with_capacity(self.faces.len());
        let mut total = 0.0;
        for f in 0..self.faces.len() {
            total += self.triangle_area(f);
            cdf.push(total);
        }
        if total <= 0.0 {
            return Err(PrefError::Mesh("cannot sample a mesh with zero area".into()));
        }
        Ok((0..count)
            .map(|_| {
                let t = rng.gen::<f64>() * total;
                let f = cdf.partition_point(|&c| c < t).min(cdf.len() - 1);
                let [a, b, c] = self.triangle(f);
                let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                add(a, add(scale(sub(b, a), u), scale(sub(c, a), v)))
            })
            .collect())
    }

    /// Icosahedron subdivided `levels` times and projected onto a sphere.
    pub fn icosphere(center: Vec3, radius: f64, levels: usize) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = vec![
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ];
        for v in &mut verts {
            *v = scale(*v, 1.0 / norm(*v));
        }
        let mut faces: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..levels {
            let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
            let mut next = Vec::with_capacity(faces.len() * 4);
            let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
                let key = (a.min(b), a.max(b));
                *mid.entry(key).or_insert_with(|| {
                    let m = scale(add(verts[a as usize], verts[b as usize]), 0.5);
                    verts.push(scale(m, 1.0 / norm(m)));
                    (verts.len() - 1) as u32
                })
            };
            for &[a, b, c] in &faces {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let vertices = verts
            .into_iter()
            .map(|v| add(center, scale(v, radius)))
            .collect();
        Self { vertices, faces }
    }
}

/// Parse Wavefront OBJ text (vertices and faces; polygons are fan-triangulated).
pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut mesh = TriMesh::default();
    for (lineno, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let bad = |what: &str| PrefError::Mesh(format!("line {}: {what}", lineno + 1));
        match it.next() {
            Some("v") => {
                let mut v = [0.0; 3];
                for c in &mut v {
                    *c = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad("bad vertex"))?;
                }
                mesh.vertices.push(v);
            }
            Some("f") => {
                let n = mesh.vertices.len() as i64;
                let idx: Vec<u32> = it
                    .map(|t| {
                        let i: i64 = t
                            .split('/')
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| bad("bad face index"))?;
                        let i = if i < 0 { n + i } else { i - 1 };
                        if i < 0 || i >= n {
                            return Err(bad("face index out of range"));
                        }
                        Ok(i as u32)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(bad("face with fewer than 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    mesh.faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}

pub fn read_obj(path: &Path) -> Result<TriMesh> {
    parse_obj(&std::fs::read_to_string(path)?)
}

pub fn obj_string(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn write_obj(path: &Path, mesh: &TriMesh) -> Result<()> {
    std::fs::write(path, obj_string(mesh))?;
    Ok(())
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return add(a, scale(ab, d1 / (d1 - d3)));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return add(a, scale(ac, d2 / (d2 - d6)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return add(b, scale(sub(c, b), (d4 - d3) / ((d4 - d3) + (d5 - d6))));
    }
    let denom = 1.0 / (va + vb + vc);
    add(a, add(scale(ab, vb * denom), scale(ac, vc * denom)))
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: [f64::INFINITY; 3],
            hi: [f64::NEG_INFINITY; 3],
        }
    }
    fn grow(&mut self, p: Vec3) {
        for a in 0..3 {
            self.lo[a] = self.lo[a].min(p[a]);
            self.hi[a] = self.hi[a].max(p[a]);
        }
    }
    fn dist2(&self, p: Vec3) -> f64 {
        let mut d = 0.0;
        for a in 0..3 {
            let e = (self.lo[a] - p[a]).max(0.0).max(p[a] - self.hi[a]);
            d += e * e;
        }
        d
    }
    /// Does the ray `o + t d` (t > 0) hit the box?
    fn hit_ray(&self, o: Vec3, inv_d: Vec3) -> bool {
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for a in 0..3 {
            let ta = (self.lo[a] - o[a]) * inv_d[a];
            let tb = (self.hi[a] - o[a]) * inv_d[a];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
        t0 <= t1
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// How the inside/outside sign of a query is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMethod {
    /// Generalized winding number (closed meshes).
    Winding,
    /// Majority vote of ray-crossing parities along three axes (open meshes).
    ParityVote,
}

/// Signed distance queries against a triangle mesh (negative inside).
#[derive(Debug, Clone)]
pub struct MeshDistance {
    mesh: TriMesh,
    nodes: Vec<Node>,
    order: Vec<usize>,
    sign: SignMethod,
}

const LEAF_SIZE: usize = 4;

impl MeshDistance {
    pub fn new(mesh: TriMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(PrefError::Mesh("mesh has no faces".into()));
        }
        let sign = if mesh.is_watertight() {
            SignMethod::Winding
        } else {
            SignMethod::ParityVote
        };
        let mut order: Vec<usize> = (0..mesh.faces.len()).collect();
        let centroids: Vec<Vec3> = (0..mesh.faces.len())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                scale(add(a, add(b, c)), 1.0 / 3.0)
            })
            .collect();
        let mut nodes = Vec::new();
        build(&mesh, &centroids, &mut order, 0, mesh.faces.len(), &mut nodes);
        Ok(Self {
            mesh,
            nodes,
            order,
            sign,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn sign_method(&self) -> SignMethod {
        self.sign
    }

    /// Closest surface point and its distance.
    pub fn closest(&self, p: Vec3) -> (Vec3, f64) {
        let mut best = (p, f64::INFINITY);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            if self.nodes[n].bounds().dist2(p) >= best.1 {
                continue;
            }
            match &self.nodes[n] {
                Node::Leaf { start, end, .. } => {
                    for &f in &self.order[*start..*end] {
                        let [a, b, c] = self.mesh.triangle(f);
                        let q = closest_point_on_triangle(p, a, b, c);
                        let d = sub(p, q);
                        let d2 = dot(d, d);
                        if d2 < best.1 {
                            best = (q, d2);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[*left].bounds().dist2(p);
                    let dr = self.nodes[*right].bounds().dist2(p);
                    if dl < dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        (best.0, best.1.sqrt())
    }

    pub fn unsigned_distance(&self, p: Vec3) -> f64 {
        self.closest(p).1
    }

    /// Generalized winding number (1 inside, 0 outside for closed meshes).
    pub fn winding_number(&self, p: Vec3) -> f64 {
        let mut total = 0.0;
        for f in 0..self.mesh.faces.len() {
            let [a, b, c] = self.mesh.triangle(f);
            let (a, b, c) = (sub(a, p), sub(b, p), sub(c, p));
            let (la, lb, lc) = (norm(a), norm(b), norm(c));
            let num = dot(a, cross(b, c));
            let den = la * lb * lc + dot(a, b) * lc + dot(b, c) * la + dot(c, a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    fn ray_crossings(&self, o: Vec3, axis: usize) -> usize {
        let mut d = [0.0; 3];
        d[axis] = 1.0;
        let inv = [1.0 / d[0], 1.0 / d[1], 1.0 / d[2]];
        let mut count = 0;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            if !self.nodes[n].bounds().hit_ray(o, inv) {
                continue;
            }
            match &self.nodes[n] {
                Node::Leaf { start, end, .. } => {
                    for &f in &self.order[*start..*end] {
                        let [a, b, c] = self.mesh.triangle(f);
                        if ray_hits_triangle(o, d, a, b, c) {
                            count += 1;
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
        count
    }

    pub fn is_inside(&self, p: Vec3) -> bool {
        match self.sign {
            SignMethod::Winding => self.winding_number(p) > 0.5,
            SignMethod::ParityVote => {
                // slightly skewed origin avoids rays grazing shared edges
                let o = add(p, [1.3e-9, 2.9e-9, 4.1e-9]);
                (0..3).filter(|&a| self.ray_crossings(o, a) % 2 == 1).count() >= 2
            }
        }
    }

    pub fn signed_distance(&self, p: Vec3) -> f64 {
        let d = self.unsigned_distance(p);
        if self.is_inside(p) {
            -d
        } else {
            d
        }
    }
}

fn ray_hits_triangle(o: Vec3, d: Vec3, a: Vec3, b: Vec3, c: Vec3) -> bool {
    let e1 = sub(b, a);
    let e2 = sub(c, a);
    let h = cross(d, e2);
    let det = dot(e1, h);
    if det.abs() < 1e-14 {
        return false;
    }
    let inv = 1.0 / det;
    let s = sub(o, a);
    let u = dot(s, h) * inv;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = cross(s, e1);
    let v = dot(d, q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    dot(e2, q) * inv > 0.0
}

fn build(
    mesh: &TriMesh,
    centroids: &[Vec3],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &f in &order[start..end] {
        for v in mesh.triangle(f) {
            bounds.grow(v);
        }
        cbounds.grow(centroids[f]);
    }
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return id;
    }
    let axis = (0..3)
        .max_by(|&a, &b| {
            (cbounds.hi[a] - cbounds.lo[a]).total_cmp(&(cbounds.hi[b] - cbounds.lo[b]))
        })
        .unwrap();
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&x, &y| {
        centroids[x][axis].total_cmp(&centroids[y][axis])
    });
    nodes.push(Node::Leaf {
        bounds,
        start,
        end,
    });
    let left = build(mesh, centroids, order, start, mid, nodes);
    let right = build(mesh, centroids, order, mid, end, nodes);
    nodes[id] = Node::Inner {
        bounds,
        left,
        right,
    };
    id
}
