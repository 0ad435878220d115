//! Triangle meshes, marching-cubes extraction and one-ring adjacency.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ScalarField3D;
use crate::mc_tables::{CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE};

/// Vertices closer than this to a grid node are moved onto it and shared.
pub const SNAP_DISTANCE: f64 = 1e-6;
/// Triangles with a smaller area are dropped.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

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

/// Indexed triangle mesh with counter-clockwise faces seen from outside.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::Shape(format!("triangle {t:?} indexes past {n} vertices")));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite vertex coordinate".into()));
        }
        Ok(TriMesh {
            vertices,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Undirected edges with the number of incident triangles.
    pub fn edge_counts(&self) -> BTreeMap<(usize, usize), usize> {
        let mut m = BTreeMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    /// `V − E + F` over the vertices referenced by triangles.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_counts().len() as i64 + self.triangles.len() as i64
    }

    /// True when every edge has exactly two incident triangles.
    pub fn is_closed(&self) -> bool {
        !self.triangles.is_empty() && self.edge_counts().values().all(|&c| c == 2)
    }

    /// True when every interior edge is traversed once in each direction.
    pub fn is_consistently_oriented(&self) -> bool {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                *directed.entry((t[e], t[(e + 1) % 3])).or_insert(0) += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &c)| c == 1 && directed.get(&(b, a)).is_none_or(|&r| r == 1))
    }

    /// Signed enclosed volume; positive for outward-oriented closed meshes.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i]);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    /// Applies `v ↦ s·R·v + t` to every vertex.
    pub fn transformed(&self, s: f64, rotation: [[f64; 3]; 3], t: Vec3) -> TriMesh {
        let vertices = self
            .vertices
            .iter()
            .map(|v| {
                let r = [dot(rotation[0], *v), dot(rotation[1], *v), dot(rotation[2], *v)];
                add(scale(r, s), t)
            })
            .collect();
        TriMesh {
            vertices,
            triangles: self.triangles.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> TriMesh {
        self.transformed(s, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [0.0; 3])
    }

    /// Reverses every triangle.
    pub fn flipped(&self) -> TriMesh {
        TriMesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect(),
        }
    }

    /// ASCII OBJ with `v` and `f` records.
    pub fn to_obj_string(&self) -> String {
        let mut s = String::with_capacity(40 * (self.vertices.len() + self.triangles.len()));
        for v in &self.vertices {
            let _ = writeln!(s, "v {:.9} {:.9} {:.9}", v[0], v[1], v[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }

    pub fn write_obj(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_obj_string()).map_err(|e| Error::io(path, e))
    }

    /// Reads the `v`/`f` subset of OBJ; polygons with more than three corners are
    /// fanned into triangles, texture/normal indices are ignored.
    pub fn read_obj(path: &Path) -> Result<TriMesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_obj(&text, path)
    }

    pub fn parse_obj(text: &str, path: &Path) -> Result<TriMesh> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let field = format!("line {}", lineno + 1);
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let xyz: Vec<f64> = parts
                        .take(3)
                        .map(|p| p.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::format(path, &field, format!("bad vertex: {e}")))?;
                    if xyz.len() != 3 {
                        return Err(Error::format(path, field, "vertex needs 3 coordinates"));
                    }
                    vertices.push([xyz[0], xyz[1], xyz[2]]);
                }
                Some("f") => {
                    let idx: Vec<usize> = parts
                        .map(|p| {
                            let first = p.split('/').next().unwrap_or("");
                            match first.parse::<i64>() {
                                Ok(i) if i >= 1 => Ok(i as usize - 1),
                                Ok(i) if i < 0 && (-i) as usize <= vertices.len() => {
                                    Ok(vertices.len() - (-i) as usize)
                                }
                                _ => Err(Error::format(path, &field, format!("bad face index `{p}`"))),
                            }
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() < 3 {
                        return Err(Error::format(path, field, "face needs at least 3 vertices"));
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        TriMesh::new(vertices, triangles).map_err(|e| Error::format(path, "faces", e.to_string()))
    }
}

/// Per-vertex one-ring structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    /// Neighbouring vertices, in cyclic counter-clockwise order when the ring is a
    /// single fan.
    pub neighbours: Vec<Vec<usize>>,
    /// Incident triangles.
    pub triangles: Vec<Vec<usize>>,
    /// Vertices on an edge with a single incident triangle, or whose triangles do not
    /// form one closed fan.
    pub boundary: Vec<bool>,
}

/// One-ring tables; fails on edges shared by more than two triangles.
pub fn build_adjacency(mesh: &TriMesh) -> Result<Adjacency> {
    let bad: Vec<(usize, usize)> = mesh
        .edge_counts()
        .into_iter()
        .filter(|&(_, c)| c > 2)
        .map(|(e, _)| e)
        .collect();
    if !bad.is_empty() {
        return Err(Error::NonManifold { edges: bad });
    }
    let n = mesh.vertices.len();
    let mut tris = vec![Vec::new(); n];
    // for each vertex: (next, prev) pairs walking counter-clockwise around it
    let mut fans: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (ti, t) in mesh.triangles.iter().enumerate() {
        for e in 0..3 {
            let v = t[e];
            tris[v].push(ti);
            fans[v].push((t[(e + 1) % 3], t[(e + 2) % 3]));
        }
    }
    let mut neighbours = Vec::with_capacity(n);
    let mut boundary = vec![false; n];
    for v in 0..n {
        let fan = &fans[v];
        if fan.is_empty() {
            neighbours.push(Vec::new());
            continue;
        }
        let next: HashMap<usize, usize> = fan.iter().copied().collect();
        let has_pred: std::collections::HashSet<usize> = fan.iter().map(|&(_, b)| b).collect();
        let start = fan
            .iter()
            .map(|&(a, _)| a)
            .find(|a| !has_pred.contains(a))
            .unwrap_or(fan[0].0);
        let open = !has_pred.contains(&start) || next.len() != fan.len();
        let mut ring = vec![start];
        let mut cur = start;
        while let Some(&nx) = next.get(&cur) {
            if nx == start || ring.len() > fan.len() {
                break;
            }
            ring.push(nx);
            cur = nx;
        }
        let closed_fan = !open && ring.len() == fan.len() && next.get(&cur) == Some(&start);
        if !closed_fan {
            boundary[v] = true;
            let mut all: Vec<usize> = fan.iter().flat_map(|&(a, b)| [a, b]).collect();
            all.sort_unstable();
            all.dedup();
            if ring.len() != all.len() {
                ring = all;
            }
        }
        neighbours.push(ring);
    }
    Ok(Adjacency {
        neighbours,
        triangles: tris,
        boundary,
    })
}

/// Area-weighted unit vertex normals (zero for isolated vertices).
pub fn vertex_normals(mesh: &TriMesh) -> Vec<Vec3> {
    let mut acc = vec![[0.0; 3]; mesh.vertices.len()];
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| mesh.vertices[i]);
        // |cross| = 2·area, so this is area weighting
        let n = cross(sub(b, a), sub(c, a));
        for &i in t {
            acc[i] = add(acc[i], n);
        }
    }
    acc.into_iter()
        .map(|n| {
            let l = norm(n);
            if l > 0.0 {
                scale(n, 1.0 / l)
            } else {
                n
            }
        })
        .collect()
}

/// Marching cubes over the cells between voxel centres.
///
/// Voxels with `u ≥ level` are inside; triangles face towards `u < level`. Grid
/// edges are not wrapped periodically, so surfaces reaching the outermost voxel
/// layer stay open there.
pub fn extract_isosurface(u: &ScalarField3D, level: f64) -> TriMesh {
    let spec = u.spec();
    let [nx, ny, nz] = spec.dims();
    let data = u.data();
    let h = [spec.spacing(crate::grid::Axis::X), spec.spacing(crate::grid::Axis::Y), spec.spacing(crate::grid::Axis::Z)];
    let node_pos = |i: usize, j: usize, k: usize| spec.position(i, j, k);
    let len = spec.len();

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut lookup: HashMap<usize, usize> = HashMap::new();
    let mut raw: Vec<[usize; 3]> = Vec::new();

    let mut vertex_on_edge = |i: usize, j: usize, k: usize, c0: usize, c1: usize| -> usize {
        let o0 = CORNER_OFFSETS[c0];
        let o1 = CORNER_OFFSETS[c1];
        let (p, q) = if o0 <= o1 { (o0, o1) } else { (o1, o0) };
        let pa = [i + p[0], j + p[1], k + p[2]];
        let pb = [i + q[0], j + q[1], k + q[2]];
        let ia = spec.index(pa[0], pa[1], pa[2]);
        let ib = spec.index(pb[0], pb[1], pb[2]);
        let axis = (0..3).find(|&a| pa[a] != pb[a]).expect("distinct corners");
        let (va, vb) = (data[ia], data[ib]);
        let t = (level - va) / (vb - va);
        let dist = t * h[axis];
        let (key, pos) = if dist < SNAP_DISTANCE {
            (3 * len + ia, node_pos(pa[0], pa[1], pa[2]))
        } else if h[axis] - dist < SNAP_DISTANCE {
            (3 * len + ib, node_pos(pb[0], pb[1], pb[2]))
        } else {
            let a = node_pos(pa[0], pa[1], pa[2]);
            let b = node_pos(pb[0], pb[1], pb[2]);
            (3 * ia + axis, add(a, scale(sub(b, a), t)))
        };
        *lookup.entry(key).or_insert_with(|| {
            vertices.push(pos);
            vertices.len() - 1
        })
    };

    for k in 0..nz.saturating_sub(1) {
        for j in 0..ny.saturating_sub(1) {
            for i in 0..nx.saturating_sub(1) {
                let mut case = 0usize;
                for (c, o) in CORNER_OFFSETS.iter().enumerate() {
                    if data[spec.index(i + o[0], j + o[1], k + o[2])] < level {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRI_TABLE[case];
                let mut e = 0;
                while e < 15 && row[e] >= 0 {
                    let mut tri = [0usize; 3];
                    for (slot, &edge) in tri.iter_mut().zip(&row[e..e + 3]) {
                        let [c0, c1] = EDGE_CORNERS[edge as usize];
                        *slot = vertex_on_edge(i, j, k, c0, c1);
                    }
                    raw.push(tri);
                    e += 3;
                }
            }
        }
    }
    clean_triangles(vertices, raw)
}

/// Drops degenerate and duplicated triangles, then unreferenced vertices.
fn clean_triangles(vertices: Vec<Vec3>, raw: Vec<[usize; 3]>) -> TriMesh {
    let mut seen: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
    let mut keep = vec![true; raw.len()];
    for (ti, t) in raw.iter().enumerate() {
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            keep[ti] = false;
            continue;
        }
        let [a, b, c] = t.map(|i| vertices[i]);
        if 0.5 * norm(cross(sub(b, a), sub(c, a))) <= MIN_TRIANGLE_AREA {
            keep[ti] = false;
            continue;
        }
        let mut key = *t;
        key.sort_unstable();
        // parity of the rotation tells the orientation apart
        let rot = (0..3).find(|&r| t[r] == key[0]).expect("present");
        let even = t[(rot + 1) % 3] == key[1];
        match seen.get(&key) {
            None => {
                seen.insert(key, (ti, usize::from(even)));
            }
            Some(&(other, parity)) => {
                keep[ti] = false;
                if parity != usize::from(even) {
                    // opposite copies enclose nothing
                    keep[other] = false;
                    seen.remove(&key);
                }
            }
        }
    }
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut out_v = Vec::new();
    let mut out_t = Vec::new();
    for (t, _) in raw.iter().zip(&keep).filter(|(_, &k)| k) {
        let mut nt = [0; 3];
        for (s, &i) in nt.iter_mut().zip(t) {
            if remap[i] == usize::MAX {
                remap[i] = out_v.len();
                out_v.push(vertices[i]);
            }
            *s = remap[i];
        }
        out_t.push(nt);
    }
    TriMesh {
        vertices: out_v,
        triangles: out_t,
    }
}

/// Regular icosahedron inscribed in the sphere of the given radius, centred at 0.
pub fn icosahedron(radius: f64) -> TriMesh {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ];
    let vertices = raw.iter().map(|v| scale(*v, radius / norm(*v))).collect();
    let triangles = vec![
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
    TriMesh {
        vertices,
        triangles,
    }
}

/// Icosahedron refined `levels` times by edge midpoints projected onto the sphere.
pub fn icosphere(levels: usize, radius: f64) -> TriMesh {
    let mut mesh = icosahedron(1.0);
    for _ in 0..levels {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut verts = mesh.vertices.clone();
        let mut tris = Vec::with_capacity(mesh.triangles.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = scale(add(verts[a], verts[b]), 0.5);
                verts.push(scale(m, 1.0 / norm(m)));
                verts.len() - 1
            })
        };
        for &[a, b, c] in &mesh.triangles {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            tris.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        mesh = TriMesh {
            vertices: verts,
            triangles: tris,
        };
    }
    mesh.scaled(radius)
}
