//! Discrete Gaussian and mean curvature on the one-ring, and the σ summary.
//!
//! Per interior vertex `i` with area `A_i`:
//!
//! * `κ_G = (2π − Σ θ) / A_i`, the angle deficit over the patch area
//! * `K = (1/2A_i) Σ_j (cot α_ij + cot β_ij)(v_j − v_i)`, and the reported scalar is
//!   `κ̄ = −½ K·n` with `n` the outward vertex normal, so a unit sphere gives `+1`.
//!
//! `A_i` defaults to the mixed Voronoi area (obtuse triangles contribute half or a
//! quarter of their area instead of the circumcentric cell).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{build_adjacency, cross, dot, norm, scale, sub, vertex_normals, TriMesh, Vec3};

/// Cotangents are clamped to this magnitude and the vertex is flagged.
pub const MAX_COT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaKind {
    #[default]
    Mixed,
    /// A third of every incident triangle.
    Barycentric,
}

impl std::str::FromStr for AreaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(AreaKind::Mixed),
            "barycentric" => Ok(AreaKind::Barycentric),
            other => Err(Error::Config(format!("unknown area kind `{other}`"))),
        }
    }
}

/// Raw per-vertex quantities; `None` for skipped vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexCurvatures {
    pub gaussian: Vec<Option<f64>>,
    pub mean: Vec<Option<f64>>,
    pub area: Vec<f64>,
    pub skipped_boundary: usize,
    pub skipped_degenerate: usize,
    /// Vertices where a cotangent hit [`MAX_COT`].
    pub flagged: Vec<usize>,
}

fn angle_at(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let (u, v) = (sub(a, p), sub(b, p));
    norm(cross(u, v)).atan2(dot(u, v))
}

/// Cotangent of the angle at `p`, clamped; second value is true when clamped.
fn cot_at(p: Vec3, a: Vec3, b: Vec3) -> (f64, bool) {
    let (u, v) = (sub(a, p), sub(b, p));
    let s = norm(cross(u, v));
    let c = dot(u, v);
    if s * MAX_COT <= c.abs() {
        (MAX_COT.copysign(c), true)
    } else {
        (c / s, false)
    }
}

/// Per-vertex patch areas.
pub fn vertex_areas(mesh: &TriMesh, kind: AreaKind) -> Vec<f64> {
    let v = mesh.vertices();
    let mut area = vec![0.0; v.len()];
    for t in mesh.triangles() {
        let p = t.map(|i| v[i]);
        let ta = 0.5 * norm(cross(sub(p[1], p[0]), sub(p[2], p[0])));
        match kind {
            AreaKind::Barycentric => {
                for &i in t {
                    area[i] += ta / 3.0;
                }
            }
            AreaKind::Mixed => {
                let d = [0, 1, 2].map(|c| dot(sub(p[(c + 1) % 3], p[c]), sub(p[(c + 2) % 3], p[c])));
                let obtuse = (0..3).find(|&c| d[c] < 0.0);
                for c in 0..3 {
                    area[t[c]] += match obtuse {
                        Some(o) if o == c => 0.5 * ta,
                        Some(_) => 0.25 * ta,
                        None => {
                            let (a, b) = ((c + 1) % 3, (c + 2) % 3);
                            // edge c–a faces corner b and edge c–b faces corner a
                            let cot_b = cot_at(p[b], p[c], p[a]).0;
                            let cot_a = cot_at(p[a], p[b], p[c]).0;
                            let l_ca = dot(sub(p[a], p[c]), sub(p[a], p[c]));
                            let l_cb = dot(sub(p[b], p[c]), sub(p[b], p[c]));
                            (l_ca * cot_b + l_cb * cot_a) / 8.0
                        }
                    };
                }
            }
        }
    }
    area
}

/// Gaussian and signed mean curvature at every interior vertex.
pub fn vertex_curvatures(mesh: &TriMesh, kind: AreaKind) -> Result<VertexCurvatures> {
    let adj = build_adjacency(mesh)?;
    let v = mesh.vertices();
    let n = v.len();
    let area = vertex_areas(mesh, kind);
    let normals = vertex_normals(mesh);
    let mut angle_sum = vec![0.0; n];
    let mut n_angles = vec![0usize; n];
    let mut lap = vec![[0.0; 3]; n];
    let mut clamped = vec![false; n];
    for t in mesh.triangles() {
        let p = t.map(|i| v[i]);
        for c in 0..3 {
            let (a, b) = ((c + 1) % 3, (c + 2) % 3);
            angle_sum[t[c]] += angle_at(p[c], p[a], p[b]);
            n_angles[t[c]] += 1;
            // the angle at c is opposite edge a–b
            let (ct, hit) = cot_at(p[c], p[a], p[b]);
            let e = scale(sub(p[b], p[a]), ct);
            lap[t[a]] = [lap[t[a]][0] + e[0], lap[t[a]][1] + e[1], lap[t[a]][2] + e[2]];
            lap[t[b]] = [lap[t[b]][0] - e[0], lap[t[b]][1] - e[1], lap[t[b]][2] - e[2]];
            if hit {
                clamped[t[a]] = true;
                clamped[t[b]] = true;
            }
        }
    }
    let mut out = VertexCurvatures {
        gaussian: vec![None; n],
        mean: vec![None; n],
        area: area.clone(),
        skipped_boundary: 0,
        skipped_degenerate: 0,
        flagged: Vec::new(),
    };
    for i in 0..n {
        if adj.triangles[i].is_empty() {
            continue;
        }
        if adj.boundary[i] {
            out.skipped_boundary += 1;
            continue;
        }
        if area[i] <= 0.0 || !area[i].is_finite() {
            out.skipped_degenerate += 1;
            continue;
        }
        let mut deficit = 2.0 * PI - angle_sum[i];
        // below the rounding floor of the angle sum the vertex is flat
        if deficit.abs() <= 4.0 * n_angles[i] as f64 * f64::EPSILON * 2.0 * PI {
            deficit = 0.0;
        }
        out.gaussian[i] = Some(deficit / area[i]);
        let k = scale(lap[i], 1.0 / (2.0 * area[i]));
        out.mean[i] = Some(-0.5 * dot(k, normals[i]));
        if clamped[i] {
            out.flagged.push(i);
        }
    }
    Ok(out)
}

pub fn gaussian_curvature(mesh: &TriMesh) -> Result<Vec<Option<f64>>> {
    Ok(vertex_curvatures(mesh, AreaKind::Mixed)?.gaussian)
}

pub fn mean_curvature(mesh: &TriMesh) -> Result<Vec<Option<f64>>> {
    Ok(vertex_curvatures(mesh, AreaKind::Mixed)?.mean)
}

/// `Σ κ_G · A` over interior vertices.
pub fn total_gaussian_curvature(c: &VertexCurvatures) -> f64 {
    c.gaussian
        .iter()
        .zip(&c.area)
        .filter_map(|(k, a)| k.map(|k| k * a))
        .sum()
}

/// Population standard deviation; zero for an empty list.
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Linear-interpolated percentile of sorted data, `p` in `[0, 1]`.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let x = p * (sorted.len() - 1) as f64;
    let lo = x.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (x - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-width bins between the 1st and 99th percentiles; values outside are
/// counted in the end bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Histogram {
        let bins = bins.max(1);
        if values.is_empty() {
            return Histogram {
                lo: 0.0,
                hi: 0.0,
                counts: vec![0; bins],
            };
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (percentile(&sorted, 0.01), percentile(&sorted, 0.99));
        let mut counts = vec![0; bins];
        let width = (hi - lo) / bins as f64;
        for &v in values {
            let b = if width > 0.0 {
                (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1)
            } else {
                0
            };
            counts[b] += 1;
        }
        Histogram { lo, hi, counts }
    }

    pub fn bin_edges(&self, b: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + b as f64 * w, self.lo + (b + 1) as f64 * w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport {
    /// Included vertex indices with `(κ_G, κ̄)`.
    pub vertices: Vec<(usize, f64, f64)>,
    pub sigma_gc: f64,
    pub sigma_mc: f64,
    pub hist_gc: Histogram,
    pub hist_mc: Histogram,
    pub skipped_boundary: usize,
    pub skipped_degenerate: usize,
    pub flagged: usize,
}

/// Summary written as JSON next to the per-vertex CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSummary {
    pub sigma_gc: f64,
    pub sigma_mc: f64,
    pub n_vertices: usize,
    pub n_skipped: usize,
}

pub fn curvature_report(mesh: &TriMesh, bins: usize) -> Result<CurvatureReport> {
    curvature_report_with(mesh, bins, AreaKind::Mixed)
}

pub fn curvature_report_with(mesh: &TriMesh, bins: usize, kind: AreaKind) -> Result<CurvatureReport> {
    let c = vertex_curvatures(mesh, kind)?;
    let vertices: Vec<(usize, f64, f64)> = c
        .gaussian
        .iter()
        .zip(&c.mean)
        .enumerate()
        .filter_map(|(i, (g, m))| Some((i, (*g)?, (*m)?)))
        .collect();
    let gc: Vec<f64> = vertices.iter().map(|v| v.1).collect();
    let mc: Vec<f64> = vertices.iter().map(|v| v.2).collect();
    Ok(CurvatureReport {
        sigma_gc: population_std(&gc),
        sigma_mc: population_std(&mc),
        hist_gc: Histogram::new(&gc, bins),
        hist_mc: Histogram::new(&mc, bins),
        vertices,
        skipped_boundary: c.skipped_boundary,
        skipped_degenerate: c.skipped_degenerate,
        flagged: c.flagged.len(),
    })
}

impl CurvatureReport {
    pub fn summary(&self) -> CurvatureSummary {
        CurvatureSummary {
            sigma_gc: self.sigma_gc,
            sigma_mc: self.sigma_mc,
            n_vertices: self.vertices.len(),
            n_skipped: self.skipped_boundary + self.skipped_degenerate,
        }
    }

    /// `vertex,kg,km`
    pub fn vertices_csv(&self) -> String {
        let mut s = String::from("vertex,kg,km\n");
        for (i, g, m) in &self.vertices {
            let _ = writeln!(s, "{i},{g},{m}");
        }
        s
    }

    /// `bin_lo,bin_hi,count_gc,count_mc,mc_lo,mc_hi`: `bin_lo/bin_hi` are the
    /// Gaussian bin edges, the mean-curvature edges follow in the last columns.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count_gc,count_mc,mc_lo,mc_hi\n");
        for b in 0..self.hist_gc.counts.len() {
            let (glo, ghi) = self.hist_gc.bin_edges(b);
            let (mlo, mhi) = self.hist_mc.bin_edges(b);
            let _ = writeln!(
                s,
                "{glo},{ghi},{},{},{mlo},{mhi}",
                self.hist_gc.counts[b], self.hist_mc.counts[b]
            );
        }
        s
    }

    pub fn write_outputs(&self, json: &Path, hist: Option<&Path>, csv: Option<&Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.summary())
            .map_err(|e| Error::format(json, "summary", e.to_string()))?;
        std::fs::write(json, text).map_err(|e| Error::io(json, e))?;
        if let Some(p) = hist {
            std::fs::write(p, self.histogram_csv()).map_err(|e| Error::io(p, e))?;
        }
        if let Some(p) = csv {
            std::fs::write(p, self.vertices_csv()).map_err(|e| Error::io(p, e))?;
        }
        Ok(())
    }
}
