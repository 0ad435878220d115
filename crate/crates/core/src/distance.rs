//! Exact Euclidean distance transforms on voxel and pixel grids.
//!
//! Squared distances are computed with the separable lower-envelope-of-parabolas
//! method (one 1D pass per axis), in voxel units so that every intermediate value is
//! an integer held exactly in an `f64`. Conversion to domain units happens once at
//! the end.
//!
//! Signed distances are negative inside the set. On a voxel grid both the inside and
//! outside transforms report one full spacing at the first voxel past the interface,
//! so each side is pulled back by half a spacing: the zero level then sits on the
//! voxel faces separating the set from its complement.

use crate::error::{Error, Result};
use crate::grid::{Axis, BinaryVolume, GridSpec, Mask2D, ScalarField3D};

/// Squared distance transform along one line: `out[p] = min_q w·(p−q)² + f[q]`.
///
/// Infinite entries of `f` are skipped; a line with no finite entry stays infinite.
fn lower_envelope(f: &[f64], w: f64, out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k: usize = 0;
    let mut started = false;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        if !started {
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            started = true;
            continue;
        }
        let qf = q as f64;
        // z[0] = -inf, so the scan always stops at k = 0 at the latest
        let s = loop {
            let vf = v[k] as f64;
            let s = ((f[q] + w * qf * qf) - (f[v[k]] + w * vf * vf)) / (2.0 * w * (qf - vf));
            if s > z[k] {
                break s;
            }
            k -= 1;
        };
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    if !started {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        let pf = p as f64;
        while z[k + 1] < pf {
            k += 1;
        }
        let d = pf - v[k] as f64;
        *o = w * d * d + f[v[k]];
    }
}

/// In-place separable transform of `data` laid out with `dims[0]` fastest.
fn separable_pass(data: &mut [f64], dims: &[usize], weights: &[f64]) {
    let total: usize = dims.iter().product();
    let max_len = dims.iter().copied().max().unwrap_or(0);
    let mut line = vec![0.0; max_len];
    let mut out = vec![0.0; max_len];
    let mut v = vec![0usize; max_len];
    let mut z = vec![0.0; max_len + 1];
    let mut stride = 1;
    for (axis, &n) in dims.iter().enumerate() {
        let outer = total / (n * stride);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                for p in 0..n {
                    line[p] = data[base + p * stride];
                }
                lower_envelope(&line[..n], weights[axis], &mut out[..n], &mut v, &mut z);
                for p in 0..n {
                    data[base + p * stride] = out[p];
                }
            }
        }
        stride *= n;
    }
}

/// Per-axis squared-step weights relative to the finest spacing, and that spacing.
fn axis_weights(spacings: &[f64]) -> (Vec<f64>, f64) {
    let h = spacings.iter().copied().fold(f64::INFINITY, f64::min);
    (spacings.iter().map(|s| (s / h) * (s / h)).collect(), h)
}

/// Squared distance, in units of the finest spacing, from each cell to the nearest set cell.
fn squared_edt(bits: &[bool], dims: &[usize], weights: &[f64]) -> Result<Vec<f64>> {
    if !bits.iter().any(|&b| b) {
        return Err(Error::AllFar);
    }
    let mut data: Vec<f64> = bits
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    separable_pass(&mut data, dims, weights);
    Ok(data)
}

fn spacings_3d(spec: GridSpec) -> [f64; 3] {
    [
        spec.spacing(Axis::X),
        spec.spacing(Axis::Y),
        spec.spacing(Axis::Z),
    ]
}

/// Squared distances in units of the finest voxel spacing (integers on cubic grids).
pub fn edt_squared_voxels(mask: &BinaryVolume) -> Result<Vec<f64>> {
    let spec = mask.spec();
    let (weights, _) = axis_weights(&spacings_3d(spec));
    squared_edt(mask.bits(), &spec.dims(), &weights)
}

/// Euclidean distance (domain units) from every voxel centre to the nearest set voxel centre.
///
/// Zero on the set. An empty mask has no finite distance and yields [`Error::AllFar`].
pub fn edt_unsigned(mask: &BinaryVolume) -> Result<ScalarField3D> {
    let spec = mask.spec();
    let (_, h) = axis_weights(&spacings_3d(spec));
    let sq = edt_squared_voxels(mask)?;
    Ok(ScalarField3D::from_raw(
        spec,
        sq.into_iter().map(|d| d.sqrt() * h).collect(),
    ))
}

/// 2D counterpart of [`edt_unsigned`] for a slice mask with the given pixel spacings.
pub fn edt_unsigned_2d(mask: &Mask2D, spacing: (f64, f64)) -> Result<Vec<f64>> {
    let (weights, h) = axis_weights(&[spacing.0, spacing.1]);
    let sq = squared_edt(mask.bits(), &[mask.width, mask.height], &weights)?;
    Ok(sq.into_iter().map(|d| d.sqrt() * h).collect())
}

fn combine_signed(
    inside: &[bool],
    to_set: Option<Vec<f64>>,
    to_complement: Option<Vec<f64>>,
    half: f64,
    saturation: f64,
) -> Vec<f64> {
    inside
        .iter()
        .enumerate()
        .map(|(i, &is_in)| {
            if is_in {
                match &to_complement {
                    Some(d) => -(d[i] - half),
                    None => -saturation,
                }
            } else {
                match &to_set {
                    Some(d) => d[i] - half,
                    None => saturation,
                }
            }
        })
        .collect()
}

/// Signed distance to the boundary of `mask`: negative inside, positive outside.
///
/// A full mask has no exterior to measure against; every voxel then reports minus
/// the domain diameter. An empty mask fails with [`Error::AllFar`].
pub fn signed_distance(mask: &BinaryVolume) -> Result<ScalarField3D> {
    let spec = mask.spec();
    let sp = spacings_3d(spec);
    let (weights, h) = axis_weights(&sp);
    let dims = spec.dims();
    let to_set = squared_edt(mask.bits(), &dims, &weights)?;
    let comp: Vec<bool> = mask.bits().iter().map(|b| !b).collect();
    let to_comp = match squared_edt(&comp, &dims, &weights) {
        Ok(d) => Some(d),
        Err(Error::AllFar) => None,
        Err(e) => return Err(e),
    };
    let scale = |v: Vec<f64>| v.into_iter().map(|d| d.sqrt() * h).collect::<Vec<_>>();
    let diameter = 3f64.sqrt();
    let data = combine_signed(
        mask.bits(),
        Some(scale(to_set)),
        to_comp.map(scale),
        0.5 * h,
        diameter,
    );
    Ok(ScalarField3D::from_raw(spec, data))
}

/// In-plane signed distance `dist(ξ, ω) − dist(ξ, Π∖ω)` for a slice mask, with the
/// same half-spacing interface convention as [`signed_distance`].
///
/// Either side being empty is tolerated: the missing distance saturates at the
/// in-plane domain diameter.
pub fn slice_signed_distance(mask: &Mask2D, spacing: (f64, f64)) -> Vec<f64> {
    let (weights, h) = axis_weights(&[spacing.0, spacing.1]);
    let dims = [mask.width, mask.height];
    let diameter = ((mask.width as f64 * spacing.0).powi(2)
        + (mask.height as f64 * spacing.1).powi(2))
    .sqrt();
    let scale = |v: Vec<f64>| v.into_iter().map(|d| d.sqrt() * h).collect::<Vec<_>>();
    let to_set = squared_edt(mask.bits(), &dims, &weights).ok().map(scale);
    let comp: Vec<bool> = mask.bits().iter().map(|b| !b).collect();
    let to_comp = squared_edt(&comp, &dims, &weights).ok().map(scale);
    combine_signed(mask.bits(), to_set, to_comp, 0.5 * h, diameter)
}
