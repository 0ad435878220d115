//! RVOL volumes, binary PGM slices and slice-stack directories.
//!
//! An RVOL file is a raw little-endian payload, x fastest, with a JSON sidecar at
//! `<path>.json` holding `{"nx", "ny", "nz", "dtype", "order"}`. Fields are stored as
//! `f32`, binary volumes as `u8` with values 0 or 1.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constraints::{Slice, SliceStack};
use crate::error::{Error, Result};
use crate::grid::{Axis, BinaryVolume, GridSpec, Mask2D, ScalarField3D};

pub const ORDER_X_FASTEST: &str = "x-fastest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RvolHeader {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dtype: Dtype,
    pub order: String,
}

impl RvolHeader {
    fn new(spec: GridSpec, dtype: Dtype) -> Self {
        RvolHeader {
            nx: spec.nx,
            ny: spec.ny,
            nz: spec.nz,
            dtype,
            order: ORDER_X_FASTEST.into(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_rvol(path: &Path, header: &RvolHeader, payload: &[u8]) -> Result<()> {
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(header).map_err(|e| Error::format(&side, "header", e.to_string()))?;
    std::fs::write(&side, text).map_err(|e| Error::io(&side, e))?;
    std::fs::write(path, payload).map_err(|e| Error::io(path, e))
}

/// Reads the sidecar and the payload, checking the payload length.
pub fn read_rvol_raw(path: &Path) -> Result<(RvolHeader, GridSpec, Vec<u8>)> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let header: RvolHeader =
        serde_json::from_str(&text).map_err(|e| Error::format(&side, "header", e.to_string()))?;
    if header.order != ORDER_X_FASTEST {
        return Err(Error::format(&side, "order", format!("expected `{ORDER_X_FASTEST}`, got `{}`", header.order)));
    }
    let spec = GridSpec::new(header.nx, header.ny, header.nz)
        .map_err(|e| Error::format(&side, "nx/ny/nz", e.to_string()))?;
    let payload = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let width = match header.dtype {
        Dtype::F32 => 4,
        Dtype::U8 => 1,
    };
    if payload.len() != spec.len() * width {
        return Err(Error::format(
            path,
            "payload",
            format!("expected {} bytes for {:?}, found {}", spec.len() * width, header.dtype, payload.len()),
        ));
    }
    Ok((header, spec, payload))
}

pub fn write_field(path: &Path, u: &ScalarField3D) -> Result<()> {
    let mut payload = Vec::with_capacity(u.data().len() * 4);
    for &v in u.data() {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_rvol(path, &RvolHeader::new(u.spec(), Dtype::F32), &payload)
}

/// Reads a field; `u8` volumes are widened to 0.0/1.0.
pub fn read_field(path: &Path) -> Result<ScalarField3D> {
    let (header, spec, payload) = read_rvol_raw(path)?;
    let data: Vec<f64> = match header.dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Dtype::U8 => payload.iter().map(|&b| b as f64).collect(),
    };
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(path, "payload", format!("non-finite value at voxel {i}")));
    }
    ScalarField3D::from_vec(spec, data)
}

pub fn write_volume(path: &Path, vol: &BinaryVolume) -> Result<()> {
    let payload: Vec<u8> = vol.bits().iter().map(|&b| u8::from(b)).collect();
    write_rvol(path, &RvolHeader::new(vol.spec(), Dtype::U8), &payload)
}

pub fn read_volume(path: &Path) -> Result<BinaryVolume> {
    let (header, spec, payload) = read_rvol_raw(path)?;
    if header.dtype != Dtype::U8 {
        return Err(Error::format(sidecar_path(path), "dtype", "binary volumes must be u8"));
    }
    if let Some(i) = payload.iter().position(|&b| b > 1) {
        return Err(Error::format(path, "payload", format!("value {} at voxel {i} is not 0 or 1", payload[i])));
    }
    BinaryVolume::from_bits(spec, payload.into_iter().map(|b| b == 1).collect())
}

/// Binary P5 image, set pixels written as 255.
pub fn write_pgm(path: &Path, mask: &Mask2D) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend(mask.bits().iter().map(|&b| if b { 255u8 } else { 0 }));
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a P5 image with maxval ≤ 255; nonzero pixels are set.
pub fn read_pgm(path: &Path) -> Result<Mask2D> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0;
    let mut token = |name: &str| -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, name, "unexpected end of header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token("magic")?;
    if magic != "P5" {
        return Err(Error::format(path, "magic", format!("expected P5, got `{magic}`")));
    }
    let mut num = |name: &str| -> Result<usize> {
        let t = token(name)?;
        t.parse().map_err(|_| Error::format(path, name, format!("`{t}` is not a number")))
    };
    let (w, h, maxval) = (num("width")?, num("height")?, num("maxval")?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(path, "maxval", format!("{maxval} not in 1..=255")));
    }
    // exactly one whitespace byte separates the header from the pixels
    let start = pos + 1;
    if bytes.len() < start + w * h {
        return Err(Error::format(path, "pixels", format!("expected {} bytes, found {}", w * h, bytes.len().saturating_sub(start))));
    }
    Mask2D::from_bits(w, h, bytes[start..start + w * h].iter().map(|&b| b != 0).collect())
}

/// `manifest.json` of a slice-stack directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackManifest {
    pub axis: Axis,
    pub grid: GridSpec,
    pub planes: Vec<usize>,
}

pub const STACK_MANIFEST: &str = "manifest.json";

pub fn slice_file_name(plane: usize) -> String {
    format!("slice_{plane}.pgm")
}

pub fn write_stack(dir: &Path, stack: &SliceStack) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = StackManifest {
        axis: stack.axis(),
        grid: stack.grid(),
        planes: stack.planes(),
    };
    let path = dir.join(STACK_MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&path, "manifest", e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    for s in stack.slices() {
        write_pgm(&dir.join(slice_file_name(s.plane)), &s.mask)?;
    }
    Ok(())
}

/// Per-slice voxel counts and warnings gathered while reading a stack.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub counts: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

pub fn read_stack_manifest(dir: &Path) -> Result<StackManifest> {
    let path = dir.join(STACK_MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, "manifest", e.to_string()))
}

/// Reads `slice_<k>.pgm` for every plane of `manifest` from `dir`.
pub fn ingest_stack(dir: &Path, manifest: &StackManifest) -> Result<(SliceStack, IngestReport)> {
    let (a, b) = manifest.axis.in_plane();
    let expect = (manifest.grid.count(a), manifest.grid.count(b));
    let mut report = IngestReport::default();
    let mut slices = Vec::with_capacity(manifest.planes.len());
    let mut first: Option<(PathBuf, (usize, usize))> = None;
    for &plane in &manifest.planes {
        let path = dir.join(slice_file_name(plane));
        let mask = read_pgm(&path)?;
        let size = (mask.width, mask.height);
        if let Some((p0, s0)) = &first {
            if *s0 != size {
                return Err(Error::format(
                    &path,
                    "size",
                    format!("{}x{} differs from {}x{} of {}", size.0, size.1, s0.0, s0.1, p0.display()),
                ));
            }
        } else {
            first = Some((path.clone(), size));
        }
        if size != expect {
            return Err(Error::format(
                &path,
                "size",
                format!("{}x{} does not match the grid's {}x{} plane", size.0, size.1, expect.0, expect.1),
            ));
        }
        let count = mask.count();
        if count == 0 {
            report.warnings.push(format!("slice {plane} is empty"));
        }
        report.counts.push((plane, count));
        slices.push(Slice { plane, mask });
    }
    let stack = SliceStack::new(manifest.grid, manifest.axis, slices)?;
    Ok((stack, report))
}

/// Reads the manifest in `dir`, then the slices it lists.
pub fn read_stack(dir: &Path) -> Result<(SliceStack, IngestReport)> {
    let manifest = read_stack_manifest(dir)?;
    ingest_stack(dir, &manifest)
}
