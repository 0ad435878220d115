//! Uniform periodic grids over the unit cube and the field containers built on them.
//!
//! Every field is stored flat with `x` varying fastest, then `y`, then `z`.
//! Voxel `(i, j, k)` sits at `((i + ½)/nx, (j + ½)/ny, (k + ½)/nz)` and carries the
//! volume `1/(nx·ny·nz)`, so quadratures over a field are plain sums times
//! [`GridSpec::voxel_volume`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible voxel count along any axis.
pub const MIN_AXIS_LEN: usize = 4;

/// One of the three coordinate axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The two in-plane axes of a plane normal to `self`, in storage order.
    pub fn in_plane(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::X, Axis::Z),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::Config(format!("unknown axis `{other}`"))),
        }
    }
}

/// Voxel counts of a uniform grid on `[0,1)³`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx < MIN_AXIS_LEN || ny < MIN_AXIS_LEN || nz < MIN_AXIS_LEN {
            return Err(Error::Grid(format!(
                "{nx}x{ny}x{nz}: every axis needs at least {MIN_AXIS_LEN} voxels"
            )));
        }
        Ok(GridSpec { nx, ny, nz })
    }

    pub fn cubic(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn count(&self, axis: Axis) -> usize {
        self.dims()[axis.index()]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        1.0 / self.count(axis) as f64
    }

    pub fn voxel_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny && k < self.nz);
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let rest = idx / self.nx;
        (i, rest % self.ny, rest / self.ny)
    }

    /// Physical centre of voxel `(i, j, k)`.
    pub fn position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            (i as f64 + 0.5) / self.nx as f64,
            (j as f64 + 0.5) / self.ny as f64,
            (k as f64 + 0.5) / self.nz as f64,
        ]
    }

    /// Flat stride of `axis` in the storage layout.
    pub fn stride(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => 1,
            Axis::Y => self.nx,
            Axis::Z => self.nx * self.ny,
        }
    }

    /// Builds the 3D index of in-plane position `(a, b)` on plane `plane` normal to `axis`.
    pub fn plane_index(&self, axis: Axis, plane: usize, a: usize, b: usize) -> usize {
        match axis {
            Axis::X => self.index(plane, a, b),
            Axis::Y => self.index(a, plane, b),
            Axis::Z => self.index(a, b, plane),
        }
    }

    fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::Shape(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.nx, self.ny, self.nz, other.nx, other.ny, other.nz
            )));
        }
        Ok(())
    }
}

/// L² (volume-weighted) and sup norms of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
}

/// A real value per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField3D {
    spec: GridSpec,
    data: Vec<f64>,
}

impl ScalarField3D {
    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        ScalarField3D {
            spec,
            data: vec![value; spec.len()],
        }
    }

    /// Wraps `data`; fails on a length mismatch or any non-finite value.
    pub fn from_vec(spec: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != spec.len() {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                spec.len(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite value at voxel {pos}")));
        }
        Ok(ScalarField3D { spec, data })
    }

    /// Samples `f` at every voxel centre.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let mut data = Vec::with_capacity(spec.len());
        for k in 0..spec.nz {
            for j in 0..spec.ny {
                for i in 0..spec.nx {
                    data.push(f(spec.position(i, j, k)));
                }
            }
        }
        ScalarField3D { spec, data }
    }

    pub(crate) fn from_raw(spec: GridSpec, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), spec.len());
        ScalarField3D { spec, data }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.spec.index(i, j, k)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField3D {
            spec: self.spec,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.spec.check_same(&other.spec)?;
        Ok(ScalarField3D {
            spec: self.spec,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `a·x + y`.
    pub fn axpy(a: f64, x: &Self, y: &Self) -> Result<Self> {
        x.zip_map(y, |xv, yv| a * xv + yv)
    }

    pub fn norms(&self) -> Norms {
        let mut sq = 0.0;
        let mut linf = 0.0f64;
        for &v in &self.data {
            sq += v * v;
            linf = linf.max(v.abs());
        }
        Norms {
            l2: (sq * self.spec.voxel_volume()).sqrt(),
            linf,
        }
    }

    /// Volume-weighted inner product `∫ f g`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.spec.check_same(&other.spec)?;
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum();
        Ok(s * self.spec.voxel_volume())
    }

    /// `∫ f` by the midpoint rule.
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.spec.voxel_volume()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Circular shift by `(di, dj, dk)` voxels: `out(p + d) = self(p)`.
    pub fn shifted(&self, di: usize, dj: usize, dk: usize) -> Self {
        let s = self.spec;
        let mut out = vec![0.0; s.len()];
        for k in 0..s.nz {
            for j in 0..s.ny {
                for i in 0..s.nx {
                    let dst = s.index((i + di) % s.nx, (j + dj) % s.ny, (k + dk) % s.nz);
                    out[dst] = self.data[s.index(i, j, k)];
                }
            }
        }
        ScalarField3D::from_raw(s, out)
    }

    /// Voxels where the field is at least `level`.
    pub fn threshold(&self, level: f64) -> BinaryVolume {
        BinaryVolume {
            spec: self.spec,
            bits: self.data.iter().map(|&v| v >= level).collect(),
        }
    }
}

/// Three scalar components on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3D {
    pub x: ScalarField3D,
    pub y: ScalarField3D,
    pub z: ScalarField3D,
}

impl VectorField3D {
    pub fn new(x: ScalarField3D, y: ScalarField3D, z: ScalarField3D) -> Result<Self> {
        x.spec.check_same(&y.spec)?;
        x.spec.check_same(&z.spec)?;
        Ok(VectorField3D { x, y, z })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        VectorField3D {
            x: ScalarField3D::zeros(spec),
            y: ScalarField3D::zeros(spec),
            z: ScalarField3D::zeros(spec),
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.x.spec
    }

    pub fn components(&self) -> [&ScalarField3D; 3] {
        [&self.x, &self.y, &self.z]
    }

    pub fn map_components(
        &self,
        mut f: impl FnMut(&ScalarField3D) -> ScalarField3D,
    ) -> VectorField3D {
        VectorField3D {
            x: f(&self.x),
            y: f(&self.y),
            z: f(&self.z),
        }
    }

    /// `a·x + y` componentwise.
    pub fn axpy(a: f64, x: &Self, y: &Self) -> Result<Self> {
        Ok(VectorField3D {
            x: ScalarField3D::axpy(a, &x.x, &y.x)?,
            y: ScalarField3D::axpy(a, &x.y, &y.y)?,
            z: ScalarField3D::axpy(a, &x.z, &y.z)?,
        })
    }

    /// `(∫ |v|²)^½`.
    pub fn l2(&self) -> f64 {
        let sq: f64 = self
            .components()
            .iter()
            .map(|c| c.data.iter().map(|v| v * v).sum::<f64>())
            .sum();
        (sq * self.spec().voxel_volume()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }
}

/// A voxelised indicator set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryVolume {
    spec: GridSpec,
    bits: Vec<bool>,
}

impl BinaryVolume {
    pub fn empty(spec: GridSpec) -> Self {
        BinaryVolume {
            spec,
            bits: vec![false; spec.len()],
        }
    }

    pub fn full(spec: GridSpec) -> Self {
        BinaryVolume {
            spec,
            bits: vec![true; spec.len()],
        }
    }

    pub fn from_bits(spec: GridSpec, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != spec.len() {
            return Err(Error::Shape(format!(
                "expected {} voxels, got {}",
                spec.len(),
                bits.len()
            )));
        }
        Ok(BinaryVolume { spec, bits })
    }

    /// Marks the voxels whose centre satisfies `f`.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut([f64; 3]) -> bool) -> Self {
        let mut bits = Vec::with_capacity(spec.len());
        for k in 0..spec.nz {
            for j in 0..spec.ny {
                for i in 0..spec.nx {
                    bits.push(f(spec.position(i, j, k)));
                }
            }
        }
        BinaryVolume { spec, bits }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.bits[self.spec.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.spec.index(i, j, k);
        self.bits[idx] = value;
    }

    pub fn set_index(&mut self, idx: usize, value: bool) {
        self.bits[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty_set(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_full_set(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn complement(&self) -> Self {
        BinaryVolume {
            spec: self.spec,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.spec.check_same(&other.spec)?;
        Ok(BinaryVolume {
            spec: self.spec,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        })
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.spec.check_same(&other.spec)?;
        Ok(BinaryVolume {
            spec: self.spec,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        })
    }

    pub fn intersects(&self, other: &Self) -> Result<bool> {
        self.spec.check_same(&other.spec)?;
        Ok(self.bits.iter().zip(&other.bits).any(|(a, b)| *a && *b))
    }

    /// 0/1 indicator as a scalar field.
    pub fn to_field(&self) -> ScalarField3D {
        ScalarField3D::from_raw(
            self.spec,
            self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }

    /// In-plane mask of plane `plane` normal to `axis`.
    pub fn plane(&self, axis: Axis, plane: usize) -> Mask2D {
        let (a, b) = axis.in_plane();
        let (na, nb) = (self.spec.count(a), self.spec.count(b));
        let mut bits = Vec::with_capacity(na * nb);
        for vb in 0..nb {
            for va in 0..na {
                bits.push(self.bits[self.spec.plane_index(axis, plane, va, vb)]);
            }
        }
        Mask2D {
            width: na,
            height: nb,
            bits,
        }
    }

    /// Overwrites plane `plane` normal to `axis` with `mask`.
    pub fn set_plane(&mut self, axis: Axis, plane: usize, mask: &Mask2D) -> Result<()> {
        let (a, b) = axis.in_plane();
        if (mask.width, mask.height) != (self.spec.count(a), self.spec.count(b)) {
            return Err(Error::Shape(format!(
                "plane mask {}x{} does not fit grid {:?}",
                mask.width, mask.height, self.spec
            )));
        }
        for vb in 0..mask.height {
            for va in 0..mask.width {
                let idx = self.spec.plane_index(axis, plane, va, vb);
                self.bits[idx] = mask.get(va, vb);
            }
        }
        Ok(())
    }
}

/// A binary image on one slice plane, `width` varying fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask2D {
    pub width: usize,
    pub height: usize,
    bits: Vec<bool>,
}

impl Mask2D {
    pub fn empty(width: usize, height: usize) -> Self {
        Mask2D {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Shape(format!(
                "mask {width}x{height} needs {} pixels, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Mask2D {
            width,
            height,
            bits,
        })
    }

    /// Marks pixels whose centre, in unit coordinates `((a+½)/width, (b+½)/height)`, satisfies `f`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut([f64; 2]) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for b in 0..height {
            for a in 0..width {
                bits.push(f([
                    (a as f64 + 0.5) / width as f64,
                    (b as f64 + 0.5) / height as f64,
                ]));
            }
        }
        Mask2D {
            width,
            height,
            bits,
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, a: usize, b: usize) -> bool {
        self.bits[a + self.width * b]
    }

    pub fn set(&mut self, a: usize, b: usize, value: bool) {
        self.bits[a + self.width * b] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        Mask2D {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }
}
