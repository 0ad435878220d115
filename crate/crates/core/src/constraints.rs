//! Interior/exterior restrictions built from a stack of parallel slices.
//!
//! A slice mask yields an in-plane interior set `ω_in` (the mask, optionally eroded)
//! and exterior set `ω_ex` (the complement of the mask, optionally dilated). Each is
//! thickened out of its plane into a slab `Ω` whose half-thickness at in-plane
//! position `ξ` is `h·|𝒹(ξ, ω)|`, so the slab is thickest deep inside the restriction
//! and vanishes at its edge. The slabs are finally turned into pointwise lower/upper
//! bounds on the phase field.

use serde::{Deserialize, Serialize};

use crate::distance::{signed_distance, slice_signed_distance};
use crate::error::{Error, Result};
use crate::grid::{Axis, BinaryVolume, GridSpec, Mask2D, ScalarField3D};
use crate::phasefield::{profile_q, PhaseFieldParams};

/// One cross-section: its plane index along the stack axis and its in-plane mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slice {
    pub plane: usize,
    pub mask: Mask2D,
}

/// Ordered parallel slices of a volume.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceStack {
    grid: GridSpec,
    axis: Axis,
    slices: Vec<Slice>,
}

impl SliceStack {
    /// Validates strictly increasing, in-range planes and mask sizes.
    pub fn new(grid: GridSpec, axis: Axis, slices: Vec<Slice>) -> Result<Self> {
        let (a, b) = axis.in_plane();
        let (wa, hb) = (grid.count(a), grid.count(b));
        let count = grid.count(axis);
        for (i, s) in slices.iter().enumerate() {
            if s.plane >= count {
                return Err(Error::Grid(format!(
                    "slice plane {} outside [0, {count})",
                    s.plane
                )));
            }
            if i > 0 && s.plane <= slices[i - 1].plane {
                return Err(Error::Grid(format!(
                    "slice planes must be strictly increasing ({} after {})",
                    s.plane,
                    slices[i - 1].plane
                )));
            }
            if (s.mask.width, s.mask.height) != (wa, hb) {
                return Err(Error::Shape(format!(
                    "slice at plane {} is {}x{}, expected {wa}x{hb}",
                    s.plane, s.mask.width, s.mask.height
                )));
            }
        }
        Ok(SliceStack { grid, axis, slices })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    pub fn planes(&self) -> Vec<usize> {
        self.slices.iter().map(|s| s.plane).collect()
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// Pixel spacings of the in-plane axes.
    pub fn in_plane_spacing(&self) -> (f64, f64) {
        let (a, b) = self.axis.in_plane();
        (self.grid.spacing(a), self.grid.spacing(b))
    }
}

/// Lower and upper pointwise bounds on the phase field.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstaclePair {
    lower: ScalarField3D,
    upper: ScalarField3D,
}

impl ObstaclePair {
    pub fn new(lower: ScalarField3D, upper: ScalarField3D) -> Result<Self> {
        if lower.spec() != upper.spec() {
            return Err(Error::Shape("obstacle bounds on different grids".into()));
        }
        if let Some(idx) = lower
            .data()
            .iter()
            .zip(upper.data())
            .position(|(l, u)| l > u)
        {
            let (i, j, k) = lower.spec().coords(idx);
            return Err(Error::Infeasible(format!(
                "lower bound {} exceeds upper bound {} at voxel ({i},{j},{k})",
                lower.data()[idx],
                upper.data()[idx]
            )));
        }
        Ok(ObstaclePair { lower, upper })
    }

    /// Bounds `0 ≤ u ≤ 1`.
    pub fn unconstrained(spec: GridSpec) -> Self {
        ObstaclePair {
            lower: ScalarField3D::zeros(spec),
            upper: ScalarField3D::constant(spec, 1.0),
        }
    }

    pub fn lower(&self) -> &ScalarField3D {
        &self.lower
    }

    pub fn upper(&self) -> &ScalarField3D {
        &self.upper
    }

    pub fn spec(&self) -> GridSpec {
        self.lower.spec()
    }

    pub(crate) fn check_compatible(&self, spec: GridSpec) -> Result<()> {
        if self.spec() != spec {
            return Err(Error::Shape(format!(
                "obstacles on {:?}, field on {:?}",
                self.spec(),
                spec
            )));
        }
        Ok(())
    }

    /// True when `lower ≤ u ≤ upper` at every voxel.
    pub fn contains(&self, u: &ScalarField3D) -> bool {
        u.spec() == self.spec()
            && u
                .data()
                .iter()
                .zip(self.lower.data())
                .zip(self.upper.data())
                .all(|((v, l), h)| l <= v && v <= h)
    }
}

/// How the fattened restrictions become obstacle fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleMode {
    /// Smooth profiles `q(𝒹/ε)` of the fattened sets.
    Exact,
    /// Half-level indicators: `½` inside `Ω_in`, `½` ceiling inside `Ω_ex`.
    #[default]
    Indicator,
}

impl std::str::FromStr for ObstacleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ObstacleMode::Exact),
            "indicator" => Ok(ObstacleMode::Indicator),
            other => Err(Error::Config(format!("unknown obstacle mode `{other}`"))),
        }
    }
}

/// Per-slice in-plane restrictions, parallel to the stack's slices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Restrictions {
    pub interior: Vec<Mask2D>,
    pub exterior: Vec<Mask2D>,
    pub warnings: Vec<String>,
}

fn erode(mask: &Mask2D, radius: usize, spacing: (f64, f64)) -> Mask2D {
    if radius == 0 {
        return mask.clone();
    }
    let limit = radius as f64 * spacing.0.min(spacing.1);
    // distance to the nearest unset pixel; a fully set plane never erodes
    match crate::distance::edt_unsigned_2d(&mask.complement(), spacing) {
        Ok(d) => {
            let bits = d.iter().map(|&v| v > limit + 1e-12).collect();
            Mask2D::from_bits(mask.width, mask.height, bits).expect("same size")
        }
        Err(_) => mask.clone(),
    }
}

fn dilate(mask: &Mask2D, radius: usize, spacing: (f64, f64)) -> Mask2D {
    if radius == 0 {
        return mask.clone();
    }
    let limit = radius as f64 * spacing.0.min(spacing.1);
    match crate::distance::edt_unsigned_2d(mask, spacing) {
        Ok(d) => {
            let bits = d.iter().map(|&v| v <= limit + 1e-12).collect();
            Mask2D::from_bits(mask.width, mask.height, bits).expect("same size")
        }
        Err(_) => mask.clone(),
    }
}

/// `ω_in` = mask eroded by `erosion` pixels, `ω_ex` = complement of the mask dilated
/// by `erosion` pixels.
pub fn restrictions_from_slices(stack: &SliceStack, erosion: usize) -> Restrictions {
    let spacing = stack.in_plane_spacing();
    let mut interior = Vec::with_capacity(stack.len());
    let mut exterior = Vec::with_capacity(stack.len());
    let mut warnings = Vec::new();
    for s in stack.slices() {
        let inner = erode(&s.mask, erosion, spacing);
        if inner.count() == 0 && s.mask.count() > 0 {
            warnings.push(format!(
                "slice at plane {}: erosion by {erosion} removed the whole interior",
                s.plane
            ));
        }
        interior.push(inner);
        exterior.push(dilate(&s.mask, erosion, spacing).complement());
    }
    Restrictions {
        interior,
        exterior,
        warnings,
    }
}

/// Thickens per-slice restrictions into 3D slabs.
///
/// A voxel on plane `p` at in-plane position `ξ` belongs to the slab of the slice on
/// plane `k` when `ξ ∈ ω_k` and either `p = k` or `|p − k|·Δ < h·|𝒹_k(ξ, ω_k)|`, with `Δ`
/// the spacing along the stack axis. When `clip` is given the result is intersected
/// with it.
pub fn fatten(
    stack: &SliceStack,
    omegas: &[Mask2D],
    params: &PhaseFieldParams,
    clip: Option<&BinaryVolume>,
) -> Result<BinaryVolume> {
    if omegas.len() != stack.len() {
        return Err(Error::Shape(format!(
            "{} restrictions for {} slices",
            omegas.len(),
            stack.len()
        )));
    }
    let grid = stack.grid();
    if let Some(c) = clip {
        if c.spec() != grid {
            return Err(Error::Shape("clip volume on a different grid".into()));
        }
    }
    let axis = stack.axis();
    let count = grid.count(axis) as isize;
    let dz = grid.spacing(axis);
    let h = params.thickness();
    let spacing = stack.in_plane_spacing();
    let mut out = BinaryVolume::empty(grid);
    for (slice, omega) in stack.slices().iter().zip(omegas) {
        if omega.count() == 0 {
            continue;
        }
        let d = slice_signed_distance(omega, spacing);
        for b in 0..omega.height {
            for a in 0..omega.width {
                if !omega.get(a, b) {
                    continue;
                }
                let reach = h * d[a + omega.width * b].abs();
                let steps = (reach / dz).ceil() as isize;
                let k = slice.plane as isize;
                for off in -steps..=steps {
                    let p = k + off;
                    if p < 0 || p >= count {
                        continue;
                    }
                    if off != 0 && (off.unsigned_abs() as f64 * dz) >= reach {
                        continue;
                    }
                    let idx = grid.plane_index(axis, p as usize, a, b);
                    if clip.is_none_or(|c| c.bits()[idx]) {
                        out.set_index(idx, true);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Lower/upper obstacle fields from the fattened interior and exterior sets.
pub fn obstacle_profiles(
    interior: &BinaryVolume,
    exterior: &BinaryVolume,
    params: &PhaseFieldParams,
    mode: ObstacleMode,
) -> Result<ObstaclePair> {
    if interior.spec() != exterior.spec() {
        return Err(Error::Shape("restriction volumes on different grids".into()));
    }
    if interior.intersects(exterior)? {
        let idx = interior
            .bits()
            .iter()
            .zip(exterior.bits())
            .position(|(a, b)| *a && *b)
            .unwrap_or(0);
        return Err(Error::Infeasible(format!(
            "interior and exterior restrictions overlap at voxel {:?}",
            interior.spec().coords(idx)
        )));
    }
    let spec = interior.spec();
    let (lower, upper) = match mode {
        ObstacleMode::Indicator => (
            interior.to_field().map(|v| 0.5 * v),
            exterior.to_field().map(|v| 1.0 - 0.5 * v),
        ),
        ObstacleMode::Exact => {
            let eps = params.epsilon;
            let lower = if interior.is_empty_set() {
                ScalarField3D::zeros(spec)
            } else {
                signed_distance(interior)?.map(|d| profile_q(d / eps))
            };
            let upper = if exterior.is_empty_set() {
                ScalarField3D::constant(spec, 1.0)
            } else {
                signed_distance(exterior)?.map(|d| 1.0 - profile_q(d / eps))
            };
            (lower, upper)
        }
    };
    ObstaclePair::new(lower, upper)
}

/// Rough initial volume: every plane between the first and last slice copies the
/// mask of its nearest slice, ties going to the lower slice. Planes outside the
/// slice range stay empty.
pub fn fill_gaps_by_duplication(stack: &SliceStack) -> Result<BinaryVolume> {
    if stack.len() < 2 {
        return Err(Error::Degenerate(format!(
            "gap filling needs at least 2 slices, got {}",
            stack.len()
        )));
    }
    let grid = stack.grid();
    let axis = stack.axis();
    let mut out = BinaryVolume::empty(grid);
    let slices = stack.slices();
    for pair in slices.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        for p in lo.plane..=hi.plane {
            let src = if p - lo.plane <= hi.plane - p { lo } else { hi };
            out.set_plane(axis, p, &src.mask)?;
        }
    }
    Ok(out)
}

/// Everything derived from a slice stack that a solver run needs.
#[derive(Debug, Clone)]
pub struct ConstraintSetup {
    pub initial_set: BinaryVolume,
    pub interior: BinaryVolume,
    pub exterior: BinaryVolume,
    pub obstacles: ObstaclePair,
    pub warnings: Vec<String>,
}

/// Gap filling, restrictions, fattening and obstacle profiles in one go.
///
/// The interior slab is clipped to the gap-filled volume; the exterior slab is not.
pub fn build_constraints(
    stack: &SliceStack,
    params: &PhaseFieldParams,
    erosion: usize,
    mode: ObstacleMode,
) -> Result<ConstraintSetup> {
    let initial_set = fill_gaps_by_duplication(stack)?;
    let r = restrictions_from_slices(stack, erosion);
    let interior = fatten(stack, &r.interior, params, Some(&initial_set))?;
    let exterior = fatten(stack, &r.exterior, params, None)?;
    let obstacles = obstacle_profiles(&interior, &exterior, params, mode)?;
    Ok(ConstraintSetup {
        initial_set,
        interior,
        exterior,
        obstacles,
        warnings: r.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk(n: usize, r: f64) -> Mask2D {
        Mask2D::from_fn(n, n, |p| (p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2) <= r * r)
    }

    fn stack_of(n: usize, planes: &[usize], masks: Vec<Mask2D>) -> SliceStack {
        let grid = GridSpec::cubic(n).unwrap();
        SliceStack::new(
            grid,
            Axis::Z,
            planes
                .iter()
                .zip(masks)
                .map(|(&plane, mask)| Slice { plane, mask })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn stack_validation() {
        let grid = GridSpec::cubic(8).unwrap();
        let m = Mask2D::empty(8, 8);
        let mk = |p: usize| Slice {
            plane: p,
            mask: m.clone(),
        };
        assert!(SliceStack::new(grid, Axis::Z, vec![mk(2), mk(2)]).is_err());
        assert!(SliceStack::new(grid, Axis::Z, vec![mk(3), mk(2)]).is_err());
        assert!(SliceStack::new(grid, Axis::Z, vec![mk(8)]).is_err());
        let bad = Slice {
            plane: 1,
            mask: Mask2D::empty(7, 8),
        };
        assert!(SliceStack::new(grid, Axis::Z, vec![bad]).is_err());
    }

    #[test]
    fn zero_erosion_restrictions() {
        let d = disk(16, 0.3);
        let st = stack_of(16, &[4, 10], vec![d.clone(), d.clone()]);
        let r = restrictions_from_slices(&st, 0);
        assert_eq!(r.interior[0], d);
        assert_eq!(r.exterior[0], d.complement());
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn erosion_kills_thin_mask() {
        let thin = Mask2D::from_fn(16, 16, |p| (p[1] - 8.5 / 16.0).abs() < 0.01);
        assert_eq!(thin.count(), 16);
        let st = stack_of(16, &[4, 10], vec![thin.clone(), thin]);
        let r = restrictions_from_slices(&st, 1);
        assert_eq!(r.interior[0].count(), 0);
        assert_eq!(r.warnings.len(), 2);
    }

    #[test]
    fn restrictions_are_disjoint_and_nested() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for erosion in 0..=2 {
            for _ in 0..10 {
                let bits: Vec<bool> = (0..144).map(|_| rng.gen_bool(0.5)).collect();
                let m = Mask2D::from_bits(12, 12, bits).unwrap();
                let st = stack_of(12, &[3, 8], vec![m.clone(), m.clone()]);
                let r = restrictions_from_slices(&st, erosion);
                for p in 0..144 {
                    let (i, e, s) = (r.interior[0].bits()[p], r.exterior[0].bits()[p], m.bits()[p]);
                    assert!(!(i && e));
                    assert!(!i || s, "ω_in ⊆ mask");
                    assert!(!s || !e, "mask ⊆ Π∖ω_ex");
                }
            }
        }
    }

    #[test]
    fn zero_thickness_keeps_only_the_planes() {
        let d = disk(16, 0.3);
        let st = stack_of(16, &[4, 10], vec![d.clone(), d.clone()]);
        let params = PhaseFieldParams::new(0.1, 0.0).unwrap();
        // α = 0 gives h = 1; use a tiny epsilon with α = 1 for h → 0 instead
        let _ = params;
        let params = PhaseFieldParams::new(1e-300, 1.0).unwrap();
        let omega = fatten(&st, &[d.clone(), d.clone()], &params, None).unwrap();
        let mut expected = BinaryVolume::empty(st.grid());
        expected.set_plane(Axis::Z, 4, &d).unwrap();
        expected.set_plane(Axis::Z, 10, &d).unwrap();
        assert_eq!(omega, expected);
    }

    #[test]
    fn slab_thickness_follows_formula() {
        let n = 64;
        let half = Mask2D::from_fn(n, n, |p| p[0] < 0.5);
        let st = stack_of(n, &[32, 40], vec![half.clone(), Mask2D::empty(n, n)]);
        let params = PhaseFieldParams::new(0.25, 0.5).unwrap(); // h = 0.5
        let omega = fatten(&st, &[half.clone(), Mask2D::empty(n, n)], &params, None).unwrap();
        let h = 1.0 / n as f64;
        // pixel column a = 21 is 10 pixels deep plus the half-spacing interface offset
        let a = 21;
        let depth = (31 - a) as f64 * h + 0.5 * h;
        let d = slice_signed_distance(&half, (h, h));
        assert!((d[a + n * 5] + depth).abs() < 1e-12);
        for p in 0..n {
            let zeta = (p as f64 - 32.0).abs() * h;
            let expected = p == 32 || zeta < 0.5 * depth;
            assert_eq!(omega.get(a, 5, p), expected, "plane {p}");
        }
        // 10.5 pixels deep with h = ½ reaches 5 planes each way
        assert!(omega.get(a, 5, 37) && !omega.get(a, 5, 38));
    }

    #[test]
    fn fattening_is_monotone_in_h() {
        let d = disk(24, 0.3);
        let st = stack_of(24, &[6, 16], vec![d.clone(), d.clone()]);
        let r = restrictions_from_slices(&st, 0);
        let mut prev: Option<(BinaryVolume, BinaryVolume)> = None;
        for alpha in [1.0, 0.75, 0.5, 0.25] {
            let p = PhaseFieldParams::new(0.1, alpha).unwrap();
            let i = fatten(&st, &r.interior, &p, None).unwrap();
            let e = fatten(&st, &r.exterior, &p, None).unwrap();
            if let Some((pi, pe)) = &prev {
                assert_eq!(pi.intersection(&i).unwrap(), *pi);
                assert_eq!(pe.intersection(&e).unwrap(), *pe);
            }
            prev = Some((i, e));
        }
    }

    #[test]
    fn indicator_profile_values() {
        let s = GridSpec::cubic(8).unwrap();
        let mut inside = BinaryVolume::empty(s);
        inside.set(1, 1, 1, true);
        let mut outside = BinaryVolume::empty(s);
        outside.set(6, 6, 6, true);
        let params = PhaseFieldParams::new(0.1, 0.5).unwrap();
        let o = obstacle_profiles(&inside, &outside, &params, ObstacleMode::Indicator).unwrap();
        assert_eq!((o.lower().get(1, 1, 1), o.upper().get(1, 1, 1)), (0.5, 1.0));
        assert_eq!((o.lower().get(3, 3, 3), o.upper().get(3, 3, 3)), (0.0, 1.0));
        assert_eq!((o.lower().get(6, 6, 6), o.upper().get(6, 6, 6)), (0.0, 0.5));
    }

    #[test]
    fn exact_profile_deep_inside() {
        let n = 32;
        let s = GridSpec::cubic(n).unwrap();
        let inside = BinaryVolume::from_fn(s, |p| (p[0] - 0.5).abs() < 0.4);
        let outside = BinaryVolume::from_fn(s, |p| (p[0] - 0.5).abs() > 0.45);
        let eps = 1.0 / n as f64;
        let params = PhaseFieldParams::new(eps, 0.5).unwrap();
        let o = obstacle_profiles(&inside, &outside, &params, ObstacleMode::Exact).unwrap();
        // voxel 16 sits 9.5 spacings from the interface (d = -9 ε after the offset)
        assert!(o.lower().get(16, 3, 3) > 0.999);
        assert!(o
            .lower()
            .data()
            .iter()
            .chain(o.upper().data())
            .all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn overlap_is_infeasible() {
        let s = GridSpec::cubic(4).unwrap();
        let mut a = BinaryVolume::empty(s);
        a.set(1, 1, 1, true);
        let params = PhaseFieldParams::new(0.1, 0.5).unwrap();
        assert!(matches!(
            obstacle_profiles(&a, &a, &params, ObstacleMode::Indicator),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn indicator_bounds_encode_set_constraints() {
        // u within the box iff {u ≥ ½} ⊇ Ω_in and {u ≥ ½} ∩ Ω_ex = ∅ (with u on [0,1], and
        // the strict side {u > ½} on Ω_ex)
        let s = GridSpec::cubic(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inside = BinaryVolume::from_bits(s, (0..s.len()).map(|_| rng.gen_bool(0.2)).collect())
            .unwrap();
        let outside = BinaryVolume::from_bits(
            s,
            inside.bits().iter().map(|&b| !b && rng.gen_bool(0.3)).collect(),
        )
        .unwrap();
        let params = PhaseFieldParams::new(0.1, 0.5).unwrap();
        let o = obstacle_profiles(&inside, &outside, &params, ObstacleMode::Indicator).unwrap();
        for _ in 0..200 {
            let u = ScalarField3D::from_vec(
                s,
                (0..s.len())
                    .map(|_| {
                        // values on both sides of ½, with exact ½ hits
                        *[0.1, 0.5, 0.9, rng.gen::<f64>()].get(rng.gen_range(0..4)).unwrap()
                    })
                    .collect(),
            )
            .unwrap();
            let in_box = o.contains(&u);
            let set_ok = (0..s.len()).all(|i| {
                let v = u.data()[i];
                (!inside.bits()[i] || v >= 0.5) && (!outside.bits()[i] || v <= 0.5)
            });
            assert_eq!(in_box, set_ok);
        }
    }

    #[test]
    fn gap_fill_nearest_slice() {
        let n = 32;
        let a = disk(n, 0.2);
        let b = disk(n, 0.3);
        let st = stack_of(n, &[10, 20], vec![a.clone(), b.clone()]);
        let v = fill_gaps_by_duplication(&st).unwrap();
        for p in 10..=15 {
            assert_eq!(v.plane(Axis::Z, p), a, "plane {p}");
        }
        for p in 16..=20 {
            assert_eq!(v.plane(Axis::Z, p), b, "plane {p}");
        }
        assert_eq!(v.plane(Axis::Z, 9).count(), 0);
        assert_eq!(v.plane(Axis::Z, 21).count(), 0);

        let st = stack_of(n, &[4, 6], vec![a.clone(), b.clone()]);
        let v = fill_gaps_by_duplication(&st).unwrap();
        assert_eq!(v.plane(Axis::Z, 5), a);
    }

    #[test]
    fn gap_fill_uneven_matches_scan() {
        let n = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut planes = vec![5usize];
        while *planes.last().unwrap() + 13 < n - 1 {
            let g = rng.gen_range(3..=13);
            planes.push(planes.last().unwrap() + g);
        }
        let masks: Vec<Mask2D> = (0..planes.len())
            .map(|i| disk(n, 0.1 + 0.02 * (i % 7) as f64))
            .collect();
        let st = stack_of(n, &planes, masks.clone());
        let v = fill_gaps_by_duplication(&st).unwrap();
        for p in 0..n {
            let expected = if p < planes[0] || p > *planes.last().unwrap() {
                Mask2D::empty(n, n)
            } else {
                // brute-force nearest slice, smaller index wins ties
                let best = (0..planes.len())
                    .min_by_key(|&i| ((planes[i] as isize - p as isize).abs(), planes[i]))
                    .unwrap();
                masks[best].clone()
            };
            assert_eq!(v.plane(Axis::Z, p), expected, "plane {p}");
        }
    }

    #[test]
    fn gap_fill_needs_two_slices() {
        let st = stack_of(8, &[3], vec![disk(8, 0.2)]);
        assert!(matches!(
            fill_gaps_by_duplication(&st),
            Err(Error::Degenerate(_))
        ));
    }
}
