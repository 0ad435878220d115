//! Synthetic test objects and slice sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{Slice, SliceStack};
use crate::error::{Error, Result};
use crate::grid::{Axis, BinaryVolume, GridSpec};

/// Objects must stay inside `[PAD, 1 − PAD]³` so periodic wrap-around never touches them.
pub const PAD: f64 = 0.1;

fn check_inside(lo: [f64; 3], hi: [f64; 3], what: &str) -> Result<()> {
    for a in 0..3 {
        if lo[a] < PAD - 1e-12 || hi[a] > 1.0 - PAD + 1e-12 {
            return Err(Error::Config(format!(
                "{what} leaves the padded box [{PAD}, {}] along axis {a}",
                1.0 - PAD
            )));
        }
    }
    Ok(())
}

/// Voxels whose centres lie in the closed ball.
pub fn gen_sphere(n: usize, radius: f64, center: [f64; 3]) -> Result<BinaryVolume> {
    let spec = GridSpec::cubic(n)?;
    if !(radius >= 0.0) {
        return Err(Error::Config(format!("radius must be non-negative, got {radius}")));
    }
    check_inside(center.map(|c| c - radius), center.map(|c| c + radius), "sphere")?;
    let r2 = radius * radius;
    Ok(BinaryVolume::from_fn(spec, |p| {
        (0..3).map(|a| (p[a] - center[a]).powi(2)).sum::<f64>() <= r2
    }))
}

/// Shape of the Y-shaped vessel phantom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchingGeometry {
    pub trunk_radius: f64,
    pub branch_radii: [f64; 2],
    /// Tilt of each branch from the trunk axis, in radians.
    pub branch_angle: f64,
    /// Bottom and top of the trunk along `z`.
    pub trunk_z: [f64; 2],
    pub branch_length: f64,
}

impl Default for BranchingGeometry {
    fn default() -> Self {
        BranchingGeometry {
            trunk_radius: 0.08,
            branch_radii: [0.06, 0.06],
            branch_angle: 35f64.to_radians(),
            trunk_z: [0.12, 0.5],
            branch_length: 0.38,
        }
    }
}

fn segment_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 > 0.0 {
        (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (0..3)
        .map(|i| (p[i] - a[i] - t * ab[i]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// A flat-ended vertical trunk centred on `x = y = ½` with two capsule branches
/// leaving its top in the `xz` plane, tilted by `±branch_angle`.
pub fn gen_branching_cylinders(n: usize, geom: &BranchingGeometry) -> Result<BinaryVolume> {
    let spec = GridSpec::cubic(n)?;
    let g = geom;
    if !(g.trunk_radius > 0.0) || g.branch_radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::Config("radii must be non-negative (trunk positive)".into()));
    }
    if !(g.trunk_z[0] < g.trunk_z[1]) {
        return Err(Error::Config("trunk bottom must lie below its top".into()));
    }
    let junction = [0.5, 0.5, g.trunk_z[1]];
    let tips: Vec<[f64; 3]> = [-1.0, 1.0]
        .iter()
        .map(|s| {
            [
                0.5 + s * g.branch_length * g.branch_angle.sin(),
                0.5,
                g.trunk_z[1] + g.branch_length * g.branch_angle.cos(),
            ]
        })
        .collect();
    let rt = g.trunk_radius;
    check_inside([0.5 - rt, 0.5 - rt, g.trunk_z[0]], [0.5 + rt, 0.5 + rt, g.trunk_z[1]], "trunk")?;
    for (tip, &r) in tips.iter().zip(&g.branch_radii) {
        if r > 0.0 {
            let lo = [0, 1, 2].map(|a| tip[a].min(junction[a]) - r);
            let hi = [0, 1, 2].map(|a| tip[a].max(junction[a]) + r);
            check_inside(lo, hi, "branch")?;
        }
    }
    Ok(BinaryVolume::from_fn(spec, |p| {
        let radial = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt();
        if radial <= rt && p[2] >= g.trunk_z[0] && p[2] <= g.trunk_z[1] {
            return true;
        }
        tips.iter()
            .zip(&g.branch_radii)
            .any(|(tip, &r)| r > 0.0 && segment_distance(p, junction, *tip) <= r)
    }))
}

/// How slice planes are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum SliceRule {
    Planes { planes: Vec<usize> },
    /// `count` planes with gaps drawn uniformly from `[gap_min, gap_max]`, centred on
    /// the object's extent along the axis. If the drawn gaps do not fit inside the
    /// extent, randomly chosen gaps above `gap_min` are shortened one plane at a time
    /// until they do.
    Uneven {
        count: usize,
        gap_min: usize,
        gap_max: usize,
        seed: u64,
    },
}

/// First and last planes along `axis` that contain object voxels.
pub fn object_extent(vol: &BinaryVolume, axis: Axis) -> Option<(usize, usize)> {
    let n = vol.spec().count(axis);
    let occupied: Vec<usize> = (0..n).filter(|&p| vol.plane(axis, p).count() > 0).collect();
    Some((*occupied.first()?, *occupied.last()?))
}

/// Plane indices produced by `rule` for `vol`.
pub fn choose_planes(vol: &BinaryVolume, axis: Axis, rule: &SliceRule) -> Result<Vec<usize>> {
    match rule {
        SliceRule::Planes { planes } => Ok(planes.clone()),
        SliceRule::Uneven {
            count,
            gap_min,
            gap_max,
            seed,
        } => {
            let (count, a, b) = (*count, *gap_min, *gap_max);
            if count < 2 || a == 0 || a > b {
                return Err(Error::Config(format!(
                    "uneven rule needs count ≥ 2 and 1 ≤ gap_min ≤ gap_max (got {count}, {a}:{b})"
                )));
            }
            let (lo, hi) = object_extent(vol, axis)
                .ok_or_else(|| Error::Degenerate("object is empty; nothing to slice".into()))?;
            let room = hi - lo;
            if (count - 1) * a > room {
                return Err(Error::Config(format!(
                    "{count} slices with gaps ≥ {a} do not fit in the object's extent of {room} planes"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut gaps: Vec<usize> = (0..count - 1).map(|_| rng.gen_range(a..=b)).collect();
            let mut span: usize = gaps.iter().sum();
            while span > room {
                let shrinkable: Vec<usize> = (0..gaps.len()).filter(|&i| gaps[i] > a).collect();
                let i = shrinkable[rng.gen_range(0..shrinkable.len())];
                gaps[i] -= 1;
                span -= 1;
            }
            let mut planes = vec![lo + (room - span) / 2];
            for g in gaps {
                planes.push(planes.last().expect("non-empty") + g);
            }
            Ok(planes)
        }
    }
}

/// Extracts the masks of `vol` at the given planes.
pub fn subsample_slices(vol: &BinaryVolume, axis: Axis, planes: &[usize]) -> Result<SliceStack> {
    let n = vol.spec().count(axis);
    if let Some(&p) = planes.iter().find(|&&p| p >= n) {
        return Err(Error::Grid(format!("plane {p} outside [0, {n})")));
    }
    let hits = planes.iter().filter(|&&p| vol.plane(axis, p).count() > 0).count();
    if hits < 2 {
        return Err(Error::Degenerate(format!(
            "at least 2 slices must intersect the object, {hits} do"
        )));
    }
    let slices = planes
        .iter()
        .map(|&plane| Slice {
            plane,
            mask: vol.plane(axis, plane),
        })
        .collect();
    SliceStack::new(vol.spec(), axis, slices)
}

/// Built-in examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Example {
    Sphere,
    Branching,
}

impl std::str::FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Example::Sphere),
            "branching" => Ok(Example::Branching),
            other => Err(Error::Config(format!("unknown example `{other}`"))),
        }
    }
}

/// Ball used by the sphere example.
pub const SPHERE_RADIUS: f64 = 0.35;

impl Example {
    pub fn volume(self, n: usize) -> Result<BinaryVolume> {
        match self {
            Example::Sphere => gen_sphere(n, SPHERE_RADIUS, [0.5; 3]),
            Example::Branching => gen_branching_cylinders(n, &BranchingGeometry::default()),
        }
    }

    /// Default slicing: 5 slices with gaps 4–5 for the sphere, 24 slices with gaps
    /// 3–13 for the branching phantom; both along `z`.
    pub fn default_rule(self, seed: u64) -> SliceRule {
        match self {
            Example::Sphere => SliceRule::Uneven {
                count: 5,
                gap_min: 4,
                gap_max: 5,
                seed,
            },
            Example::Branching => SliceRule::Uneven {
                count: 24,
                gap_min: 3,
                gap_max: 13,
                seed,
            },
        }
    }

    /// Volume and slice stack with the default rule.
    pub fn stack(self, n: usize, seed: u64) -> Result<(BinaryVolume, SliceStack)> {
        let vol = self.volume(n)?;
        let planes = choose_planes(&vol, Axis::Z, &self.default_rule(seed))?;
        let stack = subsample_slices(&vol, Axis::Z, &planes)?;
        Ok((vol, stack))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::fill_gaps_by_duplication;
    use std::f64::consts::PI;

    #[test]
    fn sphere_volume_and_bounds() {
        assert_eq!(gen_sphere(16, 0.0, [0.5; 3]).unwrap().count(), 0);
        let v = gen_sphere(64, 0.25, [0.5; 3]).unwrap();
        let expected = 4.0 / 3.0 * PI * 0.25f64.powi(3) * 64f64.powi(3);
        assert!((v.count() as f64 - expected).abs() < 0.03 * expected);
        assert!(gen_sphere(32, 0.45, [0.5; 3]).is_err());
        let a = gen_sphere(32, 0.2, [0.4, 0.5, 0.6]).unwrap().count();
        let b = gen_sphere(32, 0.2, [0.6, 0.4, 0.5]).unwrap().count();
        assert_eq!(a, b);
    }

    #[test]
    fn plain_cylinder_volume() {
        let g = BranchingGeometry {
            branch_radii: [0.0, 0.0],
            ..Default::default()
        };
        let n = 64;
        let v = gen_branching_cylinders(n, &g).unwrap();
        let h = g.trunk_z[1] - g.trunk_z[0];
        let expected = PI * g.trunk_radius.powi(2) * h * (n as f64).powi(3);
        assert!((v.count() as f64 - expected).abs() < 0.05 * expected, "{} vs {expected}", v.count());
    }

    #[test]
    fn branching_is_mirror_symmetric_and_connected() {
        let n = 48;
        let v = gen_branching_cylinders(n, &BranchingGeometry::default()).unwrap();
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    assert_eq!(v.get(i, j, k), v.get(n - 1 - i, j, k));
                }
            }
        }
        // flood fill over 6-neighbours
        let s = v.spec();
        let start = v.bits().iter().position(|&b| b).unwrap();
        let mut seen = vec![false; s.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0;
        while let Some(idx) = stack.pop() {
            count += 1;
            let (i, j, k) = s.coords(idx);
            let nbrs = [
                (i.wrapping_sub(1), j, k),
                (i + 1, j, k),
                (i, j.wrapping_sub(1), k),
                (i, j + 1, k),
                (i, j, k.wrapping_sub(1)),
                (i, j, k + 1),
            ];
            for (a, b, c) in nbrs {
                if a < n && b < n && c < n {
                    let q = s.index(a, b, c);
                    if v.bits()[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        assert_eq!(count, v.count());
    }

    #[test]
    fn all_planes_reproduce_the_volume() {
        let v = gen_sphere(16, 0.3, [0.5; 3]).unwrap();
        let (lo, hi) = object_extent(&v, Axis::Z).unwrap();
        let planes: Vec<usize> = (lo..=hi).collect();
        let st = subsample_slices(&v, Axis::Z, &planes).unwrap();
        assert_eq!(fill_gaps_by_duplication(&st).unwrap(), v);
    }

    #[test]
    fn sphere_rule_gaps() {
        let v = Example::Sphere.volume(32).unwrap();
        for seed in 0..10 {
            let p = choose_planes(&v, Axis::Z, &Example::Sphere.default_rule(seed)).unwrap();
            assert_eq!(p.len(), 5);
            assert!(p.windows(2).all(|w| (4..=5).contains(&(w[1] - w[0]))), "{p:?}");
            assert!(p.iter().all(|&q| v.plane(Axis::Z, q).count() > 0));
            assert_eq!(
                p,
                choose_planes(&v, Axis::Z, &Example::Sphere.default_rule(seed)).unwrap()
            );
        }
    }

    #[test]
    fn branching_rule_fits() {
        let v = Example::Branching.volume(128).unwrap();
        let p = choose_planes(&v, Axis::Z, &Example::Branching.default_rule(7)).unwrap();
        assert_eq!(p.len(), 24);
        assert!(p.windows(2).all(|w| (3..=13).contains(&(w[1] - w[0]))));
        let (lo, hi) = object_extent(&v, Axis::Z).unwrap();
        assert!(p[0] >= lo && *p.last().unwrap() <= hi);
    }

    #[test]
    fn subsample_rejects_bad_planes() {
        let v = gen_sphere(16, 0.2, [0.5; 3]).unwrap();
        assert!(subsample_slices(&v, Axis::Z, &[3, 16]).is_err());
        assert!(subsample_slices(&v, Axis::Z, &[0, 1]).is_err());
    }
}
