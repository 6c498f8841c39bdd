//! Synthetic rooms of boxy objects, and the brute-force references the rest
//! of the crate is tested against.
//!
//! All randomness comes from [`SplitMix64`], so a [`SceneSpec`] fully
//! determines its scene.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scene::{Box3D, PointCloud, Scene, SceneAnnotation};
use crate::{Point3, Vector3};

/// Placement attempts allowed per scene before giving up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// Room spans `[0, x] × [0, y] × [0, z]`.
    pub room_extent: [f64; 3],
    pub n_objects: usize,
    /// Per-axis `(min, max)` full box lengths.
    pub size_range: [[f64; 2]; 3],
    pub points_per_object: usize,
    pub background_points: usize,
    pub rng_seed: u64,
    #[serde(default = "default_classes")]
    pub num_classes: u32,
}

fn default_classes() -> u32 {
    4
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            room_extent: [6.0, 6.0, 3.0],
            n_objects: 6,
            size_range: [[0.5, 1.5], [0.5, 1.5], [0.5, 1.2]],
            points_per_object: 200,
            background_points: 800,
            rng_seed: 0,
            num_classes: default_classes(),
        }
    }
}

impl SceneSpec {
    fn validate(&self) -> Result<()> {
        for a in 0..3 {
            let [lo, hi] = self.size_range[a];
            if !(self.room_extent[a] > 0.0) {
                return Err(Error::invalid("room extent must be positive"));
            }
            if !(lo > 0.0 && lo <= hi) {
                return Err(Error::invalid(format!(
                    "size range on axis {a} must satisfy 0 < min <= max, got [{lo}, {hi}]"
                )));
            }
            if hi > self.room_extent[a] {
                return Err(Error::invalid(format!(
                    "objects up to {hi} m cannot fit a room of {} m on axis {a}",
                    self.room_extent[a]
                )));
            }
        }
        if self.num_classes == 0 {
            return Err(Error::invalid("num_classes must be positive"));
        }
        Ok(())
    }
}

fn overlaps(a: &Box3D, b: &Box3D) -> bool {
    let (amin, amax, bmin, bmax) = (a.min(), a.max(), b.min(), b.max());
    (0..3).all(|ax| amin[ax] < bmax[ax] && bmin[ax] < amax[ax])
}

/// Pick an index proportionally to `weights`.
fn weighted_pick(rng: &mut SplitMix64, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.next_f64() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Uniform point on the surface of `b`, faces weighted by area.
pub fn sample_box_surface(rng: &mut SplitMix64, b: &Box3D) -> Point3 {
    let s = b.size;
    let areas = [
        s.y * s.z,
        s.y * s.z,
        s.x * s.z,
        s.x * s.z,
        s.x * s.y,
        s.x * s.y,
    ];
    let face = weighted_pick(rng, &areas);
    let (lo, hi) = (b.min(), b.max());
    let mut p = Point3::new(
        rng.uniform(lo.x, hi.x),
        rng.uniform(lo.y, hi.y),
        rng.uniform(lo.z, hi.z),
    );
    let axis = face / 2;
    p[axis] = if face.is_multiple_of(2) { lo[axis] } else { hi[axis] };
    p
}

fn sample_room_shell(rng: &mut SplitMix64, extent: &[f64; 3]) -> Point3 {
    let [ex, ey, ez] = *extent;
    // floor, wall x=0, wall x=ex, wall y=0, wall y=ey
    let areas = [ex * ey, ey * ez, ey * ez, ex * ez, ex * ez];
    let mut p = Point3::new(
        rng.uniform(0.0, ex),
        rng.uniform(0.0, ey),
        rng.uniform(0.0, ez),
    );
    match weighted_pick(rng, &areas) {
        0 => p.z = 0.0,
        1 => p.x = 0.0,
        2 => p.x = ex,
        3 => p.y = 0.0,
        _ => p.y = ey,
    }
    p
}

/// Non-overlapping boxes resting on the floor, surface points on every face,
/// background points on the floor and walls. Point order is shuffled.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.rng_seed);
    let mut boxes: Vec<Box3D> = Vec::with_capacity(spec.n_objects);
    let mut attempts = 0;
    while boxes.len() < spec.n_objects {
        if attempts == MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::GenerationFailure(format!(
                "placed {} of {} objects in {MAX_PLACEMENT_ATTEMPTS} attempts",
                boxes.len(),
                spec.n_objects
            )));
        }
        attempts += 1;
        let size = Vector3::from_fn(|a, _| {
            let [lo, hi] = spec.size_range[a];
            rng.uniform(lo, hi)
        });
        let ex = spec.room_extent;
        let center = Point3::new(
            rng.uniform(size.x / 2.0, ex[0] - size.x / 2.0),
            rng.uniform(size.y / 2.0, ex[1] - size.y / 2.0),
            size.z / 2.0,
        );
        let class_id = rng.below(spec.num_classes as u64) as u32;
        let candidate = Box3D::new(center, size, class_id)?;
        if boxes.iter().any(|b| overlaps(b, &candidate)) {
            continue;
        }
        boxes.push(candidate);
    }

    let total = spec.n_objects * spec.points_per_object + spec.background_points;
    let mut points = Vec::with_capacity(total);
    let mut ids = Vec::with_capacity(total);
    for (i, b) in boxes.iter().enumerate() {
        for _ in 0..spec.points_per_object {
            points.push(sample_box_surface(&mut rng, b));
            ids.push(i as i64);
        }
    }
    for _ in 0..spec.background_points {
        points.push(sample_room_shell(&mut rng, &spec.room_extent));
        ids.push(-1);
    }
    for i in (1..points.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        points.swap(i, j);
        ids.swap(i, j);
    }
    Scene::new(
        PointCloud::new(points)?,
        SceneAnnotation {
            boxes,
            point_instance_ids: ids,
        },
    )
}

/// Foreground points vote for their box center; background points for themselves.
pub fn oracle_votes(cloud: &PointCloud, annotation: &SceneAnnotation) -> PointCloud {
    let votes = cloud
        .positions()
        .iter()
        .enumerate()
        .map(|(i, p)| match annotation.instance_of(i) {
            Some(b) => annotation.boxes[b].center,
            None => *p,
        })
        .collect();
    PointCloud::new(votes).expect("votes are finite")
}

/// Score 1 on object points, 0 elsewhere.
pub fn oracle_scores(annotation: &SceneAnnotation) -> Vec<f64> {
    annotation
        .point_instance_ids
        .iter()
        .map(|&id| if id >= 0 { 1.0 } else { 0.0 })
        .collect()
}

/// Quadratic-per-step farthest point sampling that recomputes every
/// point-to-selection distance from scratch.
pub fn oracle_fps(points: &[Point3], m: usize, seed_index: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if m == 0 || m > n || seed_index >= n {
        return Err(Error::invalid(format!(
            "oracle FPS needs 1 <= m <= {n} and seed < {n}, got m = {m}, seed = {seed_index}"
        )));
    }
    let mut selected = vec![seed_index];
    while selected.len() < m {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..n {
            if selected.contains(&j) {
                continue;
            }
            let dmin = selected
                .iter()
                .map(|&s| (points[j] - points[s]).norm_squared())
                .fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(bd, _)| dmin > bd) {
                best = Some((dmin, j));
            }
        }
        selected.push(best.expect("unselected point remains").1);
    }
    Ok(selected)
}

/// Linear-scan radius search, nearest first, ties by lower index.
pub fn oracle_ball_query(points: &[Point3], center: &Point3, radius: f64) -> Vec<usize> {
    let r2 = radius * radius;
    let mut hits: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let d2 = (p - center).norm_squared();
            (d2 <= r2).then_some((d2, i))
        })
        .collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    hits.into_iter().map(|(_, i)| i).collect()
}

/// Monte Carlo IoU over the joint bounding box: `(estimate, standard error)`.
pub fn oracle_iou_mc(a: &Box3D, b: &Box3D, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 100_000 {
        return Err(Error::invalid(format!(
            "Monte Carlo IoU needs at least 1e5 samples, got {samples}"
        )));
    }
    let lo = Point3::from(a.min().coords.inf(&b.min().coords));
    let hi = Point3::from(a.max().coords.sup(&b.max().coords));
    let mut rng = SplitMix64::new(seed);
    let (mut either, mut both) = (0usize, 0usize);
    for _ in 0..samples {
        let p = Point3::new(
            rng.uniform(lo.x, hi.x),
            rng.uniform(lo.y, hi.y),
            rng.uniform(lo.z, hi.z),
        );
        let (ia, ib) = (a.contains(&p, 0.0), b.contains(&p, 0.0));
        either += (ia || ib) as usize;
        both += (ia && ib) as usize;
    }
    if either == 0 {
        return Ok((0.0, 0.0));
    }
    let est = both as f64 / either as f64;
    Ok((est, (est * (1.0 - est) / either as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::MEMBERSHIP_TOLERANCE;

    #[test]
    fn background_only() {
        let spec = SceneSpec {
            n_objects: 0,
            background_points: 50,
            ..SceneSpec::default()
        };
        let s = generate_scene(&spec).unwrap();
        assert!(s.annotation.boxes.is_empty());
        assert!(s.annotation.point_instance_ids.iter().all(|&i| i == -1));
        assert_eq!(s.cloud.len(), 50);
    }

    #[test]
    fn unit_cube_points_on_faces() {
        let mut rng = SplitMix64::new(9);
        let b = Box3D::new(Point3::new(2.0, 2.0, 0.5), Vector3::new(1.0, 1.0, 1.0), 0).unwrap();
        for _ in 0..100 {
            let p = sample_box_surface(&mut rng, &b);
            assert!(b.contains(&p, 0.0));
            let on_face = (0..3)
                .any(|a| (p[a] - b.min()[a]).abs() < 1e-9 || (p[a] - b.max()[a]).abs() < 1e-9);
            assert!(on_face);
        }
    }

    #[test]
    fn deterministic_and_valid() {
        let spec = SceneSpec {
            rng_seed: 42,
            ..SceneSpec::default()
        };
        let a = generate_scene(&spec).unwrap();
        let b = generate_scene(&spec).unwrap();
        assert_eq!(a, b);
        a.annotation.validate(&a.cloud).unwrap();
        for (i, x) in a.annotation.boxes.iter().enumerate() {
            for y in &a.annotation.boxes[i + 1..] {
                assert!(!overlaps(x, y));
            }
            assert!(x.min().iter().all(|c| *c >= -MEMBERSHIP_TOLERANCE));
            for ax in 0..3 {
                assert!(x.max()[ax] <= spec.room_extent[ax] + 1e-12);
            }
        }
    }

    #[test]
    fn crowded_room_fails() {
        let spec = SceneSpec {
            room_extent: [1.0, 1.0, 1.0],
            n_objects: 5,
            size_range: [[0.9, 0.9], [0.9, 0.9], [0.5, 0.5]],
            ..SceneSpec::default()
        };
        assert!(matches!(
            generate_scene(&spec),
            Err(Error::GenerationFailure(_))
        ));
    }

    #[test]
    fn votes() {
        let s = generate_scene(&SceneSpec {
            rng_seed: 3,
            ..SceneSpec::default()
        })
        .unwrap();
        let v = oracle_votes(&s.cloud, &s.annotation);
        for i in 0..s.cloud.len() {
            match s.annotation.instance_of(i) {
                Some(b) => assert_eq!(v.position(i), s.annotation.boxes[b].center),
                None => assert_eq!(v.position(i), s.cloud.position(i)),
            }
        }
    }

    #[test]
    fn oracle_fps_exhaustion() {
        let pts: Vec<Point3> = [0.0, 1.0, 2.0, 3.0]
            .iter()
            .map(|&x| Point3::new(x, 0.0, 0.0))
            .collect();
        assert_eq!(oracle_fps(&pts, 2, 0).unwrap(), vec![0, 3]);
        let mut all = oracle_fps(&pts, 4, 1).unwrap();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn oracle_ball() {
        assert!(oracle_ball_query(&[], &Point3::origin(), 1.0).is_empty());
        let pts = [Point3::new(1.0, 0.0, 0.0), Point3::origin()];
        assert_eq!(oracle_ball_query(&pts, &Point3::origin(), 1.0), vec![1, 0]);
        assert_eq!(oracle_ball_query(&pts, &Point3::origin(), 0.5), vec![1]);
    }

    #[test]
    fn monte_carlo_iou() {
        let a = Box3D::new(Point3::origin(), Vector3::new(1.0, 1.0, 1.0), 0).unwrap();
        let far = Box3D {
            center: Point3::new(3.0, 0.0, 0.0),
            ..a
        };
        assert_eq!(oracle_iou_mc(&a, &a, 100_000, 1).unwrap().0, 1.0);
        assert_eq!(oracle_iou_mc(&a, &far, 100_000, 1).unwrap().0, 0.0);
        assert!(oracle_iou_mc(&a, &a, 10, 1).is_err());
    }
}
