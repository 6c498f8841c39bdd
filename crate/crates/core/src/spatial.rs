//! Uniform-grid spatial index with exact ball and k-nearest-neighbor queries,
//! plus inverse-distance feature propagation.
//!
//! Results are deterministic: neighbors come back ordered by ascending
//! distance with ties broken by the lower point index, so a grid query and a
//! linear scan over the same cloud return identical index lists.

use std::cmp::Ordering;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::scene::PointCloud;
use crate::Point3;

/// Distances below this snap an interpolation target onto its source point.
pub const COINCIDENT_DISTANCE: f64 = 1e-10;
/// Neighbor count used when propagating features onto new positions.
pub const DEFAULT_INTERPOLATION_K: usize = 3;

type Cell = [i64; 3];

#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size: f64,
    points: Vec<Point3>,
    /// Point indices grouped by cell, ascending within a cell.
    order: Vec<u32>,
    cells: FxHashMap<Cell, (u32, u32)>,
    cell_lo: Cell,
    cell_hi: Cell,
}

fn cell_of(p: &Point3, cell_size: f64) -> Cell {
    [
        (p.x / cell_size).floor() as i64,
        (p.y / cell_size).floor() as i64,
        (p.z / cell_size).floor() as i64,
    ]
}

#[inline]
fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Sort `(squared distance, index)` pairs and keep the first `max_k`.
fn finish(mut hits: Vec<(f64, usize)>, max_k: usize) -> Vec<usize> {
    if hits.len() > max_k {
        hits.select_nth_unstable_by(max_k, by_distance);
        hits.truncate(max_k);
    }
    hits.sort_unstable_by(by_distance);
    hits.into_iter().map(|(_, i)| i).collect()
}

impl GridIndex {
    pub fn build(points: &[Point3], cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::invalid(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        if points.len() > u32::MAX as usize {
            return Err(Error::invalid("too many points for a grid index"));
        }
        let mut keyed: Vec<(Cell, u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (cell_of(p, cell_size), i as u32))
            .collect();
        keyed.sort_unstable();

        let mut cells = FxHashMap::default();
        let mut cell_lo = [i64::MAX; 3];
        let mut cell_hi = [i64::MIN; 3];
        let mut start = 0;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start + 1;
            while end < keyed.len() && keyed[end].0 == key {
                end += 1;
            }
            cells.insert(key, (start as u32, end as u32));
            for a in 0..3 {
                cell_lo[a] = cell_lo[a].min(key[a]);
                cell_hi[a] = cell_hi[a].max(key[a]);
            }
            start = end;
        }
        Ok(Self {
            cell_size,
            points: points.to_vec(),
            order: keyed.into_iter().map(|(_, i)| i).collect(),
            cells,
            cell_lo,
            cell_hi,
        })
    }

    pub fn from_cloud(cloud: &PointCloud, cell_size: f64) -> Result<Self> {
        Self::build(cloud.positions(), cell_size)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Integer coordinate of the cell holding `p`.
    pub fn cell_coord(&self, p: &Point3) -> [i64; 3] {
        cell_of(p, self.cell_size)
    }

    /// Indices stored under `cell`, ascending.
    pub fn cell_members(&self, cell: [i64; 3]) -> &[u32] {
        match self.cells.get(&cell) {
            Some(&(s, e)) => &self.order[s as usize..e as usize],
            None => &[],
        }
    }

    /// Cells overlapping the axis-aligned cube `[c - reach, c + reach]`,
    /// clipped to the occupied range. `None` when nothing overlaps.
    fn cell_range(&self, center: &Point3, reach: f64) -> Option<(Cell, Cell)> {
        if self.cells.is_empty() {
            return None;
        }
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            lo[a] = ((center[a] - reach) / self.cell_size).floor() as i64;
            hi[a] = ((center[a] + reach) / self.cell_size).floor() as i64;
            lo[a] = lo[a].max(self.cell_lo[a]);
            hi[a] = hi[a].min(self.cell_hi[a]);
            if lo[a] > hi[a] {
                return None;
            }
        }
        Some((lo, hi))
    }

    fn visit_range(&self, lo: Cell, hi: Cell, mut f: impl FnMut(usize)) {
        let volume = (0..3).fold(1u128, |acc, a| acc * (hi[a] - lo[a] + 1) as u128);
        if volume > self.cells.len() as u128 {
            // Sparse grid: cheaper to walk the occupied cells directly.
            for (key, &(s, e)) in &self.cells {
                if (0..3).all(|a| key[a] >= lo[a] && key[a] <= hi[a]) {
                    self.order[s as usize..e as usize]
                        .iter()
                        .for_each(|&i| f(i as usize));
                }
            }
            return;
        }
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    if let Some(&(s, e)) = self.cells.get(&[x, y, z]) {
                        self.order[s as usize..e as usize]
                            .iter()
                            .for_each(|&i| f(i as usize));
                    }
                }
            }
        }
    }

    /// Up to `max_k` points with `|p - center| <= radius`, nearest first.
    pub fn ball_query(&self, center: &Point3, radius: f64, max_k: usize) -> Vec<usize> {
        if max_k == 0 || !(radius >= 0.0) {
            return Vec::new();
        }
        let r2 = radius * radius;
        // Padding keeps boundary points whose squared distance rounds down to r².
        let reach = radius * (1.0 + 1e-9) + 1e-12;
        let Some((lo, hi)) = self.cell_range(center, reach) else {
            return Vec::new();
        };
        let mut hits = Vec::new();
        self.visit_range(lo, hi, |i| {
            let d2 = (self.points[i] - center).norm_squared();
            if d2 <= r2 {
                hits.push((d2, i));
            }
        });
        finish(hits, max_k)
    }

    /// Every point within `radius`, nearest first.
    pub fn ball_query_all(&self, center: &Point3, radius: f64) -> Vec<usize> {
        self.ball_query(center, radius, usize::MAX)
    }

    /// Whether any point within `radius` of `center` satisfies `pred`.
    pub fn any_within(
        &self,
        center: &Point3,
        radius: f64,
        mut pred: impl FnMut(usize) -> bool,
    ) -> bool {
        let r2 = radius * radius;
        let reach = radius * (1.0 + 1e-9) + 1e-12;
        let Some((lo, hi)) = self.cell_range(center, reach) else {
            return false;
        };
        let mut found = false;
        self.visit_range(lo, hi, |i| {
            if !found && (self.points[i] - center).norm_squared() <= r2 && pred(i) {
                found = true;
            }
        });
        found
    }

    /// The `k` nearest points, nearest first, ties by lower index.
    pub fn knn(&self, query: &Point3, k: usize) -> Vec<usize> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let home = cell_of(query, self.cell_size);
        let max_shell = (0..3)
            .map(|a| {
                (home[a] - self.cell_lo[a])
                    .abs()
                    .max((self.cell_hi[a] - home[a]).abs())
            })
            .max()
            .unwrap_or(0);
        let mut shell = 0i64;
        loop {
            let lo = [home[0] - shell, home[1] - shell, home[2] - shell];
            let hi = [home[0] + shell, home[1] + shell, home[2] + shell];
            let mut hits = Vec::new();
            self.visit_range(lo, hi, |i| {
                hits.push(((self.points[i] - query).norm_squared(), i));
            });
            // Every point outside the block is at least `shell · cell` away.
            let covered = shell as f64 * self.cell_size;
            if shell >= max_shell {
                return finish(hits, k);
            }
            if hits.len() >= k {
                let mut sorted = hits.clone();
                sorted.select_nth_unstable_by(k - 1, by_distance);
                if sorted[k - 1].0.sqrt() < covered {
                    return finish(hits, k);
                }
            }
            shell += 1;
        }
    }
}

/// Inverse-distance weights over the `k` nearest `src` points of each
/// destination. Returns a row-major `(dst.len(), C)` matrix.
pub fn interpolate_features(src: &PointCloud, dst: &[Point3], k: usize) -> Result<Vec<f64>> {
    if !src.has_features() {
        return Err(Error::invalid("interpolation source has no features"));
    }
    if k == 0 || k > src.len() {
        return Err(Error::invalid(format!(
            "interpolation needs 1 <= k <= {} source points, got k = {k}",
            src.len()
        )));
    }
    let c = src.feature_dim();
    let extent = bounding_extent(src.positions());
    let cell = (extent / (src.len() as f64).cbrt()).max(1e-3);
    let grid = GridIndex::build(src.positions(), cell)?;
    let mut out = vec![0.0; dst.len() * c];
    for (row, q) in out.chunks_exact_mut(c).zip(dst) {
        let nn = grid.knn(q, k);
        let weights = idw_weights(src.positions(), &nn, q);
        for (&j, w) in nn.iter().zip(&weights) {
            if *w == 0.0 {
                continue;
            }
            for (o, f) in row.iter_mut().zip(src.feature(j)) {
                *o += w * f;
            }
        }
    }
    Ok(out)
}

/// Normalized `1/d` weights; a coincident neighbor takes all the weight.
pub fn idw_weights(points: &[Point3], neighbors: &[usize], q: &Point3) -> Vec<f64> {
    let dists: Vec<f64> = neighbors.iter().map(|&j| (points[j] - q).norm()).collect();
    if let Some(hit) = dists.iter().position(|&d| d < COINCIDENT_DISTANCE) {
        let mut w = vec![0.0; dists.len()];
        w[hit] = 1.0;
        return w;
    }
    let inv: Vec<f64> = dists.iter().map(|d| 1.0 / d).collect();
    let total: f64 = inv.iter().sum();
    inv.into_iter().map(|x| x / total).collect()
}

fn bounding_extent(points: &[Point3]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_points(rng: &mut SplitMix64, n: usize, extent: f64) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.uniform(-extent, extent),
                    rng.uniform(-extent, extent),
                    rng.uniform(-extent, extent),
                )
            })
            .collect()
    }

    fn brute_ball(points: &[Point3], c: &Point3, r: f64, max_k: usize) -> Vec<usize> {
        let mut v: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p - c).norm_squared(), i))
            .filter(|(d2, _)| *d2 <= r * r)
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        v.into_iter().take(max_k).map(|(_, i)| i).collect()
    }

    fn brute_knn(points: &[Point3], q: &Point3, k: usize) -> Vec<usize> {
        let mut v: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p - q).norm_squared(), i))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        v.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn empty_index() {
        let g = GridIndex::build(&[], 0.1).unwrap();
        assert!(g.is_empty());
        assert_eq!(g.cell_count(), 0);
        assert!(g.ball_query(&Point3::origin(), 1.0, 8).is_empty());
        assert!(g.knn(&Point3::origin(), 3).is_empty());
    }

    #[test]
    fn cell_assignment() {
        let p = Point3::new(0.05, 0.05, 0.05);
        let g = GridIndex::build(&[p], 0.1).unwrap();
        assert_eq!(g.cell_coord(&p), [0, 0, 0]);
        assert_eq!(g.cell_members([0, 0, 0]), &[0]);
        let q = Point3::new(-0.05, 0.15, 0.0);
        assert_eq!(
            GridIndex::build(&[q], 0.1).unwrap().cell_coord(&q),
            [-1, 1, 0]
        );
    }

    #[test]
    fn rejects_bad_cell_size() {
        assert!(GridIndex::build(&[], 0.0).is_err());
        assert!(GridIndex::build(&[], -1.0).is_err());
        assert!(GridIndex::build(&[], f64::NAN).is_err());
    }

    #[test]
    fn every_point_indexed_once() {
        let mut rng = SplitMix64::new(3);
        let pts = random_points(&mut rng, 1000, 2.0);
        let g = GridIndex::build(&pts, 0.3).unwrap();
        let mut seen = vec![0u32; pts.len()];
        for i in g.order.iter() {
            seen[*i as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));
        for (i, p) in pts.iter().enumerate() {
            assert!(g.cell_members(g.cell_coord(p)).contains(&(i as u32)));
        }
    }

    #[test]
    fn isolated_point_at_anchor_radius() {
        let pts = vec![Point3::new(1.0, 1.0, 1.0), Point3::new(3.0, 3.0, 3.0)];
        let g = GridIndex::build(&pts, 0.2).unwrap();
        assert_eq!(g.ball_query(&pts[0], 0.2, 8), vec![0]);
    }

    #[test]
    fn ball_matches_brute_force() {
        let mut rng = SplitMix64::new(11);
        let pts = random_points(&mut rng, 1000, 1.0);
        let g = GridIndex::build(&pts, 0.2).unwrap();
        for _ in 0..100 {
            let c = Point3::new(
                rng.uniform(-1.2, 1.2),
                rng.uniform(-1.2, 1.2),
                rng.uniform(-1.2, 1.2),
            );
            let r = rng.uniform(0.01, 0.6);
            let k = 1 + rng.below(40) as usize;
            assert_eq!(g.ball_query(&c, r, k), brute_ball(&pts, &c, r, k));
            assert_eq!(g.ball_query_all(&c, r), brute_ball(&pts, &c, r, usize::MAX));
        }
    }

    #[test]
    fn knn_matches_brute_force() {
        let mut rng = SplitMix64::new(12);
        let pts = random_points(&mut rng, 500, 1.0);
        for cell in [0.05, 0.3, 5.0] {
            let g = GridIndex::build(&pts, cell).unwrap();
            for _ in 0..60 {
                let q = Point3::new(
                    rng.uniform(-3.0, 3.0),
                    rng.uniform(-3.0, 3.0),
                    rng.uniform(-3.0, 3.0),
                );
                let k = 1 + rng.below(10) as usize;
                assert_eq!(g.knn(&q, k), brute_knn(&pts, &q, k));
            }
        }
    }

    #[test]
    fn knn_ties_prefer_lower_index() {
        let pts = vec![
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let g = GridIndex::build(&pts, 0.4).unwrap();
        assert_eq!(g.knn(&Point3::origin(), 2), vec![0, 1]);
    }

    #[test]
    fn interpolation_copies_coincident_feature() {
        let src = PointCloud::with_features(
            vec![
                Point3::origin(),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            2,
        )
        .unwrap();
        let out = interpolate_features(&src, &[Point3::new(1.0, 0.0, 0.0)], 3).unwrap();
        assert_eq!(out, vec![3.0, 4.0]);
    }

    #[test]
    fn interpolation_midpoint_is_mean() {
        let src = PointCloud::with_features(
            vec![Point3::origin(), Point3::new(2.0, 0.0, 0.0)],
            vec![1.0, 10.0, 3.0, 20.0],
            2,
        )
        .unwrap();
        let out = interpolate_features(&src, &[Point3::new(1.0, 0.0, 0.0)], 2).unwrap();
        assert!((out[0] - 2.0).abs() < 1e-15);
        assert!((out[1] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_errors() {
        let bare = PointCloud::new(vec![Point3::origin()]).unwrap();
        assert!(interpolate_features(&bare, &[Point3::origin()], 1).is_err());
        let src = PointCloud::with_features(vec![Point3::origin()], vec![1.0], 1).unwrap();
        assert!(interpolate_features(&src, &[Point3::origin()], 2).is_err());
        assert!(interpolate_features(&src, &[Point3::origin()], 0).is_err());
    }

    #[test]
    fn weights_sum_to_one() {
        let mut rng = SplitMix64::new(5);
        let pts = random_points(&mut rng, 50, 1.0);
        for _ in 0..50 {
            let q = Point3::new(rng.next_f64(), rng.next_f64(), rng.next_f64());
            let nn = brute_knn(&pts, &q, 3);
            let w = idw_weights(&pts, &nn, &q);
            assert!(w.iter().all(|x| *x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
