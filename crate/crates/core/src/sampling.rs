//! Point subsampling (farthest point and foreground-biased) and anchor
//! placement along rays (stratified coarse, inverse-CDF fine).

use crate::error::{Error, Result};
use crate::rays::RayBundle;
use crate::Point3;

/// Where an index in a [`ScoredSampleSet`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    Fps,
    FbsForeground,
    FbsBackground,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSampleSet {
    pub indices: Vec<usize>,
    /// Foreground score per selected index; `None` for plain FPS.
    pub scores: Option<Vec<f64>>,
    pub sources: Vec<SampleSource>,
}

impl ScoredSampleSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn count(&self, source: SampleSource) -> usize {
        self.sources.iter().filter(|s| **s == source).count()
    }
}

/// Greedy max-min subset of `m` points starting from `seed_index`.
///
/// Ties go to the lowest index. Distances are compared squared.
pub fn farthest_point_sampling(
    points: &[Point3],
    m: usize,
    seed_index: usize,
) -> Result<ScoredSampleSet> {
    let indices = fps_indices(points, m, seed_index)?;
    Ok(ScoredSampleSet {
        sources: vec![SampleSource::Fps; indices.len()],
        indices,
        scores: None,
    })
}

pub fn fps_indices(points: &[Point3], m: usize, seed_index: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "FPS sample count must be in 1..={n}, got {m}"
        )));
    }
    if seed_index >= n {
        return Err(Error::invalid(format!(
            "FPS seed index {seed_index} out of range for {n} points"
        )));
    }
    // Taken points hold -inf so they never win and never update.
    let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut out = Vec::with_capacity(m);
    let mut current = seed_index;
    loop {
        out.push(current);
        min_d2[current] = f64::NEG_INFINITY;
        if out.len() == m {
            return Ok(out);
        }
        let [cx, cy, cz] = coords[current];
        let mut best = usize::MAX;
        let mut best_d2 = f64::NEG_INFINITY;
        for (j, (q, d)) in coords.iter().zip(min_d2.iter_mut()).enumerate() {
            let (dx, dy, dz) = (q[0] - cx, q[1] - cy, q[2] - cz);
            let d2 = dx * dx + dy * dy + dz * dz;
            if d2 < *d {
                *d = d2;
            }
            if *d > best_d2 {
                best_d2 = *d;
                best = j;
            }
        }
        current = best;
    }
}

/// Indices of the `kappa` highest scores (ties by lower index) and the rest,
/// both ascending by index.
pub fn foreground_split(scores: &[f64], kappa: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if kappa > scores.len() {
        return Err(Error::invalid(format!(
            "foreground size {kappa} exceeds {} scored points",
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("score {i} is not finite")));
    }
    let mut ranked: Vec<usize> = (0..scores.len()).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut fg = ranked[..kappa].to_vec();
    let mut bg = ranked[kappa..].to_vec();
    fg.sort_unstable();
    bg.sort_unstable();
    Ok((fg, bg))
}

/// FPS inside a subset; `seed` is a position in `subset`. Returns global indices.
fn fps_on_subset(points: &[Point3], subset: &[usize], m: usize, seed: usize) -> Result<Vec<usize>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    let sub: Vec<Point3> = subset.iter().map(|&i| points[i]).collect();
    Ok(fps_indices(&sub, m, seed)?
        .into_iter()
        .map(|j| subset[j])
        .collect())
}

/// Split by score into `kappa` foreground and the remaining background points,
/// run FPS for `alpha` samples on the foreground and `beta` on the
/// background, and concatenate (foreground first).
///
/// `seeds` are FPS start positions within the foreground and background
/// subsets (both ordered by ascending point index).
pub fn foreground_biased_sampling(
    points: &[Point3],
    scores: &[f64],
    kappa: usize,
    alpha: usize,
    beta: usize,
    seeds: (usize, usize),
) -> Result<ScoredSampleSet> {
    if scores.len() != points.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} points",
            scores.len(),
            points.len()
        )));
    }
    if kappa > points.len() {
        return Err(Error::invalid(format!(
            "kappa = {kappa} exceeds {} points",
            points.len()
        )));
    }
    if alpha > kappa {
        return Err(Error::invalid(format!(
            "alpha = {alpha} exceeds kappa = {kappa}"
        )));
    }
    if beta > points.len() - kappa {
        return Err(Error::invalid(format!(
            "beta = {beta} exceeds the {} background points",
            points.len() - kappa
        )));
    }
    let (fg, bg) = foreground_split(scores, kappa)?;
    let fg_pick = fps_on_subset(points, &fg, alpha, seeds.0)?;
    let bg_pick = fps_on_subset(points, &bg, beta, seeds.1)?;

    let mut sources = vec![SampleSource::FbsForeground; fg_pick.len()];
    sources.resize(fg_pick.len() + bg_pick.len(), SampleSource::FbsBackground);
    let mut indices = fg_pick;
    indices.extend(bg_pick);
    let picked_scores = indices.iter().map(|&i| scores[i]).collect();
    Ok(ScoredSampleSet {
        indices,
        scores: Some(picked_scores),
        sources,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorStage {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorPoint {
    pub position: Point3,
    /// Fraction of the ray's far bound.
    pub t: f64,
    pub ray_index: usize,
    pub stage: AnchorStage,
    pub mask: Option<bool>,
    pub local_feature: Option<Vec<f64>>,
}

/// Anchors of one bundle in `(ray, k)` order, `per_ray` per ray.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub stage: AnchorStage,
    pub num_rays: usize,
    pub per_ray: usize,
    pub anchors: Vec<AnchorPoint>,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn positions(&self) -> Vec<Point3> {
        self.anchors.iter().map(|a| a.position).collect()
    }

    pub fn ray(&self, ray: usize) -> &[AnchorPoint] {
        &self.anchors[ray * self.per_ray..(ray + 1) * self.per_ray]
    }

    /// Store labels (same order as `anchors`).
    pub fn set_masks(&mut self, labels: &[bool]) -> Result<()> {
        if labels.len() != self.anchors.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} anchors",
                labels.len(),
                self.anchors.len()
            )));
        }
        for (a, &l) in self.anchors.iter_mut().zip(labels) {
            a.mask = Some(l);
        }
        Ok(())
    }

    /// Per-ray mask rows; unlabelled anchors count as negative.
    pub fn mask_rows(&self) -> Vec<Vec<bool>> {
        (0..self.num_rays)
            .map(|r| {
                self.ray(r)
                    .iter()
                    .map(|a| a.mask.unwrap_or(false))
                    .collect()
            })
            .collect()
    }
}

fn place(
    bundle: &RayBundle,
    stage: AnchorStage,
    per_ray: usize,
    ts: impl Fn(usize) -> Vec<f64>,
) -> AnchorSet {
    let mut anchors = Vec::with_capacity(bundle.len() * per_ray);
    for (ri, ray) in bundle.rays.iter().enumerate() {
        for t in ts(ri) {
            anchors.push(AnchorPoint {
                position: ray.at(t),
                t,
                ray_index: ri,
                stage,
                mask: None,
                local_feature: None,
            });
        }
    }
    AnchorSet {
        stage,
        num_rays: bundle.len(),
        per_ray,
        anchors,
    }
}

/// Bin-center fractions `(k - 0.5) / bins` for `k = 1..=bins`.
pub fn stratified_fractions(bins: usize) -> Vec<f64> {
    (1..=bins)
        .map(|k| (2 * k - 1) as f64 / (2 * bins) as f64)
        .collect()
}

/// `num_coarse` anchors per ray at the centers of equal bins.
pub fn coarse_anchors(bundle: &RayBundle, num_coarse: usize) -> Result<AnchorSet> {
    if num_coarse == 0 {
        return Err(Error::invalid("coarse anchor count must be at least 1"));
    }
    let ts = stratified_fractions(num_coarse);
    Ok(place(bundle, AnchorStage::Coarse, num_coarse, |_| {
        ts.clone()
    }))
}

/// Inverse-CDF fractions for one ray.
///
/// The binary coarse masks define a piecewise-constant density over equal
/// bins; the CDF is inverted at `u_k = k / num_fine`. With no positive bin
/// the samples fall back to `k / (num_fine + 1)` along the whole ray.
///
/// Evaluated in integer arithmetic up to one final division, so the
/// fractions are correctly rounded.
pub fn fine_fractions(masks: &[bool], num_fine: usize) -> Vec<f64> {
    let bins = masks.len();
    let total = masks.iter().filter(|m| **m).count();
    if total == 0 {
        return (1..=num_fine)
            .map(|k| k as f64 / (num_fine + 1) as f64)
            .collect();
    }
    let (s, kf, kc) = (total as u64, num_fine as u64, bins as u64);
    let mut cumulative = Vec::with_capacity(bins);
    let mut acc = 0u64;
    for &m in masks {
        acc += m as u64;
        cumulative.push(acc);
    }
    (1..=kf)
        .map(|k| {
            // First bin whose CDF reaches u = k / kf, i.e. cum_j · kf >= k · s.
            // That bin always has mass since the CDF is flat over empty bins.
            let j = cumulative.iter().position(|&c| c * kf >= k * s).unwrap();
            let before = if j == 0 { 0 } else { cumulative[j - 1] };
            let numer = j as u64 * kf + k * s - before * kf;
            numer as f64 / (kf * kc) as f64
        })
        .collect()
}

/// Hard masks from predicted probabilities (`p >= threshold`).
pub fn threshold_masks(probs: &[f64], threshold: f64) -> Vec<bool> {
    probs.iter().map(|&p| p >= threshold).collect()
}

/// `num_fine` anchors per ray concentrated in the positive coarse bins.
pub fn fine_anchors(
    coarse_masks: &[Vec<bool>],
    num_fine: usize,
    bundle: &RayBundle,
) -> Result<AnchorSet> {
    if num_fine == 0 {
        return Err(Error::invalid("fine anchor count must be at least 1"));
    }
    if coarse_masks.len() != bundle.len() {
        return Err(Error::invalid(format!(
            "{} mask rows for {} rays",
            coarse_masks.len(),
            bundle.len()
        )));
    }
    if let Some(row) = coarse_masks.first() {
        if row.is_empty() || coarse_masks.iter().any(|r| r.len() != row.len()) {
            return Err(Error::invalid("mask rows must share one non-zero length"));
        }
    }
    Ok(place(bundle, AnchorStage::Fine, num_fine, |ri| {
        fine_fractions(&coarse_masks[ri], num_fine)
    }))
}
