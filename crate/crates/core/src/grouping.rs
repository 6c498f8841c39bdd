//! Vote clustering, positive-cluster assignment, anchor labelling and the
//! ordered ray-feature layout.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rays::scale_target;
use crate::sampling::{fps_indices, AnchorSet, AnchorStage};
use crate::scene::{Box3D, PointCloud, SceneAnnotation};
use crate::spatial::GridIndex;
use crate::Point3;

pub const DEFAULT_VOTE_RADIUS: f64 = 0.3;
pub const DEFAULT_POSITIVE_RADIUS: f64 = 0.3;
pub const DEFAULT_NUM_CANDIDATES: usize = 256;
pub const TOY_FEATURE_DIM: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMode {
    /// FPS over vote positions.
    #[default]
    VoteFps,
    /// FPS over seed positions, then take the matching votes.
    SeedFps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteCluster {
    pub center: Point3,
    /// Mean feature of the member votes; empty when votes carry no features.
    pub feature: Vec<f64>,
    pub member_seed_indices: Vec<usize>,
    pub positive: Option<bool>,
    pub scale: Option<f64>,
    pub assigned_box: Option<usize>,
}

/// Pick `m` candidate vote indices.
pub fn sample_candidates(
    votes: &[Point3],
    seeds: &[Point3],
    m: usize,
    mode: CandidateMode,
) -> Result<Vec<usize>> {
    if votes.len() != seeds.len() {
        return Err(Error::invalid(format!(
            "{} votes but {} seeds",
            votes.len(),
            seeds.len()
        )));
    }
    if m > votes.len() {
        return Err(Error::invalid(format!(
            "cannot draw {m} candidates from {} votes",
            votes.len()
        )));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    match mode {
        CandidateMode::VoteFps => fps_indices(votes, m, 0),
        CandidateMode::SeedFps => fps_indices(seeds, m, 0),
    }
}

/// One cluster per candidate; members are every vote within `radius`,
/// ascending by index.
pub fn group_votes(
    candidates: &[Point3],
    votes: &PointCloud,
    radius: f64,
) -> Result<Vec<VoteCluster>> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!(
            "grouping radius must be positive, got {radius}"
        )));
    }
    let grid = GridIndex::from_cloud(votes, radius)?;
    Ok(candidates
        .iter()
        .map(|c| {
            let mut members = grid.ball_query_all(c, radius);
            members.sort_unstable();
            let feature = mean_feature(votes, &members);
            VoteCluster {
                center: *c,
                feature,
                member_seed_indices: members,
                positive: None,
                scale: None,
                assigned_box: None,
            }
        })
        .collect())
}

fn mean_feature(cloud: &PointCloud, members: &[usize]) -> Vec<f64> {
    if !cloud.has_features() || members.is_empty() {
        return vec![0.0; cloud.feature_dim()];
    }
    let mut acc = vec![0.0; cloud.feature_dim()];
    for &i in members {
        for (a, f) in acc.iter_mut().zip(cloud.feature(i)) {
            *a += f;
        }
    }
    let n = members.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Nearest box center within `radius` (ties by lower box index).
pub fn nearest_box(center: &Point3, boxes: &[Box3D], radius: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, b) in boxes.iter().enumerate() {
        let d = (b.center - center).norm();
        if d <= radius && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}

/// Flag clusters near a GT center as positive and attach that box's scale target.
pub fn assign_positive_clusters(
    mut clusters: Vec<VoteCluster>,
    gt_boxes: &[Box3D],
    radius: f64,
) -> Vec<VoteCluster> {
    for c in &mut clusters {
        match nearest_box(&c.center, gt_boxes, radius) {
            Some(i) => {
                c.positive = Some(true);
                c.scale = Some(scale_target(&gt_boxes[i]));
                c.assigned_box = Some(i);
            }
            None => {
                c.positive = Some(false);
                c.scale = None;
                c.assigned_box = None;
            }
        }
    }
    clusters
}

/// Label each anchor positive iff some point of `assigned_box` lies within
/// `radius` of it. `grid` must index the annotated cloud.
pub fn anchor_mask_labels_indexed(
    anchors: &AnchorSet,
    annotation: &SceneAnnotation,
    grid: &GridIndex,
    radius: f64,
    assigned_box: Option<usize>,
) -> Vec<bool> {
    let Some(target) = assigned_box else {
        return vec![false; anchors.len()];
    };
    let target = target as i64;
    anchors
        .anchors
        .iter()
        .map(|a| {
            grid.any_within(&a.position, radius, |i| {
                annotation.point_instance_ids[i] == target
            })
        })
        .collect()
}

pub fn anchor_mask_labels(
    anchors: &AnchorSet,
    annotation: &SceneAnnotation,
    cloud: &PointCloud,
    radius: f64,
    assigned_box: Option<usize>,
) -> Result<Vec<bool>> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!(
            "label radius must be positive, got {radius}"
        )));
    }
    if let Some(b) = assigned_box {
        if b >= annotation.boxes.len() {
            return Err(Error::invalid(format!(
                "assigned box {b} out of range for {} boxes",
                annotation.boxes.len()
            )));
        }
    }
    let grid = GridIndex::from_cloud(cloud, radius)?;
    Ok(anchor_mask_labels_indexed(
        anchors,
        annotation,
        &grid,
        radius,
        assigned_box,
    ))
}

/// Per-anchor feature block laid out as `(ray, anchor, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RayFeatureBlock {
    pub stage: AnchorStage,
    pub num_rays: usize,
    pub per_ray: usize,
    pub channels: usize,
    data: Vec<f64>,
}

impl RayFeatureBlock {
    pub fn new(
        stage: AnchorStage,
        num_rays: usize,
        per_ray: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        let expect = num_rays * per_ray * channels;
        if data.len() != expect {
            return Err(Error::ShapeMismatch(format!(
                "feature block holds {} values, layout ({num_rays}, {per_ray}, {channels}) needs {expect}",
                data.len()
            )));
        }
        Ok(Self {
            stage,
            num_rays,
            per_ray,
            channels,
            data,
        })
    }

    pub fn offset(&self, ray: usize, anchor: usize, channel: usize) -> usize {
        (ray * self.per_ray + anchor) * self.channels + channel
    }

    pub fn anchor_feature(&self, ray: usize, anchor: usize) -> &[f64] {
        let s = self.offset(ray, anchor, 0);
        &self.data[s..s + self.channels]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Max-pool the features of up to `max_k` neighbors within `radius` of each
/// anchor; anchors without neighbors get zeros.
pub fn pooled_anchor_features(
    anchors: &AnchorSet,
    grid: &GridIndex,
    source: &PointCloud,
    radius: f64,
    max_k: usize,
) -> Result<RayFeatureBlock> {
    let c = source.feature_dim();
    let mut data = Vec::with_capacity(anchors.len() * c);
    for a in &anchors.anchors {
        let nn = grid.ball_query(&a.position, radius, max_k);
        if nn.is_empty() {
            data.extend(std::iter::repeat_n(0.0, c));
            continue;
        }
        let start = data.len();
        data.extend_from_slice(source.feature(nn[0]));
        for &j in &nn[1..] {
            for (d, f) in data[start..].iter_mut().zip(source.feature(j)) {
                *d = d.max(*f);
            }
        }
    }
    RayFeatureBlock::new(anchors.stage, anchors.num_rays, anchors.per_ray, c, data)
}

/// Zero the features of negative anchors.
pub fn mask_features(block: &RayFeatureBlock, labels: &[bool]) -> Result<RayFeatureBlock> {
    if labels.len() != block.num_rays * block.per_ray {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} anchors",
            labels.len(),
            block.num_rays * block.per_ray
        )));
    }
    let mut out = block.clone();
    for (row, &keep) in out.data.chunks_exact_mut(block.channels.max(1)).zip(labels) {
        if !keep {
            row.fill(0.0);
        }
    }
    Ok(out)
}

/// Flatten in canonical `(ray, anchor, channel)` order; entry
/// `((ray·K) + k)·C + c` holds channel `c` of anchor `k` on ray `ray`.
pub fn ordered_concat(block: &RayFeatureBlock) -> Vec<f64> {
    block.data.clone()
}

/// Fixed sinusoidal positional encoding standing in for learned point features.
///
/// Channel `c` uses pair `f = c / 2`, axis `f % 3` and frequency `2^(f / 3)·π`;
/// even channels take the sine, odd channels the cosine.
pub fn toy_featurizer(cloud: &PointCloud) -> PointCloud {
    let mut features = Vec::with_capacity(cloud.len() * TOY_FEATURE_DIM);
    for p in cloud.positions() {
        for c in 0..TOY_FEATURE_DIM {
            let f = c / 2;
            let freq = (1u32 << (f / 3)) as f64 * PI;
            let x = freq * p[f % 3];
            features.push(if c % 2 == 0 { x.sin() } else { x.cos() });
        }
    }
    PointCloud::with_features(cloud.positions().to_vec(), features, TOY_FEATURE_DIM)
        .expect("feature buffer sized to the cloud")
}
