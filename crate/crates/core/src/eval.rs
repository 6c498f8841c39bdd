//! Axis-aligned 3D detection evaluation: IoU, class-wise NMS, average
//! precision and mAP, plus the sampling and anchor recall diagnostics.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scene::{Box3D, Detection, PointCloud, SceneAnnotation};
use crate::spatial::GridIndex;
use crate::Point3;

pub const DEFAULT_NMS_THRESHOLD: f64 = 0.25;
pub const DEFAULT_IOU_THRESHOLDS: [f64; 2] = [0.25, 0.5];

/// Exact intersection-over-union of two axis-aligned boxes.
pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    let (amin, amax, bmin, bmax) = (a.min(), a.max(), b.min(), b.max());
    let mut inter = 1.0;
    for ax in 0..3 {
        let overlap = amax[ax].min(bmax[ax]) - amin[ax].max(bmin[ax]);
        if overlap <= 0.0 {
            return 0.0;
        }
        inter *= overlap;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| dets[j].score.total_cmp(&dets[i].score).then(i.cmp(&j)));
    order
}

/// Greedy class-wise suppression. Returns kept indices, highest score first.
pub fn nms3d(detections: &[Detection], iou_threshold: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::invalid(format!(
            "NMS threshold must be in [0, 1], got {iou_threshold}"
        )));
    }
    let mut kept: Vec<usize> = Vec::new();
    for i in score_order(detections) {
        let d = &detections[i];
        let clash = kept.iter().any(|&k| {
            detections[k].class_id() == d.class_id()
                && iou3d(&detections[k].bbox, &d.bbox) > iou_threshold
        });
        if !clash {
            kept.push(i);
        }
    }
    Ok(kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMethod {
    /// Area under the monotone precision envelope.
    #[default]
    AllPoint,
    /// Mean envelope precision at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PRCurve {
    pub class_id: u32,
    pub num_gt: usize,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub ap: f64,
}

/// One scene's detections and ground truth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalScene {
    pub detections: Vec<Detection>,
    pub gt: Vec<Box3D>,
}

pub fn average_precision(
    detections: &[Detection],
    gt_boxes: &[Box3D],
    iou_threshold: f64,
    class_id: u32,
) -> PRCurve {
    let scene = EvalScene {
        detections: detections.to_vec(),
        gt: gt_boxes.to_vec(),
    };
    average_precision_scenes(
        std::slice::from_ref(&scene),
        iou_threshold,
        class_id,
        ApMethod::AllPoint,
    )
}

/// AP for one class pooled over scenes.
///
/// Detections are visited by descending score (ties by scene, then index).
/// Each is matched to the same-class GT box of highest IoU in its scene; it
/// is a true positive if that IoU exceeds the threshold and the box is not
/// already taken, otherwise a false positive.
pub fn average_precision_scenes(
    scenes: &[EvalScene],
    iou_threshold: f64,
    class_id: u32,
    method: ApMethod,
) -> PRCurve {
    let gts: Vec<Vec<&Box3D>> = scenes
        .iter()
        .map(|s| s.gt.iter().filter(|b| b.class_id == class_id).collect())
        .collect();
    let num_gt: usize = gts.iter().map(Vec::len).sum();

    let mut dets: Vec<(f64, usize, usize)> = Vec::new();
    for (si, s) in scenes.iter().enumerate() {
        for (di, d) in s.detections.iter().enumerate() {
            if d.class_id() == class_id {
                dets.push((d.score, si, di));
            }
        }
    }
    dets.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut taken: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
    let mut tp_flags = Vec::with_capacity(dets.len());
    for &(_, si, di) in &dets {
        let bbox = &scenes[si].detections[di].bbox;
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (gi, g) in gts[si].iter().enumerate() {
            let iou = iou3d(bbox, g);
            if iou > best.0 {
                best = (iou, gi);
            }
        }
        let tp = best.1 != usize::MAX && best.0 > iou_threshold && !taken[si][best.1];
        if tp {
            taken[si][best.1] = true;
        }
        tp_flags.push(tp);
    }

    let mut recall = Vec::with_capacity(dets.len());
    let mut precision = Vec::with_capacity(dets.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for hit in tp_flags {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(if num_gt == 0 {
            0.0
        } else {
            tp as f64 / num_gt as f64
        });
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    let ap = if num_gt == 0 {
        0.0
    } else {
        match method {
            ApMethod::AllPoint => all_point_ap(&recall, &precision),
            ApMethod::ElevenPoint => eleven_point_ap(&recall, &precision),
        }
    };
    PRCurve {
        class_id,
        num_gt,
        recall,
        precision,
        ap,
    }
}

fn all_point_ap(recall: &[f64], precision: &[f64]) -> f64 {
    let mut mrec = Vec::with_capacity(recall.len() + 2);
    mrec.push(0.0);
    mrec.extend_from_slice(recall);
    mrec.push(1.0);
    let mut mpre = Vec::with_capacity(precision.len() + 2);
    mpre.push(0.0);
    mpre.extend_from_slice(precision);
    mpre.push(0.0);
    for i in (0..mpre.len() - 1).rev() {
        mpre[i] = mpre[i].max(mpre[i + 1]);
    }
    (1..mrec.len())
        .filter(|&i| mrec[i] != mrec[i - 1])
        .map(|i| (mrec[i] - mrec[i - 1]) * mpre[i])
        .sum()
}

fn eleven_point_ap(recall: &[f64], precision: &[f64]) -> f64 {
    (0..=10)
        .map(|t| {
            let t = t as f64 / 10.0;
            recall
                .iter()
                .zip(precision)
                .filter(|(r, _)| **r >= t)
                .map(|(_, p)| *p)
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / 11.0
}

/// Unweighted mean AP over classes that have ground truth.
pub fn mean_average_precision(curves: &[PRCurve]) -> Result<f64> {
    let aps: Vec<f64> = curves
        .iter()
        .filter(|c| c.num_gt > 0)
        .map(|c| c.ap)
        .collect();
    if aps.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassResult {
    pub class_id: u32,
    pub num_gt: usize,
    pub num_detections: usize,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub iou_threshold: f64,
    pub per_class: Vec<ClassResult>,
    pub map: f64,
}

/// Per-class AP and mAP at every threshold. Classes are the union of GT and
/// detection classes, ascending.
pub fn evaluate(
    scenes: &[EvalScene],
    thresholds: &[f64],
    method: ApMethod,
) -> Result<Vec<ThresholdResult>> {
    let classes: BTreeSet<u32> = scenes
        .iter()
        .flat_map(|s| {
            s.gt.iter()
                .map(|b| b.class_id)
                .chain(s.detections.iter().map(|d| d.class_id()))
        })
        .collect();
    thresholds
        .iter()
        .map(|&t| {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid(format!("IoU threshold {t} outside [0, 1]")));
            }
            let curves: Vec<PRCurve> = classes
                .iter()
                .map(|&c| average_precision_scenes(scenes, t, c, method))
                .collect();
            let map = mean_average_precision(&curves)?;
            let per_class = curves
                .iter()
                .map(|c| ClassResult {
                    class_id: c.class_id,
                    num_gt: c.num_gt,
                    num_detections: c.recall.len(),
                    ap: c.ap,
                })
                .collect();
            Ok(ThresholdResult {
                iou_threshold: t,
                per_class,
                map,
            })
        })
        .collect()
}

/// Fraction of selected points that lie on an object.
pub fn foreground_recall(selected: &[usize], annotation: &SceneAnnotation) -> Result<f64> {
    if selected.is_empty() {
        return Err(Error::invalid("foreground recall of an empty selection"));
    }
    let n = annotation.point_instance_ids.len();
    let mut fg = 0usize;
    for &i in selected {
        if i >= n {
            return Err(Error::invalid(format!(
                "selected index {i} out of range for {n} points"
            )));
        }
        fg += annotation.is_foreground(i) as usize;
    }
    Ok(fg as f64 / selected.len() as f64)
}

/// Fraction of `assigned_box`'s points within `radius` of at least one anchor.
/// Zero when there are no anchors or the object has no points.
pub fn surface_point_recall(
    anchors: &[Point3],
    radius: f64,
    annotation: &SceneAnnotation,
    cloud: &PointCloud,
    assigned_box: usize,
) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!(
            "recall radius must be positive, got {radius}"
        )));
    }
    if anchors.is_empty() {
        return Ok(0.0);
    }
    let grid = GridIndex::build(anchors, radius)?;
    let target = assigned_box as i64;
    let (mut total, mut covered) = (0usize, 0usize);
    for (i, p) in cloud.positions().iter().enumerate() {
        if annotation.point_instance_ids[i] != target {
            continue;
        }
        total += 1;
        if grid.any_within(p, radius, |_| true) {
            covered += 1;
        }
    }
    Ok(if total == 0 {
        0.0
    } else {
        covered as f64 / total as f64
    })
}
