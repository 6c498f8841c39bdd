//! Loss arithmetic: smooth-L1, cross-entropy, scale regression and the
//! weighted composite objective.
//!
//! The composite is two-level. The ray-grouping term is itself a weighted
//! sum of scale regression and the coarse/fine mask classification losses,
//! and the box term is a weighted sum of center, size, corner and heading
//! losses. Either level may be supplied pre-combined.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouping::VoteCluster;
use crate::scene::Box3D;

/// Smooth-L1 transition points for scale, size and heading regression.
pub const SCALE_REG_BETA: f64 = 0.0625;
pub const SIZE_REG_BETA: f64 = 0.0625;
pub const ANGLE_REG_BETA: f64 = 0.04;
/// Floor applied to probabilities before the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;
/// Center regression has no tunable weight inside the box term.
pub const CENTER_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub vote_reg: f64,
    pub fbs: f64,
    pub rbfg: f64,
    pub obj_cls: f64,
    #[serde(rename = "box")]
    pub box_: f64,
    pub sem_cls: f64,
    pub size_reg: f64,
    pub corner: f64,
    pub angle_cls: f64,
    pub angle_reg: f64,
    pub scale_reg: f64,
    pub c_cls: f64,
    pub f_cls: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            vote_reg: 10.0,
            fbs: 3.0,
            rbfg: 10.0,
            obj_cls: 5.0,
            box_: 10.0,
            sem_cls: 1.0,
            size_reg: 0.11,
            corner: 0.33,
            angle_cls: 0.1,
            angle_reg: 0.11,
            scale_reg: 0.11,
            c_cls: 0.2,
            f_cls: 0.2,
        }
    }
}

impl LossWeights {
    fn named(&self) -> [(&'static str, f64); 13] {
        [
            ("vote_reg", self.vote_reg),
            ("fbs", self.fbs),
            ("rbfg", self.rbfg),
            ("obj_cls", self.obj_cls),
            ("box", self.box_),
            ("sem_cls", self.sem_cls),
            ("size_reg", self.size_reg),
            ("corner", self.corner),
            ("angle_cls", self.angle_cls),
            ("angle_reg", self.angle_reg),
            ("scale_reg", self.scale_reg),
            ("c_cls", self.c_cls),
            ("f_cls", self.f_cls),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in self.named() {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!(
                    "loss weight `{name}` must be >= 0, got {w}"
                )));
            }
        }
        Ok(())
    }
}

pub fn smooth_l1(pred: f64, target: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::invalid(format!(
            "smooth-L1 beta must be positive, got {beta}"
        )));
    }
    let d = (pred - target).abs();
    Ok(if d < beta {
        d * d / (2.0 * beta)
    } else {
        d - beta / 2.0
    })
}

/// Mean smooth-L1 over paired components.
pub fn smooth_l1_mean(pred: &[f64], target: &[f64], beta: f64) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (p, t) in pred.iter().zip(target) {
        sum += smooth_l1(*p, *t, beta)?;
    }
    Ok(sum / pred.len() as f64)
}

pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::invalid("probabilities must be non-negative"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(-probs[label].max(PROB_FLOOR).ln())
}

/// Two-class cross-entropy with `p` the positive-class probability.
pub fn binary_cross_entropy(p: f64, positive: bool) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    cross_entropy(&[1.0 - p, p], positive as usize)
}

pub fn mean_binary_cross_entropy(probs: &[f64], labels: &[bool]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (p, l) in probs.iter().zip(labels) {
        sum += binary_cross_entropy(*p, *l)?;
    }
    Ok(sum / probs.len() as f64)
}

/// Foreground segmentation loss over several sampling layers: mean
/// cross-entropy within each layer, then the mean across layers.
pub fn fbs_loss(layers: &[(&[f64], &[bool])]) -> Result<f64> {
    if layers.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (probs, labels) in layers {
        sum += mean_binary_cross_entropy(probs, labels)?;
    }
    Ok(sum / layers.len() as f64)
}

/// Mean smooth-L1 between predicted and target scale over positive clusters.
/// Zero when no cluster is positive.
pub fn scale_loss(clusters: &[VoteCluster], predictions: &[f64]) -> Result<f64> {
    scale_loss_with_beta(clusters, predictions, SCALE_REG_BETA)
}

pub fn scale_loss_with_beta(
    clusters: &[VoteCluster],
    predictions: &[f64],
    beta: f64,
) -> Result<f64> {
    if clusters.len() != predictions.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scale predictions for {} clusters",
            predictions.len(),
            clusters.len()
        )));
    }
    let mut sum = 0.0;
    let mut positives = 0usize;
    for (c, &pred) in clusters.iter().zip(predictions) {
        if c.positive != Some(true) {
            continue;
        }
        let target = c
            .scale
            .ok_or_else(|| Error::invalid("positive cluster has no scale target"))?;
        sum += smooth_l1(pred, target, beta)?;
        positives += 1;
    }
    Ok(if positives == 0 {
        0.0
    } else {
        sum / positives as f64
    })
}

/// Mean smooth-L1 of the distance between matching corners.
pub fn corner_loss(pred: &Box3D, target: &Box3D, beta: f64) -> Result<f64> {
    let (pc, tc) = (pred.corners(), target.corners());
    let mut sum = 0.0;
    for (p, t) in pc.iter().zip(&tc) {
        sum += smooth_l1((p - t).norm(), 0.0, beta)?;
    }
    Ok(sum / 8.0)
}

/// Named unweighted loss values.
pub type LossTerms = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeLoss {
    pub total: f64,
    /// Weighted contribution of every term to `total`. Nested members are
    /// keyed `parent.member` and carry their effective (product) weight.
    pub breakdown: BTreeMap<String, f64>,
}

const RBFG_MEMBERS: [&str; 3] = ["scale_reg", "c_cls", "f_cls"];
const BOX_MEMBERS: [&str; 5] = ["center", "size_reg", "corner", "angle_cls", "angle_reg"];

fn fetch(terms: &LossTerms, name: &str) -> Result<f64> {
    let v = *terms
        .get(name)
        .ok_or_else(|| Error::MissingTerm(name.to_string()))?;
    if !v.is_finite() {
        return Err(Error::NonFiniteTerm {
            name: name.to_string(),
            value: v,
        });
    }
    Ok(v)
}

/// Resolve a two-level term: either supplied directly or built from members.
fn nested(
    terms: &LossTerms,
    parent: &str,
    members: &[(&str, f64)],
    breakdown: &mut BTreeMap<String, f64>,
    parent_weight: f64,
) -> Result<f64> {
    let supplied = members
        .iter()
        .filter(|(m, _)| terms.contains_key(*m))
        .count();
    match (terms.contains_key(parent), supplied) {
        (true, 0) => fetch(terms, parent),
        (true, _) => Err(Error::invalid(format!(
            "`{parent}` given both combined and by member terms"
        ))),
        (false, 0) => Err(Error::MissingTerm(parent.to_string())),
        (false, _) => {
            let mut sum = 0.0;
            for (m, w) in members {
                let v = fetch(terms, m)?;
                sum += w * v;
                breakdown.insert(format!("{parent}.{m}"), parent_weight * w * v);
            }
            Ok(sum)
        }
    }
}

pub fn composite_loss(terms: &LossTerms, weights: &LossWeights) -> Result<CompositeLoss> {
    weights.validate()?;
    let known: Vec<&str> = ["vote_reg", "fbs", "rbfg", "obj_cls", "box", "sem_cls"]
        .into_iter()
        .chain(RBFG_MEMBERS)
        .chain(BOX_MEMBERS)
        .collect();
    if let Some(k) = terms.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(Error::invalid(format!("unknown loss term `{k}`")));
    }

    let mut breakdown = BTreeMap::new();
    let rbfg = nested(
        terms,
        "rbfg",
        &[
            ("scale_reg", weights.scale_reg),
            ("c_cls", weights.c_cls),
            ("f_cls", weights.f_cls),
        ],
        &mut breakdown,
        weights.rbfg,
    )?;
    let boxl = nested(
        terms,
        "box",
        &[
            ("center", CENTER_WEIGHT),
            ("size_reg", weights.size_reg),
            ("corner", weights.corner),
            ("angle_cls", weights.angle_cls),
            ("angle_reg", weights.angle_reg),
        ],
        &mut breakdown,
        weights.box_,
    )?;

    let top = [
        ("vote_reg", weights.vote_reg, fetch(terms, "vote_reg")?),
        ("fbs", weights.fbs, fetch(terms, "fbs")?),
        ("rbfg", weights.rbfg, rbfg),
        ("obj_cls", weights.obj_cls, fetch(terms, "obj_cls")?),
        ("box", weights.box_, boxl),
        ("sem_cls", weights.sem_cls, fetch(terms, "sem_cls")?),
    ];
    let mut total = 0.0;
    for (name, w, v) in top {
        total += w * v;
        breakdown.insert(name.to_string(), w * v);
    }
    Ok(CompositeLoss { total, breakdown })
}
