//! Pipeline configuration. Every field has a default, so `{}` is a valid
//! config file; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ApMethod, DEFAULT_IOU_THRESHOLDS, DEFAULT_NMS_THRESHOLD};
use crate::grouping::CandidateMode;
use crate::losses::LossWeights;

/// Foreground-biased sampling parameters for one set-abstraction layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbsLayer {
    pub kappa: usize,
    pub alpha: usize,
    pub beta: usize,
}

impl FbsLayer {
    pub const fn new(kappa: usize, alpha: usize, beta: usize) -> Self {
        Self { kappa, alpha, beta }
    }

    pub fn budget(&self) -> usize {
        self.alpha + self.beta
    }

    /// Shrink to what a layer input of `n` points can supply.
    pub fn clamped(&self, n: usize) -> Self {
        let kappa = self.kappa.min(n);
        Self {
            kappa,
            alpha: self.alpha.min(kappa),
            beta: self.beta.min(n - kappa),
        }
    }
}

/// Backbone schedule for the three sampling layers after the first.
pub const BACKBONE_FBS_SCHEDULE: [FbsLayer; 3] = [
    FbsLayer::new(1024, 896, 128),
    FbsLayer::new(512, 448, 64),
    FbsLayer::new(256, 224, 32),
];

/// Where per-point foreground scores or votes come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Derived from the scene annotation.
    #[default]
    Oracle,
    /// Read from the file named by the matching `*_path` field.
    File,
}

/// Which coarse masks shape the fine-anchor density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineMaskSource {
    /// Ground-truth anchor labels.
    #[default]
    Label,
    /// Thresholded stand-in predictions.
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    #[serde(alias = "P")]
    pub polar_bins: usize,
    pub azimuth_factor: usize,
    #[serde(alias = "K_c")]
    pub num_coarse: usize,
    #[serde(alias = "K_f")]
    pub num_fine: usize,
    pub anchor_radius: f64,
    pub coarse_max_k: usize,
    pub fine_max_k: usize,
    #[serde(alias = "M")]
    pub num_candidates: usize,
    pub candidate_mode: CandidateMode,
    pub vote_radius: f64,
    pub positive_radius: f64,
    pub fbs_schedule: Vec<FbsLayer>,
    pub fps_seed_index: usize,
    pub min_scale: f64,
    pub interpolation_k: usize,
    pub mask_threshold: f64,
    pub fine_mask_source: FineMaskSource,
    pub nms_threshold: f64,
    pub iou_thresholds: Vec<f64>,
    pub ap_method: ApMethod,
    pub loss_weights: LossWeights,
    pub rng_seed: u64,
    pub score_source: Source,
    pub scores_path: Option<PathBuf>,
    pub vote_source: Source,
    pub votes_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            polar_bins: crate::rays::DEFAULT_POLAR_BINS,
            azimuth_factor: crate::rays::DEFAULT_AZIMUTH_FACTOR,
            num_coarse: 5,
            num_fine: 3,
            anchor_radius: 0.2,
            coarse_max_k: 8,
            fine_max_k: 4,
            num_candidates: crate::grouping::DEFAULT_NUM_CANDIDATES,
            candidate_mode: CandidateMode::VoteFps,
            vote_radius: crate::grouping::DEFAULT_VOTE_RADIUS,
            positive_radius: crate::grouping::DEFAULT_POSITIVE_RADIUS,
            fbs_schedule: vec![BACKBONE_FBS_SCHEDULE[0]],
            fps_seed_index: 0,
            min_scale: crate::rays::DEFAULT_MIN_SCALE,
            interpolation_k: crate::spatial::DEFAULT_INTERPOLATION_K,
            mask_threshold: 0.5,
            fine_mask_source: FineMaskSource::Label,
            nms_threshold: DEFAULT_NMS_THRESHOLD,
            iou_thresholds: DEFAULT_IOU_THRESHOLDS.to_vec(),
            ap_method: ApMethod::AllPoint,
            loss_weights: LossWeights::default(),
            rng_seed: 0,
            score_source: Source::Oracle,
            scores_path: None,
            vote_source: Source::Oracle,
            votes_path: None,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "`{name}` must be positive, got {v}"
        )))
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text, path)?;
        // Relative side-input paths resolve against the config's directory.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.scores_path, &mut cfg.votes_path]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let v = |m: String| Err(Error::Validation(m));
        if self.polar_bins < 2 {
            return v(format!(
                "`polar_bins` must be >= 2, got {}",
                self.polar_bins
            ));
        }
        for (name, val) in [
            ("azimuth_factor", self.azimuth_factor),
            ("num_coarse", self.num_coarse),
            ("num_fine", self.num_fine),
            ("coarse_max_k", self.coarse_max_k),
            ("fine_max_k", self.fine_max_k),
            ("interpolation_k", self.interpolation_k),
        ] {
            if val == 0 {
                return v(format!("`{name}` must be >= 1"));
            }
        }
        positive("anchor_radius", self.anchor_radius)?;
        positive("vote_radius", self.vote_radius)?;
        positive("positive_radius", self.positive_radius)?;
        positive("min_scale", self.min_scale)?;
        for (i, l) in self.fbs_schedule.iter().enumerate() {
            if l.alpha > l.kappa {
                return v(format!(
                    "fbs layer {i}: alpha {} exceeds kappa {}",
                    l.alpha, l.kappa
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.nms_threshold) {
            return v(format!(
                "`nms_threshold` must be in [0, 1], got {}",
                self.nms_threshold
            ));
        }
        if !(0.0..=1.0).contains(&self.mask_threshold) {
            return v(format!(
                "`mask_threshold` must be in [0, 1], got {}",
                self.mask_threshold
            ));
        }
        if self.iou_thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return v("`iou_thresholds` entries must be in [0, 1]".into());
        }
        if self.score_source == Source::File && self.scores_path.is_none() {
            return v("`score_source: file` needs `scores_path`".into());
        }
        if self.vote_source == Source::File && self.votes_path.is_none() {
            return v("`vote_source: file` needs `votes_path`".into());
        }
        self.loss_weights
            .validate()
            .map_err(|e| Error::Validation(e.to_string()))
    }
}
