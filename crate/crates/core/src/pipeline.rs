//! End-to-end runners behind the command-line tool: the ray-grouping
//! pipeline on one scene, detection evaluation, and scene synthesis.
//!
//! Reports are plain serde structs written as pretty JSON; every collection
//! is ordered, so identical inputs give byte-identical `report.json` files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{FbsLayer, FineMaskSource, PipelineConfig, Source};
use crate::error::{Error, Result, StageExt};
use crate::eval::{self, ApMethod, EvalScene, ThresholdResult};
use crate::grouping::{
    anchor_mask_labels_indexed, assign_positive_clusters, group_votes, mask_features,
    ordered_concat, pooled_anchor_features, sample_candidates, toy_featurizer, RayFeatureBlock,
    VoteCluster,
};
use crate::losses::{self, composite_loss, CompositeLoss, LossTerms};
use crate::rays::{clamp_scale, emit_rays_with, ray_count_with, scale_target};
use crate::sampling::{
    coarse_anchors, fine_anchors, foreground_biased_sampling, fps_indices, threshold_masks,
    AnchorSet, SampleSource,
};
use crate::scene::{
    export_ply, load_scene, save_scene, Box3D, BoxRecord, DetectionRecord, PointCloud, Scene,
};
use crate::spatial::{interpolate_features, GridIndex};
use crate::synth::{generate_scene, oracle_scores, oracle_votes, SceneSpec};
use crate::Point3;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Reference configuration the report's parity block compares against.
pub const REFERENCE_RAYS: usize = 66;
pub const REFERENCE_COARSE: usize = 5;
pub const REFERENCE_FINE: usize = 3;
pub const REFERENCE_CANDIDATES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneSummary {
    pub num_points: usize,
    pub num_boxes: usize,
    pub num_foreground_points: usize,
    pub feature_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityEntry {
    pub effective: usize,
    pub reference: usize,
    pub matches: bool,
}

impl ParityEntry {
    fn new(effective: usize, reference: usize) -> Self {
        Self {
            effective,
            reference,
            matches: effective == reference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaperParity {
    pub rays_per_cluster: ParityEntry,
    pub coarse_per_ray: ParityEntry,
    pub fine_per_ray: ParityEntry,
    pub candidates: ParityEntry,
    pub all_match: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerReport {
    pub input_points: usize,
    pub requested: FbsLayer,
    pub effective: FbsLayer,
    pub selected: usize,
    pub foreground_sourced: usize,
    pub background_sourced: usize,
    /// Share of selected points lying on objects.
    pub foreground_recall: Option<f64>,
    /// Same quantity for plain FPS with the same budget.
    pub fps_foreground_recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingReport {
    pub layers: Vec<LayerReport>,
    pub num_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupingReport {
    pub num_candidates: usize,
    pub num_clusters: usize,
    pub num_positive: usize,
    pub mean_members: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub index: usize,
    pub center: [f64; 3],
    pub positive: bool,
    pub assigned_box: Option<usize>,
    pub scale: f64,
    pub num_members: usize,
    pub num_rays: usize,
    pub num_coarse_anchors: usize,
    pub num_fine_anchors: usize,
    pub coarse_positive: usize,
    pub fine_positive: usize,
    pub coarse_feature_len: usize,
    pub fine_feature_len: usize,
    pub coarse_feature_sum: f64,
    pub fine_feature_sum: f64,
    pub surface_point_recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub terms: LossTerms,
    pub composite: CompositeLoss,
    /// Terms that need learned heads; reported as zero.
    pub not_computed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallReport {
    pub seed_foreground_recall: Option<f64>,
    pub mean_surface_point_recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    pub scene: SceneSummary,
    pub paper_parity: PaperParity,
    pub sampling: SamplingReport,
    pub grouping: GroupingReport,
    pub clusters: Vec<ClusterReport>,
    pub losses: LossReport,
    pub recall: RecallReport,
    pub config: PipelineConfig,
}

/// Report plus the geometry needed for visual dumps.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: PipelineReport,
    pub seed_indices: Vec<usize>,
    pub seed_sources: Vec<SampleSource>,
    /// `(position, label)` of every anchor of every positive cluster.
    pub positive_anchors: Vec<(Point3, bool)>,
}

/// Optional per-point side inputs replacing the annotation oracles.
#[derive(Debug, Clone, Default)]
pub struct SideInputs {
    pub scores: Option<Vec<f64>>,
    pub votes: Option<Vec<Point3>>,
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// JSON array of one score in `[0, 1]` per point.
pub fn load_scores(path: &Path) -> Result<Vec<f64>> {
    parse_json(path)
}

/// JSON array of one `[x, y, z]` vote per point.
pub fn load_votes(path: &Path) -> Result<Vec<Point3>> {
    let raw: Vec<[f64; 3]> = parse_json(path)?;
    Ok(raw.into_iter().map(Point3::from).collect())
}

fn side_inputs(cfg: &PipelineConfig) -> Result<SideInputs> {
    let scores = match (cfg.score_source, &cfg.scores_path) {
        (Source::File, Some(p)) => Some(load_scores(p)?),
        _ => None,
    };
    let votes = match (cfg.vote_source, &cfg.votes_path) {
        (Source::File, Some(p)) => Some(load_votes(p)?),
        _ => None,
    };
    Ok(SideInputs { scores, votes })
}

/// Stand-in mask predictor: mean foreground score of the anchor's neighbors.
fn predicted_mask_probs(
    anchors: &AnchorSet,
    grid: &GridIndex,
    scores: &[f64],
    radius: f64,
    max_k: usize,
) -> Vec<f64> {
    anchors
        .anchors
        .iter()
        .map(|a| {
            let nn = grid.ball_query(&a.position, radius, max_k);
            if nn.is_empty() {
                0.0
            } else {
                nn.iter().map(|&i| scores[i]).sum::<f64>() / nn.len() as f64
            }
        })
        .collect()
}

struct Stage {
    anchors: AnchorSet,
    labels: Vec<bool>,
    probs: Vec<f64>,
    concat: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn run_stage(
    mut anchors: AnchorSet,
    cfg: &PipelineConfig,
    scene: &Scene,
    grid: &GridIndex,
    feature_cloud: &PointCloud,
    scores: &[f64],
    assigned: Option<usize>,
    max_k: usize,
) -> Result<Stage> {
    let block: RayFeatureBlock =
        pooled_anchor_features(&anchors, grid, feature_cloud, cfg.anchor_radius, max_k)?;
    let labels = anchor_mask_labels_indexed(
        &anchors,
        &scene.annotation,
        grid,
        cfg.anchor_radius,
        assigned,
    );
    let probs = predicted_mask_probs(&anchors, grid, scores, cfg.anchor_radius, max_k);
    anchors.set_masks(&labels)?;
    let masked = mask_features(&block, &labels)?;
    Ok(Stage {
        anchors,
        labels,
        probs,
        concat: ordered_concat(&masked),
    })
}

/// Run every stage on an in-memory scene.
pub fn run_pipeline_on_scene(
    cfg: &PipelineConfig,
    scene: &Scene,
    inputs: &SideInputs,
) -> Result<PipelineRun> {
    cfg.validate()?;
    let cloud = &scene.cloud;
    let ann = &scene.annotation;
    let n = cloud.len();

    let featured = if cloud.has_features() {
        cloud.clone()
    } else {
        toy_featurizer(cloud)
    };

    let scores = match &inputs.scores {
        Some(s) => {
            if s.len() != n {
                return Err(Error::Validation(format!(
                    "{} scores for {n} points",
                    s.len()
                )))
                .stage("scores");
            }
            if let Some(i) = s.iter().position(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::Validation(format!(
                    "score {i} = {} outside [0, 1]",
                    s[i]
                )))
                .stage("scores");
            }
            s.clone()
        }
        None => oracle_scores(ann),
    };
    let fg_labels: Vec<bool> = (0..n).map(|i| ann.is_foreground(i)).collect();

    // Foreground-biased sampling, layer by layer.
    let mut current: Vec<usize> = (0..n).collect();
    let mut layers = Vec::new();
    let mut fbs_inputs: Vec<(Vec<f64>, Vec<bool>)> = Vec::new();
    for requested in &cfg.fbs_schedule {
        let positions: Vec<Point3> = current.iter().map(|&i| cloud.position(i)).collect();
        let layer_scores: Vec<f64> = current.iter().map(|&i| scores[i]).collect();
        fbs_inputs.push((
            layer_scores.clone(),
            current.iter().map(|&i| fg_labels[i]).collect(),
        ));
        let effective = requested.clamped(positions.len());
        let sel = foreground_biased_sampling(
            &positions,
            &layer_scores,
            effective.kappa,
            effective.alpha,
            effective.beta,
            (0, 0),
        )
        .stage("foreground_biased_sampling")?;
        let picked: Vec<usize> = sel.indices.iter().map(|&j| current[j]).collect();
        let fps_recall = if effective.budget() == 0 {
            None
        } else {
            let fps = fps_indices(
                &positions,
                effective.budget(),
                cfg.fps_seed_index.min(positions.len() - 1),
            )
            .stage("farthest_point_sampling")?;
            let global: Vec<usize> = fps.iter().map(|&j| current[j]).collect();
            Some(eval::foreground_recall(&global, ann)?)
        };
        layers.push(LayerReport {
            input_points: positions.len(),
            requested: *requested,
            effective,
            selected: picked.len(),
            foreground_sourced: sel.count(SampleSource::FbsForeground),
            background_sourced: sel.count(SampleSource::FbsBackground),
            foreground_recall: if picked.is_empty() {
                None
            } else {
                Some(eval::foreground_recall(&picked, ann)?)
            },
            fps_foreground_recall: fps_recall,
        });
        current = picked;
        if layers.len() == cfg.fbs_schedule.len() {
            return finish_pipeline(
                cfg,
                scene,
                inputs,
                &featured,
                &scores,
                current,
                sel.sources,
                layers,
                fbs_inputs,
            );
        }
    }
    // Empty schedule: every point is a seed.
    let sources = vec![SampleSource::Fps; current.len()];
    finish_pipeline(
        cfg, scene, inputs, &featured, &scores, current, sources, layers, fbs_inputs,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish_pipeline(
    cfg: &PipelineConfig,
    scene: &Scene,
    inputs: &SideInputs,
    featured: &PointCloud,
    scores: &[f64],
    seeds: Vec<usize>,
    seed_sources: Vec<SampleSource>,
    layers: Vec<LayerReport>,
    fbs_inputs: Vec<(Vec<f64>, Vec<bool>)>,
) -> Result<PipelineRun> {
    let cloud = &scene.cloud;
    let ann = &scene.annotation;
    let n = cloud.len();

    let seed_cloud = featured.select(&seeds);
    let all_votes: Vec<Point3> = match &inputs.votes {
        Some(v) => {
            if v.len() != n {
                return Err(Error::Validation(format!(
                    "{} votes for {n} points",
                    v.len()
                )))
                .stage("votes");
            }
            v.clone()
        }
        None => oracle_votes(cloud, ann).positions().to_vec(),
    };
    let vote_positions: Vec<Point3> = seeds.iter().map(|&i| all_votes[i]).collect();
    let vote_cloud = PointCloud::with_features(
        vote_positions.clone(),
        seed_cloud.features().to_vec(),
        seed_cloud.feature_dim(),
    )
    .stage("votes")?;

    // Vote sampling and grouping.
    let m = cfg.num_candidates.min(vote_positions.len());
    let cand = sample_candidates(
        &vote_positions,
        seed_cloud.positions(),
        m,
        cfg.candidate_mode,
    )
    .stage("sample_candidates")?;
    let centers: Vec<Point3> = cand.iter().map(|&i| vote_positions[i]).collect();
    let clusters = group_votes(&centers, &vote_cloud, cfg.vote_radius).stage("group_votes")?;
    let clusters: Vec<VoteCluster> =
        assign_positive_clusters(clusters, &ann.boxes, cfg.positive_radius);

    // Upsample seed features back onto the full cloud for anchor queries.
    let feature_cloud = if seeds.is_empty() {
        PointCloud::with_features(
            cloud.positions().to_vec(),
            vec![0.0; n * featured.feature_dim()],
            featured.feature_dim(),
        )?
    } else {
        let k = cfg.interpolation_k.min(seeds.len());
        let up = interpolate_features(&seed_cloud, cloud.positions(), k)
            .stage("interpolate_features")?;
        PointCloud::with_features(cloud.positions().to_vec(), up, featured.feature_dim())?
    };
    let grid = GridIndex::from_cloud(cloud, cfg.anchor_radius).stage("build_grid")?;

    let num_rays = ray_count_with(cfg.polar_bins, cfg.azimuth_factor)?;
    let mut cluster_reports = Vec::with_capacity(clusters.len());
    let mut positive_anchors = Vec::new();
    let (mut c_probs, mut c_labels, mut f_probs, mut f_labels) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut used_scales = Vec::with_capacity(clusters.len());
    for (ci, cl) in clusters.iter().enumerate() {
        let positive = cl.positive == Some(true);
        let scale = match cl.assigned_box {
            Some(b) if positive => scale_target(&ann.boxes[b]),
            _ => clamp_scale(0.0, cfg.min_scale),
        };
        used_scales.push(scale);
        let bundle = emit_rays_with(cl.center, scale, cfg.polar_bins, cfg.azimuth_factor)
            .stage("emit_rays")?;

        let coarse = coarse_anchors(&bundle, cfg.num_coarse).stage("coarse_anchors")?;
        let coarse = run_stage(
            coarse,
            cfg,
            scene,
            &grid,
            &feature_cloud,
            scores,
            cl.assigned_box,
            cfg.coarse_max_k,
        )
        .stage("coarse_stage")?;
        let rows: Vec<Vec<bool>> = match cfg.fine_mask_source {
            FineMaskSource::Label => coarse.anchors.mask_rows(),
            FineMaskSource::Predicted => threshold_masks(&coarse.probs, cfg.mask_threshold)
                .chunks(cfg.num_coarse)
                .map(<[bool]>::to_vec)
                .collect(),
        };
        let fine = fine_anchors(&rows, cfg.num_fine, &bundle).stage("fine_anchors")?;
        let fine = run_stage(
            fine,
            cfg,
            scene,
            &grid,
            &feature_cloud,
            scores,
            cl.assigned_box,
            cfg.fine_max_k,
        )
        .stage("fine_stage")?;

        let recall = match cl.assigned_box {
            Some(b) if positive => {
                let mut anchor_pos = coarse.anchors.positions();
                anchor_pos.extend(fine.anchors.positions());
                for a in coarse.anchors.anchors.iter().chain(&fine.anchors.anchors) {
                    positive_anchors.push((a.position, a.mask == Some(true)));
                }
                Some(eval::surface_point_recall(
                    &anchor_pos,
                    cfg.anchor_radius,
                    ann,
                    cloud,
                    b,
                )?)
            }
            _ => None,
        };

        cluster_reports.push(ClusterReport {
            index: ci,
            center: [cl.center.x, cl.center.y, cl.center.z],
            positive,
            assigned_box: cl.assigned_box,
            scale,
            num_members: cl.member_seed_indices.len(),
            num_rays: bundle.len(),
            num_coarse_anchors: coarse.anchors.len(),
            num_fine_anchors: fine.anchors.len(),
            coarse_positive: coarse.labels.iter().filter(|l| **l).count(),
            fine_positive: fine.labels.iter().filter(|l| **l).count(),
            coarse_feature_len: coarse.concat.len(),
            fine_feature_len: fine.concat.len(),
            coarse_feature_sum: coarse.concat.iter().sum(),
            fine_feature_sum: fine.concat.iter().sum(),
            surface_point_recall: recall,
        });
        c_probs.extend(coarse.probs);
        c_labels.extend(coarse.labels);
        f_probs.extend(fine.probs);
        f_labels.extend(fine.labels);
    }

    // Losses.
    let mut vote_err = 0.0;
    let mut fg_seeds = 0usize;
    for (j, &i) in seeds.iter().enumerate() {
        if let Some(b) = ann.instance_of(i) {
            vote_err += (vote_positions[j] - ann.boxes[b].center).abs().sum();
            fg_seeds += 1;
        }
    }
    let fbs_layers: Vec<(&[f64], &[bool])> = fbs_inputs
        .iter()
        .map(|(s, l)| (s.as_slice(), l.as_slice()))
        .collect();
    let mut terms = LossTerms::new();
    terms.insert(
        "vote_reg".into(),
        if fg_seeds == 0 {
            0.0
        } else {
            vote_err / fg_seeds as f64
        },
    );
    terms.insert(
        "fbs".into(),
        losses::fbs_loss(&fbs_layers).stage("fbs_loss")?,
    );
    terms.insert(
        "scale_reg".into(),
        losses::scale_loss(&clusters, &used_scales).stage("scale_loss")?,
    );
    terms.insert(
        "c_cls".into(),
        losses::mean_binary_cross_entropy(&c_probs, &c_labels)?,
    );
    terms.insert(
        "f_cls".into(),
        losses::mean_binary_cross_entropy(&f_probs, &f_labels)?,
    );
    let not_computed = ["obj_cls", "box", "sem_cls"];
    for k in not_computed {
        terms.insert(k.into(), 0.0);
    }
    let composite = composite_loss(&terms, &cfg.loss_weights).stage("composite_loss")?;

    let recalls: Vec<f64> = cluster_reports
        .iter()
        .filter_map(|c| c.surface_point_recall)
        .collect();
    let num_positive = cluster_reports.iter().filter(|c| c.positive).count();
    let rays = ParityEntry::new(num_rays, REFERENCE_RAYS);
    let coarse = ParityEntry::new(cfg.num_coarse, REFERENCE_COARSE);
    let fine = ParityEntry::new(cfg.num_fine, REFERENCE_FINE);
    let cands = ParityEntry::new(m, REFERENCE_CANDIDATES);
    let all_match = rays.matches && coarse.matches && fine.matches && cands.matches;

    let report = PipelineReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scene: SceneSummary {
            num_points: n,
            num_boxes: ann.boxes.len(),
            num_foreground_points: ann.point_instance_ids.iter().filter(|&&i| i >= 0).count(),
            feature_dim: featured.feature_dim(),
        },
        paper_parity: PaperParity {
            rays_per_cluster: rays,
            coarse_per_ray: coarse,
            fine_per_ray: fine,
            candidates: cands,
            all_match,
        },
        sampling: SamplingReport {
            layers,
            num_seeds: seeds.len(),
        },
        grouping: GroupingReport {
            num_candidates: m,
            num_clusters: clusters.len(),
            num_positive,
            mean_members: if clusters.is_empty() {
                0.0
            } else {
                clusters
                    .iter()
                    .map(|c| c.member_seed_indices.len())
                    .sum::<usize>() as f64
                    / clusters.len() as f64
            },
        },
        clusters: cluster_reports,
        losses: LossReport {
            terms,
            composite,
            not_computed: not_computed.iter().map(|s| s.to_string()).collect(),
        },
        recall: RecallReport {
            seed_foreground_recall: if seeds.is_empty() {
                None
            } else {
                Some(eval::foreground_recall(&seeds, ann)?)
            },
            mean_surface_point_recall: if recalls.is_empty() {
                None
            } else {
                Some(recalls.iter().sum::<f64>() / recalls.len() as f64)
            },
        },
        config: cfg.clone(),
    };
    Ok(PipelineRun {
        report,
        seed_indices: seeds,
        seed_sources,
        positive_anchors,
    })
}

pub fn report_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn instance_color(id: i64) -> [u8; 3] {
    if id < 0 {
        return [128, 128, 128];
    }
    const PALETTE: [[u8; 3]; 8] = [
        [230, 25, 75],
        [60, 180, 75],
        [255, 225, 25],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
    ];
    PALETTE[id as usize % PALETTE.len()]
}

fn write_dumps(run: &PipelineRun, scene: &Scene, out_dir: &Path) -> Result<()> {
    let colors: Vec<[u8; 3]> = scene
        .annotation
        .point_instance_ids
        .iter()
        .map(|&i| instance_color(i))
        .collect();
    export_ply(scene.cloud.positions(), &colors, out_dir.join("scene.ply"))?;

    let seed_pos: Vec<Point3> = run
        .seed_indices
        .iter()
        .map(|&i| scene.cloud.position(i))
        .collect();
    let seed_col: Vec<[u8; 3]> = run
        .seed_sources
        .iter()
        .map(|s| match s {
            SampleSource::FbsForeground => [230, 25, 75],
            SampleSource::FbsBackground => [0, 130, 200],
            SampleSource::Fps => [128, 128, 128],
        })
        .collect();
    export_ply(&seed_pos, &seed_col, out_dir.join("seeds.ply"))?;

    let (pos, col): (Vec<Point3>, Vec<[u8; 3]>) = run
        .positive_anchors
        .iter()
        .map(|(p, l)| (*p, if *l { [60, 180, 75] } else { [230, 25, 75] }))
        .unzip();
    export_ply(&pos, &col, out_dir.join("anchors.ply"))
}

/// Load a scene, run the pipeline and write `report.json` (plus PLY dumps
/// when `ply` is set) into `out_dir`.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    scene_path: &Path,
    out_dir: &Path,
    ply: bool,
) -> Result<PipelineReport> {
    let scene = load_scene(scene_path).stage("load_scene")?;
    let inputs = side_inputs(cfg).stage("side_inputs")?;
    let run = run_pipeline_on_scene(cfg, &scene, &inputs)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join("report.json");
    fs::write(&path, report_json(&run.report)).map_err(|e| Error::io(&path, e))?;
    if ply {
        write_dumps(&run, &scene, out_dir).stage("export_ply")?;
    }
    Ok(run.report)
}

// ---- evaluation -------------------------------------------------------------

#[derive(Deserialize)]
#[serde(untagged)]
enum Keyed<T> {
    Single(Vec<T>),
    Scenes(BTreeMap<String, Vec<T>>),
}

impl<T> Keyed<T> {
    fn into_map(self) -> BTreeMap<String, Vec<T>> {
        match self {
            Keyed::Single(v) => BTreeMap::from([(String::new(), v)]),
            Keyed::Scenes(m) => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub ap_method: ApMethod,
    pub nms_threshold: Option<f64>,
    pub num_scenes: usize,
    pub num_detections: usize,
    pub num_gt: usize,
    pub results: Vec<ThresholdResult>,
}

/// Read detection and ground-truth files into per-scene evaluation inputs.
///
/// Each file holds either a JSON array (one scene) or an object mapping scene
/// ids to arrays. Detection records are `{"box": {...}, "score": s}`; GT
/// records are bare boxes `{"center", "size", "class_id"}`.
pub fn load_eval_scenes(dets_path: &Path, gt_path: &Path) -> Result<Vec<EvalScene>> {
    let dets: Keyed<DetectionRecord> = parse_json(dets_path)?;
    let gts: Keyed<BoxRecord> = parse_json(gt_path)?;
    let (dets, gts) = (dets.into_map(), gts.into_map());
    let ids: std::collections::BTreeSet<&String> = dets.keys().chain(gts.keys()).collect();
    let mut scenes = Vec::with_capacity(ids.len());
    for id in ids {
        let detections = dets
            .get(id)
            .map(|v| {
                v.iter()
                    .enumerate()
                    .map(|(i, r)| {
                        r.to_detection().map_err(|e| {
                            Error::Validation(format!("scene `{id}` detection {i}: {e}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?
            .unwrap_or_default();
        let gt = gts
            .get(id)
            .map(|v| {
                v.iter()
                    .enumerate()
                    .map(|(i, r)| {
                        r.to_box()
                            .map_err(|e| Error::Validation(format!("scene `{id}` gt box {i}: {e}")))
                    })
                    .collect::<Result<Vec<Box3D>>>()
            })
            .transpose()?
            .unwrap_or_default();
        scenes.push(EvalScene { detections, gt });
    }
    Ok(scenes)
}

/// Per-class AP at each threshold plus mAP. With `nms_threshold`, detections
/// are suppressed class-wise per scene first.
pub fn run_eval(
    dets_path: &Path,
    gt_path: &Path,
    thresholds: &[f64],
    method: ApMethod,
    nms_threshold: Option<f64>,
) -> Result<EvalReport> {
    let mut scenes = load_eval_scenes(dets_path, gt_path)?;
    if let Some(t) = nms_threshold {
        for s in &mut scenes {
            let keep = eval::nms3d(&s.detections, t)?;
            s.detections = keep.into_iter().map(|i| s.detections[i]).collect();
        }
    }
    let results = eval::evaluate(&scenes, thresholds, method)?;
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        ap_method: method,
        nms_threshold,
        num_scenes: scenes.len(),
        num_detections: scenes.iter().map(|s| s.detections.len()).sum(),
        num_gt: scenes.iter().map(|s| s.gt.len()).sum(),
        results,
    })
}

/// Generate a scene from a JSON [`SceneSpec`] and save it under `out`.
pub fn run_synth(spec_path: &Path, out: &Path) -> Result<Scene> {
    let spec: SceneSpec = parse_json(spec_path)?;
    let scene = generate_scene(&spec)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    save_scene(&scene, out)?;
    Ok(scene)
}

/// Where `run_synth` writes for a given `out` argument.
pub fn synth_outputs(out: &Path) -> (PathBuf, PathBuf) {
    crate::scene::scene_paths(out)
}
