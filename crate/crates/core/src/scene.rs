//! Scene data types and their on-disk formats.
//!
//! A scene is stored as two sibling files sharing a stem:
//!
//! * `<stem>.pts`: one point per line, `x y z [f1 ... fC]`, ASCII, `.` decimal
//!   separator.
//! * `<stem>.ann`: JSON with `boxes`, `instance_ids` and `feature_dim`.
//!
//! Writing uses the shortest round-trip decimal form for every float, so
//! `load_scene(save_scene(s)) == s` bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Point3, Vector3};

/// Slack for the point-in-box membership check, absorbs text rounding.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-6;

/// Point positions with optional fixed-width per-point features.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    positions: Vec<Point3>,
    features: Vec<f64>,
    feature_dim: usize,
}

impl PointCloud {
    /// A cloud without features.
    pub fn new(positions: Vec<Point3>) -> Result<Self> {
        Self::with_features(positions, Vec::new(), 0)
    }

    /// A cloud with a row-major `(n, feature_dim)` feature matrix.
    pub fn with_features(
        positions: Vec<Point3>,
        features: Vec<f64>,
        feature_dim: usize,
    ) -> Result<Self> {
        if let Some(i) = positions
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::Validation(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        if features.len() != positions.len() * feature_dim {
            return Err(Error::Validation(format!(
                "feature buffer holds {} values, expected {} points x {} channels",
                features.len(),
                positions.len(),
                feature_dim
            )));
        }
        Ok(Self {
            positions,
            features,
            feature_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> Point3 {
        self.positions[i]
    }

    pub fn has_features(&self) -> bool {
        self.feature_dim > 0
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Sub-cloud holding `indices` in the given order (features included).
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let positions = indices.iter().map(|&i| self.positions[i]).collect();
        let mut features = Vec::with_capacity(indices.len() * self.feature_dim);
        for &i in indices {
            features.extend_from_slice(self.feature(i));
        }
        PointCloud {
            positions,
            features,
            feature_dim: self.feature_dim,
        }
    }
}

/// Axis-aligned box. `size` holds full edge lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub center: Point3,
    pub size: Vector3,
    pub class_id: u32,
}

impl Box3D {
    pub fn new(center: Point3, size: Vector3, class_id: u32) -> Result<Self> {
        let b = Self {
            center,
            size,
            class_id,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::Validation("box center is not finite".into()));
        }
        if !self.size.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::Validation(format!(
                "box size components must be positive, got {:?}",
                self.size.as_slice()
            )));
        }
        Ok(())
    }

    pub fn min(&self) -> Point3 {
        self.center - self.size * 0.5
    }

    pub fn max(&self) -> Point3 {
        self.center + self.size * 0.5
    }

    pub fn volume(&self) -> f64 {
        self.size.x * self.size.y * self.size.z
    }

    pub fn contains(&self, p: &Point3, tolerance: f64) -> bool {
        let (lo, hi) = (self.min(), self.max());
        (0..3).all(|a| p[a] >= lo[a] - tolerance && p[a] <= hi[a] + tolerance)
    }

    /// The eight corners, ordered by the bit pattern (x, y, z) of `i`.
    pub fn corners(&self) -> [Point3; 8] {
        let (lo, hi) = (self.min(), self.max());
        std::array::from_fn(|i| {
            Point3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            )
        })
    }
}

/// Ground-truth boxes and the per-point instance assignment (`-1` = background).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneAnnotation {
    pub boxes: Vec<Box3D>,
    pub point_instance_ids: Vec<i64>,
}

impl SceneAnnotation {
    /// Check every invariant against `cloud`.
    pub fn validate(&self, cloud: &PointCloud) -> Result<()> {
        for (i, b) in self.boxes.iter().enumerate() {
            b.validate()
                .map_err(|e| Error::Validation(format!("box {i}: {e}")))?;
        }
        if self.point_instance_ids.len() != cloud.len() {
            return Err(Error::Validation(format!(
                "{} instance ids for {} points",
                self.point_instance_ids.len(),
                cloud.len()
            )));
        }
        for (i, &id) in self.point_instance_ids.iter().enumerate() {
            if id < -1 {
                return Err(Error::Validation(format!(
                    "point {i} has instance id {id}; only -1 marks background"
                )));
            }
            if id < 0 {
                continue;
            }
            let Some(b) = self.boxes.get(id as usize) else {
                return Err(Error::Validation(format!(
                    "point {i} references box {id} but only {} boxes exist",
                    self.boxes.len()
                )));
            };
            if !b.contains(&cloud.position(i), MEMBERSHIP_TOLERANCE) {
                return Err(Error::Validation(format!(
                    "point {i} lies outside its box {id}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_foreground(&self, i: usize) -> bool {
        self.point_instance_ids[i] >= 0
    }

    pub fn instance_of(&self, i: usize) -> Option<usize> {
        let id = self.point_instance_ids[i];
        (id >= 0).then_some(id as usize)
    }
}

/// A scored detection. The class is carried by the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: Box3D,
    pub score: f64,
}

impl Detection {
    pub fn new(bbox: Box3D, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Validation(format!(
                "detection score {score} is outside [0, 1]"
            )));
        }
        bbox.validate()?;
        Ok(Self { bbox, score })
    }

    pub fn class_id(&self) -> u32 {
        self.bbox.class_id
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub cloud: PointCloud,
    pub annotation: SceneAnnotation,
}

impl Scene {
    pub fn new(cloud: PointCloud, annotation: SceneAnnotation) -> Result<Self> {
        annotation.validate(&cloud)?;
        Ok(Self { cloud, annotation })
    }

    pub fn empty() -> Self {
        Self {
            cloud: PointCloud::default(),
            annotation: SceneAnnotation::default(),
        }
    }
}

// ---- JSON records -------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct BoxRecord {
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub class_id: u32,
}

impl From<&Box3D> for BoxRecord {
    fn from(b: &Box3D) -> Self {
        Self {
            center: [b.center.x, b.center.y, b.center.z],
            size: [b.size.x, b.size.y, b.size.z],
            class_id: b.class_id,
        }
    }
}

impl BoxRecord {
    pub(crate) fn to_box(&self) -> Result<Box3D> {
        Box3D::new(
            Point3::from(self.center),
            Vector3::from(self.size),
            self.class_id,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct DetectionRecord {
    #[serde(rename = "box")]
    pub bbox: BoxRecord,
    pub score: f64,
}

impl From<&Detection> for DetectionRecord {
    fn from(d: &Detection) -> Self {
        Self {
            bbox: BoxRecord::from(&d.bbox),
            score: d.score,
        }
    }
}

impl DetectionRecord {
    pub(crate) fn to_detection(&self) -> Result<Detection> {
        Detection::new(self.bbox.to_box()?, self.score)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationFile {
    boxes: Vec<BoxRecord>,
    instance_ids: Vec<i64>,
    feature_dim: usize,
}

// ---- file I/O -------------------------------------------------------------

/// Resolve `path` to the shared stem of the `.pts` / `.ann` pair.
///
/// Accepts the bare stem or a path ending in `.pts`, `.ann` or `.scene`.
pub fn scene_stem(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pts" | "ann" | "scene") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn scene_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = scene_stem(path);
    (with_suffix(&stem, "pts"), with_suffix(&stem, "ann"))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Load and validate a scene.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let (pts_path, ann_path) = scene_paths(path.as_ref());
    let ann_text = read_text(&ann_path)?;
    let ann: AnnotationFile =
        serde_json::from_str(&ann_text).map_err(|e| parse_err(&ann_path, e.to_string()))?;
    let pts_text = read_text(&pts_path)?;

    let dim = ann.feature_dim;
    let mut positions = Vec::new();
    let mut features = Vec::new();
    for (lineno, line) in pts_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        let mut xyz = [0.0; 3];
        for (j, tok) in line.split_ascii_whitespace().enumerate() {
            let v: f64 = tok.parse().map_err(|_| {
                parse_err(
                    &pts_path,
                    format!("line {}: `{tok}` is not a number", lineno + 1),
                )
            })?;
            if j < 3 {
                xyz[j] = v;
            } else if j < 3 + dim {
                features.push(v);
            }
            count += 1;
        }
        if count != 3 + dim {
            return Err(parse_err(
                &pts_path,
                format!(
                    "line {}: expected {} values, found {count}",
                    lineno + 1,
                    3 + dim
                ),
            ));
        }
        positions.push(Point3::from(xyz));
    }

    let cloud = PointCloud::with_features(positions, features, dim)?;
    let boxes = ann
        .boxes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            b.to_box()
                .map_err(|e| Error::Validation(format!("box {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Scene::new(
        cloud,
        SceneAnnotation {
            boxes,
            point_instance_ids: ann.instance_ids,
        },
    )
}

/// Canonical `.pts` text for `cloud`.
pub fn format_points(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 48);
    for i in 0..cloud.len() {
        let p = cloud.position(i);
        write!(out, "{} {} {}", p.x, p.y, p.z).unwrap();
        if cloud.has_features() {
            for f in cloud.feature(i) {
                write!(out, " {f}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// Write `scene` as `<stem>.pts` + `<stem>.ann`.
pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let (pts_path, ann_path) = scene_paths(path.as_ref());
    let ann = AnnotationFile {
        boxes: scene.annotation.boxes.iter().map(BoxRecord::from).collect(),
        instance_ids: scene.annotation.point_instance_ids.clone(),
        feature_dim: scene.cloud.feature_dim(),
    };
    let mut ann_text = serde_json::to_string_pretty(&ann).expect("annotation serializes");
    ann_text.push('\n');
    fs::write(&pts_path, format_points(&scene.cloud)).map_err(|e| Error::io(&pts_path, e))?;
    fs::write(&ann_path, ann_text).map_err(|e| Error::io(&ann_path, e))?;
    Ok(())
}

/// Write an ASCII PLY 1.0 file with `x y z red green blue` vertices.
pub fn export_ply(points: &[Point3], colors: &[[u8; 3]], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if points.len() != colors.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} points but {} colors",
            points.len(),
            colors.len()
        )));
    }
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    writeln!(out, "element vertex {}", points.len()).unwrap();
    out.push_str(
        "property double x\nproperty double y\nproperty double z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
    );
    for (p, c) in points.iter().zip(colors) {
        writeln!(out, "{} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2]).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
