//! Deterministic geometry engine for ray-based feature grouping in point-cloud
//! 3D detection.
//!
//! The crate covers the non-learned parts of the detector: spherical ray
//! emission around vote clusters, coarse-to-fine anchor placement along rays,
//! farthest point and foreground-biased sampling, grid-accelerated ball
//! queries, anchor labelling against ground-truth surfaces, ordered feature
//! layout, loss arithmetic and the axis-aligned 3D evaluation stack
//! (IoU, NMS, AP/mAP). Learned components are replaced by oracles computed
//! from scene annotations or by a fixed positional featurizer.
//!
//! Everything is computed in `f64` and every operation is deterministic.

// `!(x > 0.0)` is used on purpose so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod eval;
pub mod grouping;
pub mod losses;
pub mod pipeline;
pub mod rays;
pub mod rng;
pub mod sampling;
pub mod scene;
pub mod spatial;
pub mod synth;

pub use error::{Error, Result};
pub use scene::{Box3D, Detection, PointCloud, SceneAnnotation};

/// 3D position in meters.
pub type Point3 = nalgebra::Point3<f64>;
/// 3D displacement or direction.
pub type Vector3 = nalgebra::Vector3<f64>;
