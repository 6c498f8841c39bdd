//! Full pipeline on the committed room fixture, printing a summary and
//! optionally writing `report.json` and PLY dumps.
//!
//!     cargo run --example pipeline -- [out_dir]

use std::path::Path;

use raygroup::config::PipelineConfig;
use raygroup::pipeline::{run_pipeline, run_pipeline_on_scene, SideInputs};
use raygroup::scene::load_scene;

fn main() -> raygroup::Result<()> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/unit_room");
    let cfg = PipelineConfig::default();
    let report = match std::env::args().nth(1) {
        Some(out) => run_pipeline(&cfg, &fixture, Path::new(&out), true)?,
        None => run_pipeline_on_scene(&cfg, &load_scene(&fixture)?, &SideInputs::default())?.report,
    };

    println!(
        "scene: {} points, {} boxes",
        report.scene.num_points, report.scene.num_boxes
    );
    for (i, l) in report.sampling.layers.iter().enumerate() {
        println!(
            "layer {i}: {} -> {} seeds, foreground recall {:.3} (FPS {:.3})",
            l.input_points,
            l.selected,
            l.foreground_recall.unwrap_or(0.0),
            l.fps_foreground_recall.unwrap_or(0.0)
        );
    }
    println!(
        "{} clusters, {} positive, {:.1} votes each",
        report.grouping.num_clusters, report.grouping.num_positive, report.grouping.mean_members
    );
    if let Some(c) = report.clusters.iter().find(|c| c.positive) {
        println!(
            "first positive cluster: {} rays, {} coarse + {} fine anchors, surface recall {:.3}",
            c.num_rays,
            c.num_coarse_anchors,
            c.num_fine_anchors,
            c.surface_point_recall.unwrap_or(0.0)
        );
    }
    println!(
        "mean surface recall {:.3}",
        report.recall.mean_surface_point_recall.unwrap_or(0.0)
    );
    println!("composite loss {:.6}", report.losses.composite.total);
    println!(
        "matches reference layout: {}",
        report.paper_parity.all_match
    );
    Ok(())
}
