//! Farthest point sampling against foreground-biased sampling on a
//! synthetic room, scored by how many picks land on objects.

use raygroup::eval::foreground_recall;
use raygroup::sampling::{foreground_biased_sampling, fps_indices, SampleSource};
use raygroup::synth::{generate_scene, oracle_scores, SceneSpec};

fn main() -> raygroup::Result<()> {
    let scene = generate_scene(&SceneSpec {
        background_points: 848,
        rng_seed: 42,
        ..SceneSpec::default()
    })?;
    let pts = scene.cloud.positions();
    let scores = oracle_scores(&scene.annotation);
    println!(
        "{} points, {} on objects",
        pts.len(),
        scores.iter().filter(|s| **s > 0.5).count()
    );

    let fps = fps_indices(pts, 1024, 0)?;
    let fbs = foreground_biased_sampling(pts, &scores, 1024, 896, 128, (0, 0))?;
    println!(
        "FPS 1024:        foreground recall {:.3}",
        foreground_recall(&fps, &scene.annotation)?
    );
    println!(
        "FBS 896 + 128:   foreground recall {:.3} ({} foreground-sourced, {} background-sourced)",
        foreground_recall(&fbs.indices, &scene.annotation)?,
        fbs.count(SampleSource::FbsForeground),
        fbs.count(SampleSource::FbsBackground)
    );
    Ok(())
}
