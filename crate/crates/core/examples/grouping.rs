//! Vote clustering, positive assignment and per-cluster anchor labels on a
//! synthetic scene with oracle votes.

use raygroup::grouping::{
    anchor_mask_labels_indexed, assign_positive_clusters, group_votes, sample_candidates,
    CandidateMode,
};
use raygroup::rays::{clamp_scale, emit_rays, DEFAULT_MIN_SCALE};
use raygroup::sampling::{coarse_anchors, fine_anchors, foreground_biased_sampling};
use raygroup::spatial::GridIndex;
use raygroup::synth::{generate_scene, oracle_scores, oracle_votes, SceneSpec};

fn main() -> raygroup::Result<()> {
    let scene = generate_scene(&SceneSpec {
        rng_seed: 9,
        ..SceneSpec::default()
    })?;
    let scores = oracle_scores(&scene.annotation);
    let seeds =
        foreground_biased_sampling(scene.cloud.positions(), &scores, 1024, 896, 128, (0, 0))?
            .indices;
    let votes = oracle_votes(&scene.cloud, &scene.annotation).select(&seeds);
    let seed_pos: Vec<_> = seeds.iter().map(|&i| scene.cloud.position(i)).collect();
    let cand = sample_candidates(votes.positions(), &seed_pos, 64, CandidateMode::VoteFps)?;
    let centers: Vec<_> = cand.iter().map(|&i| votes.position(i)).collect();
    let clusters = assign_positive_clusters(
        group_votes(&centers, &votes, 0.3)?,
        &scene.annotation.boxes,
        0.3,
    );
    let grid = GridIndex::from_cloud(&scene.cloud, 0.2)?;

    let positive = clusters.iter().filter(|c| c.positive == Some(true)).count();
    println!(
        "{} clusters from {} seed votes, {positive} positive",
        clusters.len(),
        votes.len()
    );
    for (i, c) in clusters
        .iter()
        .enumerate()
        .filter(|(_, c)| c.positive == Some(true))
        .take(8)
    {
        let scale = c
            .scale
            .unwrap_or_else(|| clamp_scale(0.0, DEFAULT_MIN_SCALE));
        let bundle = emit_rays(c.center, scale, 9)?;
        let mut coarse = coarse_anchors(&bundle, 5)?;
        let labels =
            anchor_mask_labels_indexed(&coarse, &scene.annotation, &grid, 0.2, c.assigned_box);
        coarse.set_masks(&labels)?;
        let fine = fine_anchors(&coarse.mask_rows(), 3, &bundle)?;
        println!(
            "  cluster {i:>2}: {:>3} members, box {:?}, scale {scale:.3}, {}/{} coarse anchors on surface, {} fine",
            c.member_seed_indices.len(),
            c.assigned_box,
            labels.iter().filter(|l| **l).count(),
            labels.len(),
            fine.len()
        );
    }
    Ok(())
}
