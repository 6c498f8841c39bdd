//! Generate an annotated synthetic room and save it as `.pts` + `.ann`.
//!
//!     cargo run --example synth_scene -- /tmp/room 17

use raygroup::scene::{save_scene, scene_paths};
use raygroup::synth::{generate_scene, SceneSpec};

fn main() -> raygroup::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| {
        std::env::temp_dir()
            .join("raygroup_room")
            .display()
            .to_string()
    });
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));

    let scene = generate_scene(&SceneSpec {
        rng_seed: seed,
        ..SceneSpec::default()
    })?;
    for (i, b) in scene.annotation.boxes.iter().enumerate() {
        let n = scene
            .annotation
            .point_instance_ids
            .iter()
            .filter(|&&id| id == i as i64)
            .count();
        println!(
            "box {i}: class {} center ({:.2}, {:.2}, {:.2}) size ({:.2}, {:.2}, {:.2}), {n} points",
            b.class_id, b.center.x, b.center.y, b.center.z, b.size.x, b.size.y, b.size.z
        );
    }
    save_scene(&scene, &out)?;
    let (pts, ann) = scene_paths(out.as_ref());
    println!(
        "{} points -> {} and {}",
        scene.cloud.len(),
        pts.display(),
        ann.display()
    );
    Ok(())
}
