//! Timing of the two hot kernels. Build with `--release` for real numbers.
//!
//!     cargo run --release --example perf_smoke

use std::time::Instant;

use raygroup::rays::emit_rays;
use raygroup::rng::SplitMix64;
use raygroup::sampling::fps_indices;
use raygroup::spatial::GridIndex;
use raygroup::Point3;

fn cloud(rng: &mut SplitMix64, n: usize, extent: f64) -> Vec<Point3> {
    (0..n)
        .map(|_| {
            Point3::new(
                rng.uniform(0.0, extent),
                rng.uniform(0.0, extent),
                rng.uniform(0.0, extent),
            )
        })
        .collect()
}

fn main() -> raygroup::Result<()> {
    let mut rng = SplitMix64::new(5);
    let pts = cloud(&mut rng, 50_000, 10.0);
    let t = Instant::now();
    let picked = fps_indices(&pts, 2048, 0)?;
    println!("FPS {} -> {}: {:?}", pts.len(), picked.len(), t.elapsed());

    let seeds = cloud(&mut rng, 2048, 6.0);
    let centers = cloud(&mut rng, 256, 6.0);
    let t = Instant::now();
    let grid = GridIndex::build(&seeds, 0.2)?;
    let (mut queries, mut hits) = (0usize, 0usize);
    for c in &centers {
        for ray in &emit_rays(*c, 1.0, 9)?.rays {
            for k in 0..8 {
                hits += grid
                    .ball_query(&ray.at((k as f64 + 0.5) / 8.0), 0.2, 8)
                    .len();
                queries += 1;
            }
        }
    }
    println!(
        "{queries} ball queries over {} seeds: {:?} ({hits} hits)",
        seeds.len(),
        t.elapsed()
    );
    Ok(())
}
