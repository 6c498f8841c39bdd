//! Ray layout for a range of polar bin counts, and one emitted bundle.
//!
//!     cargo run --example rays -- 9

use raygroup::rays::{azimuth_count, emit_rays, ray_count};
use raygroup::Point3;

fn main() -> raygroup::Result<()> {
    let p: usize = std::env::args()
        .nth(1)
        .map_or(Ok(9), |a| a.parse())
        .expect("polar bins");

    println!("polar bins -> rays");
    for bins in [2, 3, 5, 7, 9, 11] {
        println!("  {bins:>2} -> {}", ray_count(bins)?);
    }

    let per_ring: Vec<usize> = (0..p).map(|i| azimuth_count(i, p, 4)).collect();
    println!("\nP = {p}: azimuths per polar ring {per_ring:?}");

    let bundle = emit_rays(Point3::new(1.0, 1.0, 0.5), 0.75, p)?;
    println!("bundle of {} rays, scale {}", bundle.len(), bundle.scale);
    for ray in bundle.rays.iter().take(6) {
        let e = ray.endpoint();
        println!(
            "  ring {} az {}: polar {:.4} azimuth {:.4} -> ({:.4}, {:.4}, {:.4})",
            ray.bin_index, ray.azimuth_index, ray.polar, ray.azimuth, e.x, e.y, e.z
        );
    }
    Ok(())
}
