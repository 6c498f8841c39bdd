//! Uniform-grid radius search and k-nearest neighbors, checked against a
//! linear scan.

use raygroup::rng::SplitMix64;
use raygroup::spatial::GridIndex;
use raygroup::synth::oracle_ball_query;
use raygroup::Point3;

fn main() -> raygroup::Result<()> {
    let mut rng = SplitMix64::new(1);
    let pts: Vec<Point3> = (0..2000)
        .map(|_| {
            Point3::new(
                rng.uniform(0.0, 4.0),
                rng.uniform(0.0, 4.0),
                rng.uniform(0.0, 2.0),
            )
        })
        .collect();
    let grid = GridIndex::build(&pts, 0.2)?;
    println!(
        "{} points in {} occupied cells",
        grid.len(),
        grid.cell_count()
    );

    let q = Point3::new(2.0, 2.0, 1.0);
    let hits = grid.ball_query(&q, 0.3, 8);
    println!("ball r=0.3, max_k=8 around {q:?}: {hits:?}");
    for &i in &hits {
        println!("  {i:>4} at distance {:.4}", (pts[i] - q).norm());
    }
    let all = grid.ball_query_all(&q, 0.3);
    assert_eq!(all, oracle_ball_query(&pts, &q, 0.3));
    println!(
        "untruncated: {} hits, identical to the linear scan",
        all.len()
    );
    println!("5 nearest: {:?}", grid.knn(&q, 5));
    Ok(())
}
