//! Loss primitives and the weighted composite with its breakdown.

use raygroup::losses::{
    composite_loss, cross_entropy, mean_binary_cross_entropy, smooth_l1, LossTerms, LossWeights,
    SCALE_REG_BETA,
};

fn main() -> raygroup::Result<()> {
    for d in [0.0, 0.03, 0.0625, 0.1, 1.0] {
        println!(
            "smooth_l1(d = {d:<6}, beta = {SCALE_REG_BETA}) = {:.6}",
            smooth_l1(d, 0.0, SCALE_REG_BETA)?
        );
    }
    println!(
        "cross_entropy([0.2, 0.7, 0.1], 1) = {:.6}",
        cross_entropy(&[0.2, 0.7, 0.1], 1)?
    );
    println!(
        "mean BCE = {:.6}",
        mean_binary_cross_entropy(&[0.9, 0.2, 0.6], &[true, false, false])?
    );

    let weights = LossWeights::default();
    let mut terms = LossTerms::new();
    for (k, v) in [
        ("vote_reg", 0.4),
        ("fbs", 0.3),
        ("obj_cls", 0.5),
        ("sem_cls", 1.2),
        ("box", 0.8),
    ] {
        terms.insert(k.into(), v);
    }
    // The ray-grouping term supplied as its members instead of pre-combined.
    for (k, v) in [("scale_reg", 0.2), ("c_cls", 0.6), ("f_cls", 0.5)] {
        terms.insert(k.into(), v);
    }
    let loss = composite_loss(&terms, &weights)?;
    println!("\ncomposite total {:.6}", loss.total);
    for (k, v) in &loss.breakdown {
        println!("  {k:<16} {v:.6}");
    }
    Ok(())
}
