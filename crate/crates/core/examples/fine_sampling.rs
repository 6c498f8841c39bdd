//! Coarse stratified anchors and the inverse-CDF fine resampling that
//! concentrates on bins whose coarse anchor touched the object.

use raygroup::rays::emit_rays;
use raygroup::sampling::{coarse_anchors, fine_anchors, fine_fractions, stratified_fractions};
use raygroup::Point3;

fn main() -> raygroup::Result<()> {
    println!("coarse fractions, 8 bins: {:?}", stratified_fractions(8));

    let masks = [false, true, false, true, false, false, true, false];
    let fine = fine_fractions(&masks, 10);
    let shown: Vec<String> = fine.iter().map(|t| format!("{t:.4}")).collect();
    println!(
        "masks {masks:?}\nfine fractions, K_f = 10: {}",
        shown.join(" ")
    );
    println!("no positive bins: {:?}", fine_fractions(&[false; 5], 3));

    let bundle = emit_rays(Point3::origin(), 2.0, 9)?;
    let coarse = coarse_anchors(&bundle, 5)?;
    // Pretend only the middle bin of each ray hit something.
    let rows = vec![vec![false, false, true, false, false]; bundle.len()];
    let fine = fine_anchors(&rows, 3, &bundle)?;
    println!(
        "\n{} rays: {} coarse anchors, {} fine anchors",
        bundle.len(),
        coarse.len(),
        fine.len()
    );
    for a in fine.ray(0) {
        println!(
            "  ray 0 fine t = {:.4}, distance {:.4}",
            a.t,
            (a.position - bundle.origin).norm()
        );
    }
    Ok(())
}
