//! 3D IoU, class-wise NMS and VOC-style average precision.
//!
//!     cargo run --example evaluation

use raygroup::eval::{evaluate, iou3d, nms3d, ApMethod, EvalScene};
use raygroup::scene::{Box3D, Detection};
use raygroup::{Point3, Vector3};

fn cube(x: f64, class_id: u32) -> Box3D {
    Box3D::new(
        Point3::new(x, 0.0, 0.5),
        Vector3::new(1.0, 1.0, 1.0),
        class_id,
    )
    .expect("valid box")
}

fn main() -> raygroup::Result<()> {
    println!(
        "IoU of unit cubes offset by 0.5: {}",
        iou3d(&cube(0.0, 0), &cube(0.5, 0))
    );

    let dets: Vec<Detection> = [
        (0.0, 0, 0.9),
        (0.1, 0, 0.8),
        (5.5, 0, 0.7),
        (12.0, 1, 0.6),
        (10.0, 1, 0.5),
    ]
    .iter()
    .map(|&(x, c, s)| Detection::new(cube(x, c), s))
    .collect::<Result<_, _>>()?;
    let kept = nms3d(&dets, 0.25)?;
    println!("NMS at 0.25 keeps {kept:?} of {} detections", dets.len());

    let scene = EvalScene {
        detections: dets,
        gt: vec![cube(0.0, 0), cube(5.0, 0), cube(10.0, 1), cube(20.0, 2)],
    };
    for method in [ApMethod::AllPoint, ApMethod::ElevenPoint] {
        println!("\n{method:?}");
        for res in evaluate(std::slice::from_ref(&scene), &[0.25, 0.5], method)? {
            let aps: Vec<String> = res
                .per_class
                .iter()
                .map(|c| format!("class {} {:.4}", c.class_id, c.ap))
                .collect();
            println!(
                "  mAP@{:<4} {:.4}  ({})",
                res.iou_threshold,
                res.map,
                aps.join(", ")
            );
        }
    }
    Ok(())
}
