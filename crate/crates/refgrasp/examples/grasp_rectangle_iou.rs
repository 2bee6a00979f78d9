//! Rotated-rectangle overlap, the way grasp benchmarks score it: exact
//! polygon-clipping IoU plus the two-part success rule (angle within 30
//! degrees, IoU above 0.25).

use refgrasp::grasp::{angle_difference_deg, rect_iou, GraspRectangle};
use refgrasp::metrics::grasp_success;

fn main() {
    let truth = GraspRectangle::new(100.0, 100.0, 0.3, 40.0, 20.0);
    let cases = [
        ("identical", truth),
        (
            "shifted 6px",
            GraspRectangle::new(106.0, 100.0, 0.3, 40.0, 20.0),
        ),
        (
            "rotated 25 deg",
            GraspRectangle::new(100.0, 100.0, 0.3 + 25f64.to_radians(), 40.0, 20.0),
        ),
        (
            "rotated 40 deg",
            GraspRectangle::new(100.0, 100.0, 0.3 + 40f64.to_radians(), 40.0, 20.0),
        ),
        (
            "far away",
            GraspRectangle::new(160.0, 40.0, 0.3, 40.0, 20.0),
        ),
        (
            "half-turn is the same grasp",
            GraspRectangle::new(100.0, 100.0, 0.3 + std::f64::consts::PI, 40.0, 20.0),
        ),
    ];

    println!(
        "{:<28} {:>8} {:>11} {:>9}",
        "prediction", "IoU", "angle diff", "success"
    );
    for (name, pred) in cases {
        let iou = rect_iou(&pred, &truth);
        let dtheta = angle_difference_deg(pred.angle, truth.angle);
        println!(
            "{name:<28} {iou:>8.4} {dtheta:>10.1}\u{00b0} {:>9}",
            grasp_success(&pred, &truth)
        );
        // IoU is symmetric, bit for bit.
        assert_eq!(iou.to_bits(), rect_iou(&truth, &pred).to_bits());
    }
}
