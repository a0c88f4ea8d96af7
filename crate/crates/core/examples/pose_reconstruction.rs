//! Net body displacement per cycle of circular gaits of growing radius.

use rsg::se2::Pose;
use rsg::swimmer::reconstruct_pose;
use rsg::{DragMetric, Gait, MassMetric, SwimmerParams};

fn main() {
    let drag = DragMetric::new(SwimmerParams::default()).unwrap();
    let mass = MassMetric::new(SwimmerParams::default()).unwrap();
    println!("radius  drag(x, y, theta)                 mass(x, y, theta)");
    for k in 1..=8 {
        let radius = 0.1 * k as f64;
        let gait = Gait::circle("loop", [0.0, 0.0], radius, 1.0, true).unwrap();
        let a: Pose = reconstruct_pose(&drag, &gait, 0.0, 1.0, 400).net();
        let b: Pose = reconstruct_pose(&mass, &gait, 0.0, 1.0, 400).net();
        println!(
            "{radius:.1}     ({:+.5}, {:+.5}, {:+.5})   ({:+.5}, {:+.5}, {:+.5})",
            a.x, a.y, a.theta, b.x, b.y, b.theta
        );
    }
}
