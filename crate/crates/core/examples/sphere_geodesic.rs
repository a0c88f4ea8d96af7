//! Shortest path between two points on the unit sphere, in latitude and
//! longitude coordinates, compared with the great-circle length.

use std::sync::Arc;

use rsg::ode::Limits;
use rsg::solver::solve_transition;
use rsg::{Gait, Sphere, TransitionProblem, Variant};

fn main() {
    let (a, b) = ([0.3, -0.5], [-0.2, 0.8]);
    let mut problem = TransitionProblem::new(
        Variant::Path,
        Arc::new(Sphere),
        Gait::stationary("a", &a, 1.0).unwrap(),
        0.0,
        Gait::stationary("b", &b, 1.0).unwrap(),
    )
    .with_limits(Limits::unbounded(2));
    problem.settings.duration_bounds = Some([1.0, 1.0]);

    let sol = solve_transition(&problem).unwrap();
    // over unit time the cost is the squared length
    let unit = |p: [f64; 2]| [p[0].cos() * p[1].cos(), p[0].cos() * p[1].sin(), p[0].sin()];
    let (ua, ub) = (unit(a), unit(b));
    let arc = (ua[0] * ub[0] + ua[1] * ub[1] + ua[2] * ub[2]).acos();
    println!("status {}  residual {:.2e}", sol.status.as_str(), sol.residual);
    println!("length {:.10}  great circle {:.10}", sol.cost.sqrt(), arc);
    let traj = sol.trajectory.unwrap();
    for i in (0..traj.len()).step_by(64) {
        let r = traj.position(i);
        println!("t={:.3}  lat={:+.6}  lon={:+.6}", traj.times[i], r[0], r[1]);
    }
}
