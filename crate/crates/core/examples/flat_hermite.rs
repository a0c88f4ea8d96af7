//! In flat space the acceleration-optimal transition between two straight
//! lanes is a cubic Hermite spline. With a free duration the solver picks the
//! longest one allowed.

use std::sync::Arc;

use rsg::ode::Limits;
use rsg::solver::solve_transition;
use rsg::{Euclidean, Gait, TransitionProblem, Variant};

fn main() {
    let problem = TransitionProblem::new(
        Variant::Acceleration,
        Arc::new(Euclidean::new(2)),
        Gait::line("lower", &[0.0, 0.0], &[1.0, 0.0]).unwrap(),
        0.0,
        Gait::line("upper", &[0.0, 1.0], &[1.0, 0.0]).unwrap(),
    )
    .with_limits(Limits::unbounded(2));
    let sol = solve_transition(&problem).unwrap();
    let t = sol.decision.duration;
    println!(
        "status {}  T={t:.6}  t_f={:.6}  cost={:.8}  (12/T^3 = {:.8})",
        sol.status.as_str(),
        sol.decision.arrival_phase,
        sol.cost,
        12.0 / t.powi(3)
    );
    let traj = sol.trajectory.unwrap();
    for i in (0..traj.len()).step_by(32) {
        let s = traj.times[i] / t;
        let r = traj.position(i);
        println!("s={s:.3}  y={:.8}  cubic={:.8}", r[1], 3.0 * s * s - 2.0 * s * s * s);
    }
}
