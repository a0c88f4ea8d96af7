//! Forward gait, transition, turning gait: body motion and accumulated cost
//! of the whole maneuver, written as CSV to stdout.

use std::sync::Arc;

use rsg::export::write_scenario;
use rsg::scenario::assemble_scenario;
use rsg::solver::solve_transition;
use rsg::{DragMetric, Gait, SwimmerParams, TransitionProblem, Variant};

fn main() {
    let drag = DragMetric::new(SwimmerParams::default()).unwrap();
    let problem = TransitionProblem::new(
        Variant::Path,
        Arc::new(drag.clone()),
        Gait::default_forward(),
        0.5,
        Gait::default_turning(),
    );
    let sol = solve_transition(&problem).unwrap();
    let scenario = assemble_scenario(&problem, &sol, &drag, 50).expect("converged transition");
    let net = scenario.net_displacement();
    eprintln!(
        "net x={:.5} y={:.5} theta={:.5}  total cost {:.5}  junction jumps {:.1e} {:.1e}",
        net.x,
        net.y,
        net.theta,
        scenario.total_cost(),
        scenario.position_jumps[0],
        scenario.position_jumps[1]
    );
    write_scenario(std::io::stdout().lock(), &scenario).unwrap();
}
