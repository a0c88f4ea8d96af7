//! Path-optimal transition cost as a function of the departure phase.

use std::sync::Arc;

use rsg::solver::sweep_transitions;
use rsg::{DragMetric, Gait, SwimmerParams, TransitionProblem, Variant};

fn main() {
    let count: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let problem = TransitionProblem::new(
        Variant::Path,
        Arc::new(DragMetric::new(SwimmerParams::default()).unwrap()),
        Gait::default_forward(),
        0.0,
        Gait::default_turning(),
    );
    for sol in sweep_transitions(&problem, count).unwrap() {
        let p = problem.source.eval(sol.departure_phase).position;
        let (_, gap) = problem.target.nearest_phase(&p, 720);
        println!(
            "t0={:.3}  distance to target {:.4}  {:<14} cost={:.6}",
            sol.departure_phase,
            gap,
            sol.status.as_str(),
            sol.cost
        );
    }
}
