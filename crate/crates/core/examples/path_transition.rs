//! Path-optimal transition from the forward gait to the turning gait on the
//! viscous swimmer's drag metric.

use std::sync::Arc;

use rsg::solver::solve_transition;
use rsg::{DragMetric, Gait, SwimmerParams, TransitionProblem, Variant};

fn main() {
    let t0: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let problem = TransitionProblem::new(
        Variant::Path,
        Arc::new(DragMetric::new(SwimmerParams::default()).unwrap()),
        Gait::default_forward(),
        t0,
        Gait::default_turning(),
    );
    let sol = solve_transition(&problem).unwrap();
    println!(
        "t0={t0}  status={}  T={:.4}  t_f={:.4}  residual={:.2e}  cost={:.6}",
        sol.status.as_str(),
        sol.decision.duration,
        sol.decision.arrival_phase,
        sol.residual,
        sol.cost
    );
    println!("initial joint rates {:?}", sol.decision.rates.as_slice());
}
