//! Acceleration- and torque-optimal transitions on the perfect-fluid mass
//! metric. Both ease out of the source gait and into the target gait.

use std::sync::Arc;

use rsg::geometry::MetricField;
use rsg::solver::solve_transition;
use rsg::{Gait, MassMetric, SwimmerParams, TransitionProblem, Variant};

fn main() {
    let t0: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let mass: Arc<dyn MetricField> = Arc::new(MassMetric::new(SwimmerParams::default()).unwrap());
    for variant in [Variant::Acceleration, Variant::Torque] {
        let problem = TransitionProblem::new(
            variant,
            mass.clone(),
            Gait::default_forward(),
            t0,
            Gait::default_turning(),
        );
        let sol = solve_transition(&problem).unwrap();
        println!(
            "{:<12} status={}  T={:.4}  t_f={:.4}  residual={:.2e}  cost={:.6}",
            variant.as_str(),
            sol.status.as_str(),
            sol.decision.duration,
            sol.decision.arrival_phase,
            sol.residual,
            sol.cost
        );
    }
}
