//! Gait-transition boundary value problems solved by shooting.
//!
//! Three variants share one driver:
//!
//! | variant      | shot ODE            | decision variables      | boundary error        |
//! |--------------|---------------------|-------------------------|-----------------------|
//! | Path         | geodesic            | `t_f, T, γ̇₀`            | position              |
//! | Acceleration | acceleration spline | `t_f, T, a₀, j₀`        | position and velocity |
//! | Torque       | torque spline       | `t_f, T, E₀, P₀`        | position and velocity |
//!
//! The outer loop minimizes `w‖residual‖² + λ·cost` with a Nelder–Mead
//! search started from a small grid of guesses, then polishes the initial
//! rates with damped least squares on the residual alone (`λ = 0`) while
//! holding `t_f` and `T` fixed.

use std::cmp::Ordering;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::InducedTorqueMetric;
use crate::gait::{Gait, ShapeCurve};
use crate::geometry::{christoffel, spd_inverse, GeometryError, MetricField, MetricTensor};
use crate::ode::{integrate_shot, Limits, ShotDynamics, ShotError, Trajectory};
use crate::optim::{least_squares, nelder_mead, FAILED};
use crate::splines::{AccelSplineFlow, GeodesicFlow, TorqueSplineFlow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "path")]
    Path,
    #[serde(rename = "accel", alias = "acceleration")]
    Acceleration,
    #[serde(rename = "torque")]
    Torque,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Path => "path",
            Variant::Acceleration => "accel",
            Variant::Torque => "torque",
        }
    }

    /// Number of free initial-rate components for an `n`-dimensional shape
    /// space.
    pub fn rate_len(&self, n: usize) -> usize {
        match self {
            Variant::Path => n,
            _ => 2 * n,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "path" => Ok(Variant::Path),
            "accel" | "acceleration" => Ok(Variant::Acceleration),
            "torque" => Ok(Variant::Torque),
            other => Err(format!("unknown variant `{other}` (expected path, accel or torque)")),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the boundary error enters the outer objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveMode {
    /// `w‖residual‖² + λ·cost` over all decision variables.
    #[default]
    Penalty,
    /// Cost over `(t_f, T)` only, with the rates shot to zero residual for
    /// every candidate.
    Constraint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub mode: ObjectiveMode,
    /// Weight `w` on the squared boundary error.
    pub residual_weight: f64,
    /// Weight `λ` on the trajectory cost.
    pub cost_weight: f64,
    /// Converged means a residual norm below this.
    pub tolerance: f64,
    /// RK4 steps per shot for the polish and the reported solution.
    pub steps: usize,
    /// RK4 steps per shot during the grid and simplex search.
    pub search_steps: usize,
    /// Bounds on `T` as multiples of the source gait period.
    pub duration_factors: [f64; 2],
    /// Absolute bounds on `T`; overrides `duration_factors`. Equal bounds
    /// pin `T`.
    pub duration_bounds: Option<[f64; 2]>,
    /// Pins the arrival phase `t_f` on the target gait.
    pub arrival_phase: Option<f64>,
    /// Grid points per searched axis.
    pub grid: usize,
    /// Best grid points refined by the simplex search.
    pub refine_starts: usize,
    pub simplex_iterations: u64,
    /// Evaluation budget factor of the least-squares refinement of the
    /// penalty objective.
    pub refine_patience: usize,
    /// Evaluation budget factor of the final zero-residual polish.
    pub polish_patience: usize,
    /// Departure phases in a sweep.
    pub phase_count: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            mode: ObjectiveMode::Penalty,
            residual_weight: 1e4,
            cost_weight: 1.0,
            tolerance: 1e-6,
            steps: 256,
            search_steps: 64,
            duration_factors: [0.05, 5.0],
            duration_bounds: None,
            arrival_phase: None,
            grid: 3,
            refine_starts: 3,
            simplex_iterations: 300,
            refine_patience: 10,
            polish_patience: 40,
            phase_count: 12,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("weights must be non-negative and finite")]
    BadWeights,
    #[error("joint limits are not well ordered or do not match the shape dimension")]
    BadLimits,
    #[error("departure phase {0} outside [0, source period)")]
    BadPhase(f64),
    #[error("duration bounds must satisfy 0 < min <= max, got [{0}, {1}]")]
    BadDurations(f64, f64),
    #[error("gait dimension {found} does not match the metric dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("torque variant requires an induced metric of matching dimension")]
    MissingInducedMetric,
    #[error("{0} steps per shot is below the minimum of 16")]
    TooFewSteps(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One gait-transition boundary value problem.
#[derive(Clone)]
pub struct TransitionProblem {
    pub variant: Variant,
    pub metric: Arc<dyn MetricField>,
    /// Induced metric `h` for the torque variant.
    pub induced: Option<Arc<dyn MetricField>>,
    pub source: Gait,
    pub departure_phase: f64,
    pub target: Gait,
    pub limits: Limits,
    pub settings: SolverSettings,
}

impl std::fmt::Debug for TransitionProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransitionProblem")
            .field("variant", &self.variant)
            .field("source", &self.source.label())
            .field("departure_phase", &self.departure_phase)
            .field("target", &self.target.label())
            .field("limits", &self.limits)
            .field("settings", &self.settings)
            .finish_non_exhaustive()
    }
}

impl TransitionProblem {
    /// Problem with default limits and settings. The torque variant gets
    /// the identity actuator cometric, i.e. `h = M²`.
    pub fn new(
        variant: Variant,
        metric: Arc<dyn MetricField>,
        source: Gait,
        departure_phase: f64,
        target: Gait,
    ) -> Self {
        let n = metric.dim();
        let induced = match variant {
            Variant::Torque => InducedTorqueMetric::new(metric.clone(), MetricTensor::identity(n))
                .ok()
                .map(|h| Arc::new(h) as Arc<dyn MetricField>),
            _ => None,
        };
        Self {
            variant,
            metric,
            induced,
            source,
            departure_phase,
            target,
            limits: Limits::default_for(n),
            settings: SolverSettings::default(),
        }
    }

    pub fn with_induced(mut self, induced: Arc<dyn MetricField>) -> Self {
        self.induced = Some(induced);
        self
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn with_departure_phase(mut self, t0: f64) -> Self {
        self.departure_phase = t0;
        self
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let n = self.dim();
        for g in [&self.source, &self.target] {
            if g.dim() != n {
                return Err(ProblemError::DimensionMismatch {
                    expected: n,
                    found: g.dim(),
                });
            }
        }
        let s = &self.settings;
        let weights_ok = [s.residual_weight, s.cost_weight, s.tolerance]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0);
        if !weights_ok || s.tolerance <= 0.0 {
            return Err(ProblemError::BadWeights);
        }
        if s.steps.min(s.search_steps) < crate::ode::MIN_STEPS {
            return Err(ProblemError::TooFewSteps(s.steps.min(s.search_steps)));
        }
        if !self.limits.is_well_ordered() || self.limits.joint_lower.len() != n {
            return Err(ProblemError::BadLimits);
        }
        let t0 = self.departure_phase;
        let in_range = match self.source.period() {
            Some(p) => (0.0..p).contains(&t0),
            None => t0.is_finite(),
        };
        if !in_range {
            return Err(ProblemError::BadPhase(t0));
        }
        let (lo, hi) = self.duration_bounds();
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(ProblemError::BadDurations(lo, hi));
        }
        if self.variant == Variant::Torque {
            match &self.induced {
                Some(h) if h.dim() == n => {}
                _ => return Err(ProblemError::MissingInducedMetric),
            }
        }
        self.metric.metric(&self.source.eval(t0).position)?;
        Ok(())
    }

    /// Reference time scale: the source gait period, or 1 for aperiodic
    /// sources.
    pub fn time_scale(&self) -> f64 {
        self.source.period().unwrap_or(1.0)
    }

    pub fn duration_bounds(&self) -> (f64, f64) {
        match self.settings.duration_bounds {
            Some([lo, hi]) => (lo, hi),
            None => {
                let t = self.time_scale();
                (
                    self.settings.duration_factors[0] * t,
                    self.settings.duration_factors[1] * t,
                )
            }
        }
    }

    /// The induced metric, falling back to the base metric.
    pub fn induced_field(&self) -> &dyn MetricField {
        match &self.induced {
            Some(h) => h.as_ref(),
            None => self.metric.as_ref(),
        }
    }

    fn dynamics(&self) -> Box<dyn ShotDynamics + '_> {
        match self.variant {
            Variant::Path => Box::new(GeodesicFlow {
                field: self.metric.as_ref(),
            }),
            Variant::Acceleration => Box::new(AccelSplineFlow {
                field: self.metric.as_ref(),
            }),
            Variant::Torque => Box::new(TorqueSplineFlow {
                metric: self.metric.as_ref(),
                induced: self.induced_field(),
            }),
        }
    }

    /// Initial shot state for the given free rates.
    pub fn initial_state(&self, rates: &DVector<f64>) -> DVector<f64> {
        let start = self.source.eval(self.departure_phase);
        let mut blocks: Vec<f64> = start.position.iter().copied().collect();
        if self.variant != Variant::Path {
            blocks.extend(start.velocity.iter());
        }
        blocks.extend(rates.iter());
        DVector::from_vec(blocks)
    }
}

/// Decision variables of one shot.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionVariables {
    /// Arrival phase `t_f` on the target gait.
    pub arrival_phase: f64,
    /// Transition duration `T`.
    pub duration: f64,
    /// `γ̇₀` (path), `(a₀, j₀)` (acceleration) or `(E₀, P₀)` (torque).
    pub rates: DVector<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    LimitViolated,
    Diverged,
    MaxIterations,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::LimitViolated => "limit_violated",
            Status::Diverged => "diverged",
            Status::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub variant: Variant,
    pub departure_phase: f64,
    pub decision: DecisionVariables,
    /// `None` only when every candidate shot diverged.
    pub trajectory: Option<Trajectory>,
    pub residual: f64,
    pub residual_vector: DVector<f64>,
    pub cost: f64,
    pub status: Status,
}

impl Solution {
    pub fn is_converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// Integrates one shot of the problem's ODE.
pub fn shoot(
    problem: &TransitionProblem,
    decision: &DecisionVariables,
    steps: usize,
    limits: Option<&Limits>,
) -> Result<Trajectory, ShotError> {
    let dynamics = problem.dynamics();
    integrate_shot(
        dynamics.as_ref(),
        problem.initial_state(&decision.rates),
        decision.duration,
        steps,
        limits,
    )
}

/// Terminal mismatch against the target gait at `t_f`: position only for
/// the path variant, position and velocity stacked otherwise.
pub fn bvp_residual(
    problem: &TransitionProblem,
    decision: &DecisionVariables,
    trajectory: &Trajectory,
) -> DVector<f64> {
    let n = problem.dim();
    let goal = problem.target.eval(decision.arrival_phase);
    let last = trajectory.len() - 1;
    let dp = trajectory.position(last) - &goal.position;
    match problem.variant {
        Variant::Path => dp,
        _ => {
            let dv = trajectory.velocity(last) - &goal.velocity;
            let mut out = DVector::zeros(2 * n);
            out.rows_mut(0, n).copy_from(&dp);
            out.rows_mut(n, n).copy_from(&dv);
            out
        }
    }
}

/// Instantaneous cost at sample `i`: `‖γ̇‖²_g`, `‖a‖²_g` or `‖E‖²_{h*}`.
pub fn cost_integrand(problem: &TransitionProblem, trajectory: &Trajectory, i: usize) -> f64 {
    let n = problem.dim();
    let r = trajectory.position(i).into_owned();
    match problem.variant {
        Variant::Path => {
            let v = trajectory.velocity(i);
            v.dot(&(problem.metric.metric_matrix(&r) * v))
        }
        Variant::Acceleration => {
            let a = trajectory.states[i].rows(2 * n, n);
            a.dot(&(problem.metric.metric_matrix(&r) * a))
        }
        Variant::Torque => {
            let e = trajectory.states[i].rows(2 * n, n);
            match spd_inverse(&problem.induced_field().metric_matrix(&r)) {
                Ok(hstar) => e.dot(&(hstar * e)),
                Err(_) => f64::INFINITY,
            }
        }
    }
}

/// Running trapezoidal integral of the cost, one entry per sample.
pub fn cost_series(problem: &TransitionProblem, trajectory: &Trajectory) -> Vec<f64> {
    let values: Vec<f64> = (0..trajectory.len())
        .map(|i| cost_integrand(problem, trajectory, i))
        .collect();
    let mut acc = Vec::with_capacity(values.len());
    let mut total = 0.0;
    acc.push(0.0);
    for i in 1..values.len() {
        total += 0.5 * (values[i] + values[i - 1]) * (trajectory.times[i] - trajectory.times[i - 1]);
        acc.push(total);
    }
    acc
}

pub fn trajectory_cost(problem: &TransitionProblem, trajectory: &Trajectory) -> f64 {
    cost_series(problem, trajectory).last().copied().unwrap_or(0.0)
}

/// Flat-space guess for the free rates: the chord velocity for paths, the
/// Hermite cubic's initial acceleration and jerk for splines.
fn rate_guess(problem: &TransitionProblem, arrival: f64, duration: f64) -> DVector<f64> {
    let start = problem.source.eval(problem.departure_phase);
    let goal = problem.target.eval(arrival);
    let t = duration;
    let delta = &goal.position - &start.position;
    if problem.variant == Variant::Path {
        return delta / t;
    }
    let v0 = &start.velocity;
    let v1 = &goal.velocity;
    let c2 = (&delta * 3.0 - (v0 * 2.0 + v1) * t) / (t * t);
    let c3 = (&delta * -2.0 + (v0 + v1) * t) / (t * t * t);
    let mut a0 = c2 * 2.0;
    let j0 = c3 * 6.0;
    if let Ok(gamma) = christoffel(problem.metric.as_ref(), &start.position) {
        a0 += gamma.contract(v0.as_slice(), v0.as_slice());
    }
    let (first, second) = match problem.variant {
        Variant::Torque => {
            let h = problem.induced_field().metric_matrix(&start.position);
            (&h * a0, &h * j0)
        }
        _ => (a0, j0),
    };
    let n = problem.dim();
    let mut out = DVector::zeros(2 * n);
    out.rows_mut(0, n).copy_from(&first);
    out.rows_mut(n, n).copy_from(&second);
    out
}

/// Time scaling of the searched rate offsets, so that offsets are
/// dimensionless: `1/T` for velocities, `1/T²` and `1/T³` for the spline
/// blocks. A geodesic's shape path then depends on the offset alone.
fn offset_scale(problem: &TransitionProblem, duration: f64) -> DVector<f64> {
    let n = problem.dim();
    match problem.variant {
        Variant::Path => DVector::from_element(n, 1.0 / duration),
        _ => DVector::from_fn(2 * n, |i, _| duration.powi(if i < n { -2 } else { -3 })),
    }
}

fn offset_rates(problem: &TransitionProblem, arrival: f64, duration: f64, offset: &[f64]) -> DVector<f64> {
    rate_guess(problem, arrival, duration)
        + offset_scale(problem, duration).component_mul(&DVector::from_column_slice(offset))
}

/// Which of `(t_f, T)` are searched.
#[derive(Clone, Copy, Debug)]
struct Layout {
    free_arrival: bool,
    free_duration: bool,
    rates: usize,
    bounds: (f64, f64),
    fixed_arrival: f64,
}

impl Layout {
    fn new(problem: &TransitionProblem) -> Self {
        let bounds = problem.duration_bounds();
        Self {
            free_arrival: problem.settings.arrival_phase.is_none(),
            free_duration: bounds.0 < bounds.1,
            rates: problem.variant.rate_len(problem.dim()),
            bounds,
            fixed_arrival: problem.settings.arrival_phase.unwrap_or(0.0),
        }
    }

    fn time_len(&self) -> usize {
        self.free_arrival as usize + self.free_duration as usize
    }

    /// `(t_f, clamped T, raw T)` from the leading entries of `x`.
    fn times(&self, x: &[f64]) -> (f64, f64, f64) {
        let mut idx = 0;
        let arrival = if self.free_arrival {
            idx += 1;
            x[0]
        } else {
            self.fixed_arrival
        };
        let raw = if self.free_duration { x[idx] } else { self.bounds.0 };
        (arrival, raw.clamp(self.bounds.0, self.bounds.1), raw)
    }

    fn pack_times(&self, arrival: f64, duration: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(2);
        if self.free_arrival {
            x.push(arrival);
        }
        if self.free_duration {
            x.push(duration);
        }
        x
    }
}

struct Evaluation {
    trajectory: Trajectory,
    residual: DVector<f64>,
    cost: f64,
}

fn evaluate(
    problem: &TransitionProblem,
    decision: &DecisionVariables,
    steps: usize,
) -> Result<Evaluation, ShotError> {
    let trajectory = shoot(problem, decision, steps, None)?;
    let residual = bvp_residual(problem, decision, &trajectory);
    let cost = if problem.settings.cost_weight > 0.0 {
        trajectory_cost(problem, &trajectory)
    } else {
        0.0
    };
    Ok(Evaluation {
        trajectory,
        residual,
        cost,
    })
}

/// Shoots the rates to zero residual with `t_f` and `T` held fixed.
fn polish(
    problem: &TransitionProblem,
    arrival: f64,
    duration: f64,
    rates: &DVector<f64>,
    steps: usize,
) -> DVector<f64> {
    let residual = |x: &[f64]| {
        let decision = DecisionVariables {
            arrival_phase: arrival,
            duration,
            rates: DVector::from_column_slice(x),
        };
        shoot(problem, &decision, steps, None)
            .ok()
            .map(|t| bvp_residual(problem, &decision, &t))
            .filter(|r| r.iter().all(|v| v.is_finite()))
    };
    DVector::from_vec(least_squares(residual, rates.as_slice(), problem.settings.polish_patience))
}

struct Candidate {
    decision: DecisionVariables,
    outcome: Option<Evaluation>,
    status: Status,
}

impl Candidate {
    fn residual_norm(&self) -> f64 {
        self.outcome
            .as_ref()
            .map(|e| e.residual.norm())
            .unwrap_or(f64::INFINITY)
    }
}

fn finish(problem: &TransitionProblem, decision: DecisionVariables) -> Candidate {
    let settings = &problem.settings;
    match evaluate(problem, &decision, settings.steps) {
        Err(_) => Candidate {
            decision,
            outcome: None,
            status: Status::Diverged,
        },
        Ok(mut eval) => {
            eval.cost = trajectory_cost(problem, &eval.trajectory);
            let status = if eval.residual.norm() < settings.tolerance {
                match problem.limits.first_violation(&eval.trajectory) {
                    None => Status::Converged,
                    Some(_) => Status::LimitViolated,
                }
            } else {
                Status::MaxIterations
            };
            Candidate {
                decision,
                outcome: Some(eval),
                status,
            }
        }
    }
}

fn grid_offsets(count: usize) -> Vec<f64> {
    let count = count.max(1);
    let mid = (count as f64 - 1.0) / 2.0;
    (0..count).map(|k| k as f64 - mid).collect()
}

/// Starting points `(t_f, T, rate scale)`.
fn initial_grid(problem: &TransitionProblem, layout: &Layout) -> Vec<(f64, f64, f64)> {
    let g = problem.settings.grid.max(1);
    let start = problem.source.eval(problem.departure_phase).position;
    let target_period = problem.target.period().unwrap_or(1.0);
    let arrivals: Vec<f64> = if layout.free_arrival {
        let (nearest, _) = problem.target.nearest_phase(&start, 720);
        grid_offsets(g)
            .iter()
            .map(|k| nearest + k * target_period / (2.0 * g as f64))
            .collect()
    } else {
        vec![layout.fixed_arrival]
    };
    let durations: Vec<f64> = if layout.free_duration {
        let base = problem.time_scale().clamp(layout.bounds.0, layout.bounds.1);
        grid_offsets(g)
            .iter()
            .map(|k| (base * 2f64.powf(*k)).clamp(layout.bounds.0, layout.bounds.1))
            .collect()
    } else {
        vec![layout.bounds.0]
    };
    let scales: Vec<f64> = grid_offsets(g).iter().map(|k| 1.0 + 0.5 * k / mid_or_one(g)).collect();
    let mut out = Vec::new();
    for &a in &arrivals {
        for &d in &durations {
            for &s in &scales {
                out.push((a, d, s));
            }
        }
    }
    out
}

fn mid_or_one(g: usize) -> f64 {
    ((g as f64 - 1.0) / 2.0).max(1.0)
}

fn penalty_objective(problem: &TransitionProblem, layout: &Layout, x: &[f64]) -> f64 {
    let s = &problem.settings;
    let (arrival, duration, raw) = layout.times(x);
    let tl = layout.time_len();
    let rates = offset_rates(problem, arrival, duration, &x[tl..]);
    let decision = DecisionVariables {
        arrival_phase: arrival,
        duration,
        rates,
    };
    match evaluate(problem, &decision, s.search_steps) {
        Ok(e) => {
            let wall = (raw - duration).powi(2) / (layout.bounds.1 * layout.bounds.1);
            s.residual_weight * (e.residual.norm_squared() + wall) + s.cost_weight * e.cost
        }
        Err(_) => FAILED,
    }
}

/// Stacked residuals whose squared norm is the penalty objective: the
/// weighted boundary error, the duration wall, and one `√wᵢ Lᵢᵀ qᵢ` block per
/// sample with `Lᵢ Lᵢᵀ` the cost weight and `wᵢ` the trapezoid weight.
fn penalty_residuals(problem: &TransitionProblem, layout: &Layout, x: &[f64]) -> Option<DVector<f64>> {
    let s = &problem.settings;
    let n = problem.dim();
    let (arrival, duration, raw) = layout.times(x);
    let tl = layout.time_len();
    let decision = DecisionVariables {
        arrival_phase: arrival,
        duration,
        rates: offset_rates(problem, arrival, duration, &x[tl..]),
    };
    let traj = shoot(problem, &decision, s.search_steps, None).ok()?;
    let residual = bvp_residual(problem, &decision, &traj);
    let mut out: Vec<f64> = residual.iter().map(|r| s.residual_weight.sqrt() * r).collect();
    out.push(s.residual_weight.sqrt() * (raw - duration) / layout.bounds.1);
    let samples = traj.len();
    for i in 0..samples {
        let h = if i == 0 {
            traj.times[1] - traj.times[0]
        } else {
            traj.times[i] - traj.times[i - 1]
        };
        let w = if i == 0 || i == samples - 1 { 0.5 * h } else { h };
        let r = traj.position(i).into_owned();
        let (q, weight) = match problem.variant {
            Variant::Path => (traj.velocity(i).into_owned(), problem.metric.metric_matrix(&r)),
            Variant::Acceleration => (
                traj.states[i].rows(2 * n, n).into_owned(),
                problem.metric.metric_matrix(&r),
            ),
            Variant::Torque => (
                traj.states[i].rows(2 * n, n).into_owned(),
                spd_inverse(&problem.induced_field().metric_matrix(&r)).ok()?,
            ),
        };
        let l = weight.cholesky()?.l();
        let scale = (s.cost_weight * w).sqrt();
        out.extend((l.transpose() * q).iter().map(|v| scale * v));
    }
    let out = DVector::from_vec(out);
    out.iter().all(|v| v.is_finite()).then_some(out)
}

fn constrained_rates(problem: &TransitionProblem, arrival: f64, duration: f64, steps: usize) -> DVector<f64> {
    polish(problem, arrival, duration, &rate_guess(problem, arrival, duration), steps)
}

fn constraint_objective(problem: &TransitionProblem, layout: &Layout, x: &[f64]) -> f64 {
    let s = &problem.settings;
    let (arrival, duration, raw) = layout.times(x);
    let rates = constrained_rates(problem, arrival, duration, s.search_steps);
    let decision = DecisionVariables {
        arrival_phase: arrival,
        duration,
        rates,
    };
    match evaluate(problem, &decision, s.search_steps) {
        Ok(e) => {
            let wall = (raw - duration).powi(2) / (layout.bounds.1 * layout.bounds.1);
            let miss = e.residual.norm_squared();
            let penalty = if miss.sqrt() < s.tolerance { 0.0 } else { miss };
            s.residual_weight * (penalty + wall) + s.cost_weight.max(f64::MIN_POSITIVE) * e.cost
        }
        Err(_) => FAILED,
    }
}

fn refine(problem: &TransitionProblem, layout: &Layout, start: (f64, f64, f64)) -> Candidate {
    let s = &problem.settings;
    let (arrival0, duration0, scale) = start;
    let tl = layout.time_len();
    let target_period = problem.target.period().unwrap_or(1.0);
    let mut steps = Vec::new();
    if layout.free_arrival {
        steps.push(0.05 * target_period);
    }
    if layout.free_duration {
        steps.push(0.1 * duration0);
    }
    match s.mode {
        ObjectiveMode::Penalty => {
            let guess = rate_guess(problem, arrival0, duration0)
                .component_div(&offset_scale(problem, duration0));
            let mut x0 = layout.pack_times(arrival0, duration0);
            x0.extend(guess.iter().map(|g| (scale - 1.0) * g));
            let n = problem.dim();
            for i in 0..layout.rates {
                let block = guess.rows((i / n) * n, n).amax();
                steps.push(0.05 * (guess[i].abs() + 0.5 * block) + 1e-3);
            }
            let best = nelder_mead(
                |x| penalty_objective(problem, layout, x),
                &x0,
                &steps,
                s.simplex_iterations,
            );
            let refined = least_squares(
                |x| penalty_residuals(problem, layout, x),
                &best.x,
                s.refine_patience,
            );
            let x = if penalty_objective(problem, layout, &refined) <= best.value {
                refined
            } else {
                best.x
            };
            let (arrival, duration, _) = layout.times(&x);
            let rates = offset_rates(problem, arrival, duration, &x[tl..]);
            let rates = polish(problem, arrival, duration, &rates, s.steps);
            finish(
                problem,
                DecisionVariables {
                    arrival_phase: arrival,
                    duration,
                    rates,
                },
            )
        }
        ObjectiveMode::Constraint => {
            let x0 = layout.pack_times(arrival0, duration0);
            let best = if x0.is_empty() {
                x0
            } else {
                nelder_mead(
                    |x| constraint_objective(problem, layout, x),
                    &x0,
                    &steps,
                    s.simplex_iterations,
                )
                .x
            };
            let (arrival, duration, _) = layout.times(&best);
            let coarse = constrained_rates(problem, arrival, duration, s.search_steps);
            let rates = polish(problem, arrival, duration, &coarse, s.steps);
            finish(
                problem,
                DecisionVariables {
                    arrival_phase: arrival,
                    duration,
                    rates,
                },
            )
        }
    }
}

fn grid_value(problem: &TransitionProblem, layout: &Layout, start: (f64, f64, f64)) -> f64 {
    let (arrival, duration, scale) = start;
    let mut x = layout.pack_times(arrival, duration);
    match problem.settings.mode {
        ObjectiveMode::Penalty => {
            let guess = rate_guess(problem, arrival, duration)
                .component_div(&offset_scale(problem, duration));
            x.extend(guess.iter().map(|g| (scale - 1.0) * g));
            penalty_objective(problem, layout, &x)
        }
        ObjectiveMode::Constraint => constraint_objective(problem, layout, &x),
    }
}

fn better(a: &Candidate, b: &Candidate) -> Ordering {
    let ea = a.outcome.as_ref().map(|e| e.cost).unwrap_or(f64::INFINITY);
    let eb = b.outcome.as_ref().map(|e| e.cost).unwrap_or(f64::INFINITY);
    ea.total_cmp(&eb)
        .then(a.decision.duration.total_cmp(&b.decision.duration))
}

/// Solves one transition problem. Failures are reported through
/// [`Solution::status`].
pub fn solve_transition(problem: &TransitionProblem) -> Result<Solution, ProblemError> {
    problem.validate()?;
    let layout = Layout::new(problem);
    let grid = initial_grid(problem, &layout);
    // scale 1 first so ties favour the flat-space guess
    let mut scored: Vec<(usize, f64)> = grid
        .par_iter()
        .enumerate()
        .map(|(i, start)| (i, grid_value(problem, &layout, *start)))
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let starts: Vec<(f64, f64, f64)> = scored
        .iter()
        .take(problem.settings.refine_starts.max(1))
        .map(|(i, _)| grid[*i])
        .collect();
    let candidates: Vec<Candidate> = starts
        .par_iter()
        .map(|start| refine(problem, &layout, *start))
        .collect();

    let chosen = {
        let converged = candidates
            .iter()
            .filter(|c| c.status == Status::Converged)
            .min_by(|a, b| better(a, b));
        match converged {
            Some(c) => c,
            None => {
                let limited = candidates
                    .iter()
                    .filter(|c| c.status == Status::LimitViolated)
                    .min_by(|a, b| better(a, b));
                limited.unwrap_or_else(|| {
                    candidates
                        .iter()
                        .min_by(|a, b| a.residual_norm().total_cmp(&b.residual_norm()))
                        .expect("at least one candidate")
                })
            }
        }
    };
    let n_res = match problem.variant {
        Variant::Path => problem.dim(),
        _ => 2 * problem.dim(),
    };
    Ok(match &chosen.outcome {
        Some(e) => Solution {
            variant: problem.variant,
            departure_phase: problem.departure_phase,
            decision: chosen.decision.clone(),
            trajectory: Some(e.trajectory.clone()),
            residual: e.residual.norm(),
            residual_vector: e.residual.clone(),
            cost: e.cost,
            status: chosen.status,
        },
        None => Solution {
            variant: problem.variant,
            departure_phase: problem.departure_phase,
            decision: chosen.decision.clone(),
            trajectory: None,
            residual: f64::INFINITY,
            residual_vector: DVector::from_element(n_res, f64::NAN),
            cost: f64::INFINITY,
            status: Status::Diverged,
        },
    })
}

/// Solves the problem from `count` equally spaced departure phases of the
/// source gait. Items are independent; results are in phase order.
pub fn sweep_transitions(
    problem: &TransitionProblem,
    count: usize,
) -> Result<Vec<Solution>, ProblemError> {
    problem.validate()?;
    problem
        .source
        .phase_points(count)
        .into_par_iter()
        .map(|(t0, _)| solve_transition(&problem.clone().with_departure_phase(t0)))
        .collect()
}
