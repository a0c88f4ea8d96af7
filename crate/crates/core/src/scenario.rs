//! Gait-switching scenarios: one source cycle (plus the lead-in up to the
//! departure phase), the transition, then one target cycle, with the body
//! pose, displacement and accumulated cost along the way.

use nalgebra::DVector;
use thiserror::Error;

use crate::gait::{CurveSample, Gait, ShapeCurve};
use crate::geometry::{christoffel, MetricField};
use crate::ode::Trajectory;
use crate::se2::{wrap_angle, Pose, PoseTrajectory};
use crate::solver::{Solution, Status, TransitionProblem, Variant};
use crate::swimmer::ConnectionField;

pub const DEFAULT_SAMPLES_PER_PERIOD: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("solution status is {0:?}; only converged transitions can be assembled")]
    NotConverged(Status),
    #[error("solution has a positive duration but no trajectory")]
    MissingTrajectory,
    #[error("scenarios need a two-joint shape space, got {0}")]
    UnsupportedDimension(usize),
    #[error("at least one sample per period is required")]
    NoSamples,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Segment {
    Source,
    Transition,
    Target,
}

impl Segment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Segment::Source => "source",
            Segment::Transition => "transition",
            Segment::Target => "target",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub variant: Variant,
    pub source: Gait,
    pub target: Gait,
    pub solution: Solution,
    pub samples_per_period: usize,
    /// Start and end of the transition on the scenario clock.
    pub junctions: [f64; 2],
    pub times: Vec<f64>,
    /// Segment of each sample; a junction sample belongs to the earlier
    /// segment.
    pub segments: Vec<Segment>,
    pub shape: Vec<CurveSample>,
    pub poses: Vec<Pose>,
    /// Accumulated body-frame forward translation in link lengths.
    pub forward: Vec<f64>,
    /// Unwrapped heading change in radians.
    pub turning: Vec<f64>,
    pub cost: Vec<f64>,
    /// Shape position mismatch across each junction.
    pub position_jumps: [f64; 2],
    /// Shape velocity mismatch across each junction.
    pub velocity_jumps: [f64; 2],
}

impl Scenario {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Net body displacement over the whole scenario.
    pub fn net_displacement(&self) -> Pose {
        self.poses[0].inverse().compose(self.poses.last().unwrap_or(&self.poses[0]))
    }

    pub fn total_cost(&self) -> f64 {
        self.cost.last().copied().unwrap_or(0.0)
    }
}

/// Forward and turning displacement series of an assembled scenario.
pub fn displacement_curves(scenario: &Scenario) -> (&[f64], &[f64]) {
    (&scenario.forward, &scenario.turning)
}

// quintic Hermite basis in monomial coefficients, order:
// p0, h·v0, h²·a0, h²·a1, h·v1, p1
const QUINTIC: [[f64; 6]; 6] = [
    [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
    [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
    [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
    [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
    [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
    [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
];

fn basis(s: f64) -> [[f64; 3]; 6] {
    let mut out = [[0.0; 3]; 6];
    for (b, c) in QUINTIC.iter().enumerate() {
        for k in (0..6).rev() {
            out[b][2] = out[b][2] * s + out[b][1] * 2.0;
            out[b][1] = out[b][1] * s + out[b][0];
            out[b][0] = out[b][0] * s + c[k];
        }
    }
    out
}

/// `C²` interpolation of a shot from its stored position, velocity and
/// acceleration samples.
fn interpolate(trajectory: &Trajectory, tau: f64) -> CurveSample {
    let last = trajectory.len() - 1;
    let duration = trajectory.duration();
    let h = duration / last as f64;
    let k = ((tau / h).floor() as usize).min(last - 1);
    let t0 = trajectory.times[k];
    let h = trajectory.times[k + 1] - t0;
    let s = ((tau - t0) / h).clamp(0.0, 1.0);
    let b = basis(s);
    let data = [
        (trajectory.position(k).into_owned(), 1.0),
        (trajectory.velocity(k).into_owned(), h),
        (trajectory.accelerations[k].clone(), h * h),
        (trajectory.accelerations[k + 1].clone(), h * h),
        (trajectory.velocity(k + 1).into_owned(), h),
        (trajectory.position(k + 1).into_owned(), 1.0),
    ];
    let n = trajectory.dim;
    let mut out = CurveSample {
        position: DVector::zeros(n),
        velocity: DVector::zeros(n),
        acceleration: DVector::zeros(n),
    };
    for (i, (v, scale)) in data.iter().enumerate() {
        out.position += v * (b[i][0] * scale);
        out.velocity += v * (b[i][1] * scale / h);
        out.acceleration += v * (b[i][2] * scale / (h * h));
    }
    out
}

struct Timeline<'a> {
    source: &'a Gait,
    target: &'a Gait,
    trajectory: Option<&'a Trajectory>,
    arrival: f64,
    junctions: [f64; 2],
}

impl Timeline<'_> {
    fn sample(&self, t: f64) -> CurveSample {
        let [j1, j2] = self.junctions;
        if t <= j1 {
            self.source.eval(t)
        } else if t <= j2 {
            match self.trajectory {
                Some(traj) => interpolate(traj, t - j1),
                None => self.source.eval(j1),
            }
        } else {
            self.target.eval(self.arrival + (t - j2))
        }
    }
}

/// Cost integrand of the variant on an arbitrary shape sample: `‖ṙ‖²_g`,
/// `‖∇_ṙ ṙ‖²_g` or `‖∇_ṙ ṙ‖²_h`.
pub fn curve_cost_integrand(problem: &TransitionProblem, sample: &CurveSample) -> f64 {
    let r = &sample.position;
    let v = &sample.velocity;
    if problem.variant == Variant::Path {
        return v.dot(&(problem.metric.metric_matrix(r) * v));
    }
    let a = match christoffel(problem.metric.as_ref(), r) {
        Ok(gamma) => &sample.acceleration + gamma.contract(v.as_slice(), v.as_slice()),
        Err(_) => return f64::INFINITY,
    };
    let weight = match problem.variant {
        Variant::Torque => problem.induced_field().metric_matrix(r),
        _ => problem.metric.metric_matrix(r),
    };
    a.dot(&(weight * &a))
}

fn segment_grid(start: f64, end: f64, dt: f64) -> Vec<f64> {
    let len = end - start;
    if len <= 0.0 {
        return Vec::new();
    }
    let n = ((len / dt) - 1e-9).ceil().max(1.0) as usize;
    (1..=n).map(|i| start + len * i as f64 / n as f64).collect()
}

/// Assembles source cycle → transition → target cycle.
///
/// The source gait runs from phase 0 through one full period and on to the
/// departure phase; the target gait runs one period from the arrival phase.
pub fn assemble_scenario(
    problem: &TransitionProblem,
    solution: &Solution,
    connection: &dyn ConnectionField,
    samples_per_period: usize,
) -> Result<Scenario, ScenarioError> {
    if solution.status != Status::Converged {
        return Err(ScenarioError::NotConverged(solution.status));
    }
    if problem.dim() != 2 {
        return Err(ScenarioError::UnsupportedDimension(problem.dim()));
    }
    if samples_per_period == 0 {
        return Err(ScenarioError::NoSamples);
    }
    let duration = solution.decision.duration.max(0.0);
    let trajectory = solution.trajectory.as_ref();
    if duration > 0.0 && trajectory.is_none() {
        return Err(ScenarioError::MissingTrajectory);
    }
    let source_period = problem.source.period().unwrap_or(1.0);
    let target_period = problem.target.period().unwrap_or(1.0);
    let j1 = source_period + solution.departure_phase;
    let j2 = j1 + duration;
    let end = j2 + target_period;
    let timeline = Timeline {
        source: &problem.source,
        target: &problem.target,
        trajectory,
        arrival: solution.decision.arrival_phase,
        junctions: [j1, j2],
    };

    let dt = source_period.min(target_period) / samples_per_period as f64;
    let mut times = vec![0.0];
    let mut segments = vec![Segment::Source];
    for (seg, lo, hi) in [
        (Segment::Source, 0.0, j1),
        (Segment::Transition, j1, j2),
        (Segment::Target, j2, end),
    ] {
        for t in segment_grid(lo, hi, dt) {
            times.push(t);
            segments.push(seg);
        }
    }

    let shape: Vec<CurveSample> = times.iter().map(|t| timeline.sample(*t)).collect();
    let integrand: Vec<f64> = shape.iter().map(|s| curve_cost_integrand(problem, s)).collect();
    let mut cost = Vec::with_capacity(times.len());
    cost.push(0.0);
    for i in 1..times.len() {
        let step = 0.5 * (integrand[i] + integrand[i - 1]) * (times[i] - times[i - 1]);
        cost.push(cost[i - 1] + step);
    }

    let xi = |t: f64| {
        let s = timeline.sample(t);
        connection
            .connection(&s.position)
            .body_velocity(s.velocity.as_slice())
    };
    let mut motion = PoseTrajectory::start(0.0, Pose::IDENTITY);
    for i in 1..times.len() {
        motion.step(&xi, times[i] - times[i - 1]);
        *motion.times.last_mut().unwrap() = times[i];
    }
    let unit = connection.length_unit();
    let forward: Vec<f64> = motion.forward.iter().map(|f| f / unit).collect();
    let mut turning = Vec::with_capacity(times.len());
    turning.push(0.0);
    for i in 1..motion.poses.len() {
        let dtheta = wrap_angle(motion.poses[i].theta - motion.poses[i - 1].theta);
        turning.push(turning[i - 1] + dtheta);
    }

    let (position_jumps, velocity_jumps) = match trajectory {
        Some(traj) if duration > 0.0 => {
            let depart = problem.source.eval(j1);
            let arrive = problem.target.eval(solution.decision.arrival_phase);
            let last = traj.len() - 1;
            (
                [
                    (traj.position(0) - &depart.position).norm(),
                    (traj.position(last) - &arrive.position).norm(),
                ],
                [
                    (traj.velocity(0) - &depart.velocity).norm(),
                    (traj.velocity(last) - &arrive.velocity).norm(),
                ],
            )
        }
        _ => {
            let depart = problem.source.eval(j1);
            let arrive = problem.target.eval(solution.decision.arrival_phase);
            let dp = (&depart.position - &arrive.position).norm();
            let dv = (&depart.velocity - &arrive.velocity).norm();
            ([dp, dp], [dv, dv])
        }
    };

    Ok(Scenario {
        variant: problem.variant,
        source: problem.source.clone(),
        target: problem.target.clone(),
        solution: solution.clone(),
        samples_per_period,
        junctions: [j1, j2],
        times,
        segments,
        shape,
        poses: motion.poses,
        forward,
        turning,
        cost,
        position_jumps,
        velocity_jumps,
    })
}
