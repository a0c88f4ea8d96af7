//! Fixed-step shooting of first-order systems on the tangent bundle.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DVector, DVectorView};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;

/// Any state component beyond this magnitude aborts a shot.
pub const DIVERGENCE_BOUND: f64 = 1e6;
/// Fewest steps accepted by [`integrate_shot`].
pub const MIN_STEPS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShotError {
    #[error("shot diverged at t = {time}")]
    Diverged { time: f64 },
    #[error("joint or acceleration limit violated at t = {time}")]
    LimitViolated { time: f64 },
    #[error("invalid shot request: {0}")]
    Invalid(String),
}

/// Right-hand side of a shooting ODE. The state always starts with the
/// position and velocity blocks `(γ, γ̇)`, each of length [`Self::dim`].
pub trait ShotDynamics: Sync {
    fn dim(&self) -> usize;
    fn state_len(&self) -> usize;
    fn derivative(&self, state: &DVector<f64>) -> Result<DVector<f64>, GeometryError>;
}

/// Box joint limits and a per-joint bound on raw joint acceleration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    pub joint_lower: Vec<f64>,
    pub joint_upper: Vec<f64>,
    pub accel_max: f64,
}

impl Limits {
    pub fn symmetric(n: usize, joint: f64, accel_max: f64) -> Self {
        Self {
            joint_lower: vec![-joint; n],
            joint_upper: vec![joint; n],
            accel_max,
        }
    }

    /// ±π/2 per joint and 50 rad/s².
    pub fn default_for(n: usize) -> Self {
        Self::symmetric(n, FRAC_PI_2, 50.0)
    }

    pub fn unbounded(n: usize) -> Self {
        Self::symmetric(n, f64::INFINITY, f64::INFINITY)
    }

    pub fn is_well_ordered(&self) -> bool {
        self.joint_lower.len() == self.joint_upper.len()
            && self
                .joint_lower
                .iter()
                .zip(&self.joint_upper)
                .all(|(lo, hi)| lo < hi)
            && self.accel_max > 0.0
    }

    pub fn admits(&self, r: &[f64], rddot: &[f64]) -> bool {
        r.iter()
            .zip(self.joint_lower.iter().zip(&self.joint_upper))
            .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
            && rddot.iter().all(|a| a.abs() <= self.accel_max)
    }

    /// Time of the first sample outside the limits.
    pub fn first_violation(&self, traj: &Trajectory) -> Option<f64> {
        (0..traj.len())
            .find(|&i| {
                !self.admits(
                    traj.position(i).as_slice(),
                    traj.accelerations[i].as_slice(),
                )
            })
            .map(|i| traj.times[i])
    }
}

/// Uniformly sampled shot: full states plus the raw acceleration `γ̈` at
/// every sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub accelerations: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }

    pub fn position(&self, i: usize) -> DVectorView<'_, f64> {
        self.states[i].rows(0, self.dim)
    }

    pub fn velocity(&self, i: usize) -> DVectorView<'_, f64> {
        self.states[i].rows(self.dim, self.dim)
    }

    /// Spline co-state blocks after `(γ, γ̇)`; empty for geodesic shots.
    pub fn auxiliary(&self, i: usize) -> DVectorView<'_, f64> {
        let len = self.states[i].len();
        self.states[i].rows(2 * self.dim, len - 2 * self.dim)
    }

    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().expect("non-empty trajectory")
    }
}

fn check_state(state: &DVector<f64>, time: f64) -> Result<(), ShotError> {
    if state.iter().all(|x| x.is_finite() && x.abs() <= DIVERGENCE_BOUND) {
        Ok(())
    } else {
        Err(ShotError::Diverged { time })
    }
}

/// Classical fourth-order Runge–Kutta with `steps` uniform steps over
/// `[0, duration]`. With `limits`, the shot stops at the first sample that
/// leaves them.
pub fn integrate_shot(
    dynamics: &dyn ShotDynamics,
    initial: DVector<f64>,
    duration: f64,
    steps: usize,
    limits: Option<&Limits>,
) -> Result<Trajectory, ShotError> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(ShotError::Invalid(format!("duration must be positive, got {duration}")));
    }
    if steps < MIN_STEPS {
        return Err(ShotError::Invalid(format!("at least {MIN_STEPS} steps required, got {steps}")));
    }
    if initial.len() != dynamics.state_len() {
        return Err(ShotError::Invalid(format!(
            "state length {} does not match dynamics ({})",
            initial.len(),
            dynamics.state_len()
        )));
    }
    let n = dynamics.dim();
    let h = duration / steps as f64;
    let eval = |state: &DVector<f64>, time: f64| {
        dynamics
            .derivative(state)
            .map_err(|_| ShotError::Diverged { time })
    };
    let accept = |state: &DVector<f64>, deriv: &DVector<f64>, time: f64| {
        check_state(state, time)?;
        check_state(deriv, time)?;
        if let Some(lim) = limits {
            let r = state.rows(0, n);
            let a = deriv.rows(n, n);
            if !lim.admits(r.as_slice(), a.as_slice()) {
                return Err(ShotError::LimitViolated { time });
            }
        }
        Ok(())
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut accelerations = Vec::with_capacity(steps + 1);

    check_state(&initial, 0.0)?;
    let mut state = initial;
    let mut k1 = eval(&state, 0.0)?;
    accept(&state, &k1, 0.0)?;
    for i in 0..steps {
        let t = i as f64 * h;
        times.push(t);
        accelerations.push(k1.rows(n, n).into_owned());
        let k2 = eval(&(&state + &k1 * (0.5 * h)), t)?;
        let k3 = eval(&(&state + &k2 * (0.5 * h)), t)?;
        let k4 = eval(&(&state + &k3 * h), t)?;
        let next = &state + (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0);
        states.push(state);
        state = next;
        let t_next = (i + 1) as f64 * h;
        check_state(&state, t_next)?;
        k1 = eval(&state, t_next)?;
        accept(&state, &k1, t_next)?;
    }
    times.push(duration);
    accelerations.push(k1.rows(n, n).into_owned());
    states.push(state);
    Ok(Trajectory {
        dim: n,
        times,
        states,
        accelerations,
    })
}
