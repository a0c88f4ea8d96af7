//! Periodic shape-space curves.

use std::f64::consts::PI;

use nalgebra::DVector;
use thiserror::Error;

/// Position, velocity and acceleration of a curve at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSample {
    pub position: DVector<f64>,
    pub velocity: DVector<f64>,
    pub acceleration: DVector<f64>,
}

/// Anything that can be evaluated as a twice-differentiable shape curve.
pub trait ShapeCurve: Send + Sync {
    fn dim(&self) -> usize;
    fn sample(&self, t: f64) -> CurveSample;
    /// Period for closed curves.
    fn period(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaitError {
    #[error("gait period must be positive and finite, got {0}")]
    BadPeriod(f64),
    #[error("gait needs at least one joint")]
    NoJoints,
    #[error("joint {joint}: expected [a0, a1, b1, ...] with an odd number of coefficients, got {len}")]
    BadCoefficients { joint: usize, len: usize },
    #[error("line gait origin and velocity differ in dimension")]
    LineDimension,
    #[error("non-finite gait coefficient")]
    NonFinite,
}

/// Default truncation order of the Fourier series.
pub const DEFAULT_ORDER: usize = 4;

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    /// Per joint: `a0`, then `(a_k, b_k)` for `k = 1..=K`.
    Fourier {
        period: f64,
        a0: Vec<f64>,
        cos: Vec<Vec<f64>>,
        sin: Vec<Vec<f64>>,
    },
    /// `origin + velocity · t`, used for flat-space checks.
    Line {
        origin: Vec<f64>,
        velocity: Vec<f64>,
    },
}

/// A shape-space gait: a truncated Fourier series per joint, exactly
/// periodic in time. A straight-line, aperiodic variant exists for
/// flat-space test problems.
#[derive(Clone, Debug, PartialEq)]
pub struct Gait {
    label: String,
    shape: Shape,
}

impl Gait {
    /// `joints[j] = [a0, a1, b1, a2, b2, ...]` for
    /// `r_j(t) = a0 + Σ a_k cos(kωt) + b_k sin(kωt)`, `ω = 2π/period`.
    pub fn fourier(
        label: impl Into<String>,
        period: f64,
        joints: &[Vec<f64>],
    ) -> Result<Self, GaitError> {
        if !(period.is_finite() && period > 0.0) {
            return Err(GaitError::BadPeriod(period));
        }
        if joints.is_empty() {
            return Err(GaitError::NoJoints);
        }
        let mut order = DEFAULT_ORDER;
        for (j, c) in joints.iter().enumerate() {
            if c.len() % 2 == 0 {
                return Err(GaitError::BadCoefficients { joint: j, len: c.len() });
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(GaitError::NonFinite);
            }
            order = order.max((c.len() - 1) / 2);
        }
        let n = joints.len();
        let coef = |j: usize, idx: usize| joints[j].get(idx).copied().unwrap_or(0.0);
        let a0 = (0..n).map(|j| coef(j, 0)).collect();
        let cos = (1..=order)
            .map(|k| (0..n).map(|j| coef(j, 2 * k - 1)).collect())
            .collect();
        let sin = (1..=order)
            .map(|k| (0..n).map(|j| coef(j, 2 * k)).collect())
            .collect();
        Ok(Self {
            label: label.into(),
            shape: Shape::Fourier {
                period,
                a0,
                cos,
                sin,
            },
        })
    }

    /// Circle of `radius` about `center` in the first two joints, starting
    /// at `center + (radius, 0)`.
    pub fn circle(
        label: impl Into<String>,
        center: [f64; 2],
        radius: f64,
        period: f64,
        clockwise: bool,
    ) -> Result<Self, GaitError> {
        let turn = if clockwise { -1.0 } else { 1.0 };
        Self::fourier(
            label,
            period,
            &[
                vec![center[0], radius, 0.0],
                vec![center[1], 0.0, turn * radius],
            ],
        )
    }

    /// A gait that holds one shape.
    pub fn stationary(label: impl Into<String>, point: &[f64], period: f64) -> Result<Self, GaitError> {
        let joints: Vec<Vec<f64>> = point.iter().map(|p| vec![*p]).collect();
        Self::fourier(label, period, &joints)
    }

    pub fn line(
        label: impl Into<String>,
        origin: &[f64],
        velocity: &[f64],
    ) -> Result<Self, GaitError> {
        if origin.len() != velocity.len() {
            return Err(GaitError::LineDimension);
        }
        if origin.is_empty() {
            return Err(GaitError::NoJoints);
        }
        if origin.iter().chain(velocity).any(|x| !x.is_finite()) {
            return Err(GaitError::NonFinite);
        }
        Ok(Self {
            label: label.into(),
            shape: Shape::Line {
                origin: origin.to_vec(),
                velocity: velocity.to_vec(),
            },
        })
    }

    /// The shipped forward gait: clockwise circle of radius 0.8 rad about
    /// the origin, period 1 s.
    pub fn default_forward() -> Self {
        Self::circle("forward", [0.0, 0.0], 0.8, 1.0, true).expect("valid default gait")
    }

    /// The shipped turning gait: clockwise circle of radius 0.6 rad about
    /// (0.6, 0.6), period 1 s.
    pub fn default_turning() -> Self {
        Self::circle("turning", [0.6, 0.6], 0.6, 1.0, true).expect("valid default gait")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Fourier coefficients in the `[a0, a1, b1, ...]` layout, one row per
    /// joint. `None` for line gaits.
    pub fn coefficients(&self) -> Option<Vec<Vec<f64>>> {
        match &self.shape {
            Shape::Fourier { a0, cos, sin, .. } => Some(
                (0..a0.len())
                    .map(|j| {
                        let mut row = vec![a0[j]];
                        for k in 0..cos.len() {
                            row.push(cos[k][j]);
                            row.push(sin[k][j]);
                        }
                        row
                    })
                    .collect(),
            ),
            Shape::Line { .. } => None,
        }
    }

    /// `(r, ṙ, r̈)` at time `t`.
    pub fn eval(&self, t: f64) -> CurveSample {
        match &self.shape {
            Shape::Fourier {
                period,
                a0,
                cos,
                sin,
            } => {
                let n = a0.len();
                let phase = t / period;
                let whole = phase.round();
                // whole periods land exactly on the start of the curve
                let frac = if (phase - whole).abs() <= 4.0 * f64::EPSILON * whole.abs().max(1.0) {
                    0.0
                } else {
                    phase - phase.floor()
                };
                let omega = 2.0 * PI / period;
                let mut r = DVector::from_column_slice(a0);
                let mut v = DVector::zeros(n);
                let mut a = DVector::zeros(n);
                for k in 0..cos.len() {
                    let kf = (k + 1) as f64;
                    let (s, c) = (2.0 * PI * kf * frac).sin_cos();
                    let w = kf * omega;
                    for j in 0..n {
                        let (ak, bk) = (cos[k][j], sin[k][j]);
                        r[j] += ak * c + bk * s;
                        v[j] += w * (-ak * s + bk * c);
                        a[j] -= w * w * (ak * c + bk * s);
                    }
                }
                CurveSample {
                    position: r,
                    velocity: v,
                    acceleration: a,
                }
            }
            Shape::Line { origin, velocity } => {
                let o = DVector::from_column_slice(origin);
                let v = DVector::from_column_slice(velocity);
                CurveSample {
                    position: &o + &v * t,
                    acceleration: DVector::zeros(v.len()),
                    velocity: v,
                }
            }
        }
    }

    /// `count` equally spaced phases `k·T/count` and the shapes there.
    pub fn phase_points(&self, count: usize) -> Vec<(f64, DVector<f64>)> {
        let count = count.max(1);
        let period = self.period().unwrap_or(1.0);
        (0..count)
            .map(|k| {
                let t = period * k as f64 / count as f64;
                (t, self.eval(t).position)
            })
            .collect()
    }

    /// Euclidean distance from `point` to the curve over one period, by dense
    /// sampling, together with the phase that attains it.
    pub fn nearest_phase(&self, point: &DVector<f64>, samples: usize) -> (f64, f64) {
        let period = self.period().unwrap_or(1.0);
        let samples = samples.max(1);
        let mut best = (0.0, f64::INFINITY);
        for k in 0..samples {
            let t = period * k as f64 / samples as f64;
            let d = (self.eval(t).position - point).norm();
            if d < best.1 {
                best = (t, d);
            }
        }
        best
    }
}

impl ShapeCurve for Gait {
    fn dim(&self) -> usize {
        match &self.shape {
            Shape::Fourier { a0, .. } => a0.len(),
            Shape::Line { origin, .. } => origin.len(),
        }
    }

    fn sample(&self, t: f64) -> CurveSample {
        self.eval(t)
    }

    fn period(&self) -> Option<f64> {
        match &self.shape {
            Shape::Fourier { period, .. } => Some(*period),
            Shape::Line { .. } => None,
        }
    }
}

/// `gait_phase_points` as a free function.
pub fn gait_phase_points(gait: &Gait, count: usize) -> Vec<(f64, DVector<f64>)> {
    gait.phase_points(count)
}
