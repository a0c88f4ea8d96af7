//! Planar rigid motions and body-velocity integration.

use std::f64::consts::PI;

/// Body-frame velocity `(ξx, ξy, ξθ)`.
pub type Twist = [f64; 3];

/// Planar pose of the body frame in the world frame.
///
/// `theta` accumulates continuously under composition; use
/// [`Pose::wrapped_heading`] for reporting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        let (s, c) = self.theta.sin_cos();
        Pose {
            x: self.x + c * other.x - s * other.y,
            y: self.y + s * other.x + c * other.y,
            theta: self.theta + other.theta,
        }
    }

    pub fn inverse(&self) -> Pose {
        let (s, c) = self.theta.sin_cos();
        Pose {
            x: -(c * self.x + s * self.y),
            y: -(-s * self.x + c * self.y),
            theta: -self.theta,
        }
    }

    /// Group exponential of a twist applied for unit time.
    pub fn exp(xi: Twist) -> Pose {
        let [vx, vy, w] = xi;
        let (a, b) = if w.abs() < 1e-6 {
            let w2 = w * w;
            (1.0 - w2 / 6.0, w / 2.0 - w * w2 / 24.0)
        } else {
            (w.sin() / w, (1.0 - w.cos()) / w)
        };
        Pose {
            x: a * vx - b * vy,
            y: b * vx + a * vy,
            theta: w,
        }
    }

    /// Heading wrapped to `(−π, π]`.
    pub fn wrapped_heading(&self) -> f64 {
        wrap_angle(self.theta)
    }

    /// Translation distance plus wrapped heading difference.
    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y) + wrap_angle(self.theta - other.theta).abs()
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Lie bracket on se(2).
pub fn bracket(a: Twist, b: Twist) -> Twist {
    // [(v1, ω1), (v2, ω2)] = (ω1 J v2 − ω2 J v1, 0), J the quarter turn
    [
        -a[2] * b[1] + b[2] * a[1],
        a[2] * b[0] - b[2] * a[0],
        0.0,
    ]
}

/// Poses sampled on a uniform grid together with the accumulated body-frame
/// forward translation `∫ ξx dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseTrajectory {
    pub times: Vec<f64>,
    pub poses: Vec<Pose>,
    pub forward: Vec<f64>,
}

impl PoseTrajectory {
    pub fn start(t0: f64, pose: Pose) -> Self {
        Self {
            times: vec![t0],
            poses: vec![pose],
            forward: vec![0.0],
        }
    }

    pub fn net(&self) -> Pose {
        let first = self.poses[0];
        first.inverse().compose(self.poses.last().unwrap_or(&first))
    }

    /// Appends one step of `ġ = g ξ̂` over `[t, t + h]` using the two-point
    /// Gauss fourth-order Magnus scheme.
    pub fn step<F: Fn(f64) -> Twist>(&mut self, xi: &F, h: f64) {
        const C: f64 = 0.288_675_134_594_812_9; // √3/6
        let t = *self.times.last().expect("non-empty trajectory");
        let a1 = xi(t + (0.5 - C) * h);
        let a2 = xi(t + (0.5 + C) * h);
        let comm = bracket(a1, a2);
        let k = 3f64.sqrt() / 12.0 * h * h;
        let omega = [
            0.5 * h * (a1[0] + a2[0]) + k * comm[0],
            0.5 * h * (a1[1] + a2[1]) + k * comm[1],
            0.5 * h * (a1[2] + a2[2]) + k * comm[2],
        ];
        let pose = self.poses.last().unwrap().compose(&Pose::exp(omega));
        let fwd = self.forward.last().unwrap() + 0.5 * h * (a1[0] + a2[0]);
        self.times.push(t + h);
        self.poses.push(pose);
        self.forward.push(fwd);
    }
}

/// Integrates `ġ = g ξ̂(t)` from the identity over `[t0, t1]` in `steps`
/// uniform steps.
pub fn integrate_body_velocity<F: Fn(f64) -> Twist>(
    xi: F,
    t0: f64,
    t1: f64,
    steps: usize,
) -> PoseTrajectory {
    let steps = steps.max(1);
    let h = (t1 - t0) / steps as f64;
    let mut out = PoseTrajectory::start(t0, Pose::IDENTITY);
    for i in 0..steps {
        out.step(&xi, h);
        // keep the grid exact instead of accumulating rounding
        *out.times.last_mut().unwrap() = t0 + (i + 1) as f64 * h;
    }
    out
}
