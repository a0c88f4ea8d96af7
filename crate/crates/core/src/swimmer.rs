//! Planar three-link swimmers.
//!
//! The middle link carries the body frame. Joint angle `α1` rotates the rear
//! link and `α2` the front link, both measured so that `α1 = α2 > 0` curls
//! the two outer links to the same side (the "C" shape).
//!
//! Both fluid models are built the same way: a per-link quadratic form in
//! the link's own frame (resistive drag, or rigid plus added inertia) is
//! pulled back through the link Jacobians into a 5×5 tensor over
//! `(ξx, ξy, ξθ, α̇1, α̇2)`, then the body velocity is eliminated with a
//! Schur complement. That yields the local connection `A(r)` with
//! `ξ = −A(r) ṙ` and the reduced shape-space metric.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Matrix3x2, Matrix5, SMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::ShapeCurve;
use crate::geometry::{MetricField, MetricTensor};
use crate::se2::{integrate_body_velocity, PoseTrajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid swimmer parameter: {0}")]
    InvalidParams(String),
    #[error("body block of the full tensor is singular at r = ({0}, {1})")]
    SingularBody(f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwimmerParams {
    /// Length of each link.
    pub link_length: f64,
    /// Link width; one tenth of the length unless overridden.
    pub link_width: f64,
    /// Longitudinal drag per unit length per unit speed.
    pub drag_coefficient: f64,
    /// Lateral to longitudinal drag ratio.
    pub drag_ratio: f64,
    pub fluid_density: f64,
    /// Link mass per unit area.
    pub link_density: f64,
}

impl Default for SwimmerParams {
    fn default() -> Self {
        Self {
            link_length: 1.0,
            link_width: 0.1,
            drag_coefficient: 1.0,
            drag_ratio: 2.0,
            fluid_density: 1.0,
            link_density: 1.0,
        }
    }
}

impl SwimmerParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("link_length", self.link_length),
            ("link_width", self.link_width),
            ("drag_coefficient", self.drag_coefficient),
            ("fluid_density", self.fluid_density),
            ("link_density", self.link_density),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParams(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.drag_ratio.is_finite() && self.drag_ratio > 1.0) {
            return Err(ModelError::InvalidParams(format!(
                "drag_ratio must exceed 1, got {}",
                self.drag_ratio
            )));
        }
        Ok(())
    }

    fn drag_matrix(&self) -> Matrix3<f64> {
        let (l, c, k) = (self.link_length, self.drag_coefficient, self.drag_ratio);
        Matrix3::from_diagonal(&Vector3::new(c * l, k * c * l, k * c * l.powi(3) / 12.0))
    }

    fn inertia_matrix(&self) -> Matrix3<f64> {
        let a = 0.5 * self.link_length;
        let b = 0.5 * self.link_width;
        let rho = self.fluid_density;
        let mass = self.link_density * PI * a * b;
        let inertia = mass * (a * a + b * b) / 4.0;
        let lateral_added = rho * PI * a * a;
        let rotational_added = rho * PI * (a * a - b * b).powi(2) / 8.0;
        Matrix3::from_diagonal(&Vector3::new(
            mass,
            mass + lateral_added,
            inertia + rotational_added,
        ))
    }
}

/// Pose of one link's center in the body frame, and the Jacobian from
/// `(ξ, ṙ)` to that link's planar velocity `(vx, vy, ω)` in the body frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkState {
    pub position: Vector2<f64>,
    pub angle: f64,
    pub jacobian: SMatrix<f64, 3, 5>,
}

impl LinkState {
    /// Jacobian to `(longitudinal, lateral, angular)` velocity in the link's
    /// own frame.
    pub fn link_frame_jacobian(&self) -> SMatrix<f64, 3, 5> {
        let (s, c) = self.angle.sin_cos();
        let rot_t = Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0);
        rot_t * self.jacobian
    }
}

/// Rear, middle and front link states for shape `r = (α1, α2)`.
pub fn link_kinematics(params: &SwimmerParams, r: [f64; 2]) -> [LinkState; 3] {
    let half = 0.5 * params.link_length;
    let (s1, c1) = r[0].sin_cos();
    let (s2, c2) = r[1].sin_cos();

    let link = |position: Vector2<f64>, angle: f64, dp: [Vector2<f64>; 2], dtheta: [f64; 2]| {
        let mut j = SMatrix::<f64, 3, 5>::zeros();
        j[(0, 0)] = 1.0;
        j[(1, 1)] = 1.0;
        j[(0, 2)] = -position.y;
        j[(1, 2)] = position.x;
        j[(2, 2)] = 1.0;
        for s in 0..2 {
            j[(0, 3 + s)] = dp[s].x;
            j[(1, 3 + s)] = dp[s].y;
            j[(2, 3 + s)] = dtheta[s];
        }
        LinkState {
            position,
            angle,
            jacobian: j,
        }
    };

    let zero = Vector2::zeros();
    let rear = link(
        Vector2::new(-half - half * c1, half * s1),
        -r[0],
        [Vector2::new(half * s1, half * c1), zero],
        [-1.0, 0.0],
    );
    let middle = link(zero, 0.0, [zero, zero], [0.0, 0.0]);
    let front = link(
        Vector2::new(half + half * c2, half * s2),
        r[1],
        [zero, Vector2::new(-half * s2, half * c2)],
        [0.0, 1.0],
    );
    [rear, middle, front]
}

fn pull_back(links: &[LinkState; 3], per_link: &Matrix3<f64>) -> Matrix5<f64> {
    let mut full = Matrix5::zeros();
    for l in links {
        let j = l.link_frame_jacobian();
        full += j.transpose() * per_link * j;
    }
    (full + full.transpose()) * 0.5
}

/// Dissipation tensor over `(ξ, ṙ)` from resistive-force drag on each link.
pub fn full_drag_tensor(params: &SwimmerParams, r: [f64; 2]) -> Matrix5<f64> {
    pull_back(&link_kinematics(params, r), &params.drag_matrix())
}

/// Kinetic-energy tensor over `(ξ, ṙ)` from link inertia plus added mass.
pub fn full_mass_tensor(params: &SwimmerParams, r: [f64; 2]) -> Matrix5<f64> {
    pull_back(&link_kinematics(params, r), &params.inertia_matrix())
}

/// Linear map from shape velocity to (negated) body velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalConnection(pub Matrix3x2<f64>);

impl LocalConnection {
    pub fn zero() -> Self {
        Self(Matrix3x2::zeros())
    }

    /// `ξ = −A ṙ`.
    pub fn body_velocity(&self, rdot: &[f64]) -> [f64; 3] {
        let xi = -(self.0 * Vector2::new(rdot[0], rdot[1]));
        [xi[0], xi[1], xi[2]]
    }
}

/// Eliminates the body block: `A = Dbb⁻¹ Dbs`, `D = Dss − Dsb A`.
pub fn schur_reduce(full: &Matrix5<f64>) -> Option<(LocalConnection, Matrix2<f64>)> {
    let bb: Matrix3<f64> = full.fixed_view::<3, 3>(0, 0).into_owned();
    let bs: Matrix3x2<f64> = full.fixed_view::<3, 2>(0, 3).into_owned();
    let ss: Matrix2<f64> = full.fixed_view::<2, 2>(3, 3).into_owned();
    let chol = bb.cholesky()?;
    let a = chol.solve(&bs);
    let reduced = ss - bs.transpose() * a;
    Some((LocalConnection(a), (reduced + reduced.transpose()) * 0.5))
}

fn reduce_with(
    full: Matrix5<f64>,
    r: [f64; 2],
) -> Result<(LocalConnection, MetricTensor), ModelError> {
    let (a, d) = schur_reduce(&full).ok_or(ModelError::SingularBody(r[0], r[1]))?;
    let m = MetricTensor::new(DMatrix::from_column_slice(2, 2, d.as_slice()))
        .map_err(|_| ModelError::SingularBody(r[0], r[1]))?;
    Ok((a, m))
}

/// Local connection and drag metric `D(r)` of the viscous swimmer.
pub fn reduce_drag(
    params: &SwimmerParams,
    r: [f64; 2],
) -> Result<(LocalConnection, MetricTensor), ModelError> {
    reduce_with(full_drag_tensor(params, r), r)
}

/// Local connection and mass metric `M(r)` of the perfect-fluid swimmer.
pub fn reduce_mass(
    params: &SwimmerParams,
    r: [f64; 2],
) -> Result<(LocalConnection, MetricTensor), ModelError> {
    reduce_with(full_mass_tensor(params, r), r)
}

/// Source of body velocities for pose reconstruction.
pub trait ConnectionField: Send + Sync {
    fn connection(&self, r: &DVector<f64>) -> LocalConnection;

    /// Length used to report displacements in body lengths.
    fn length_unit(&self) -> f64 {
        1.0
    }
}

/// A system without body motion.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroConnection;

impl ConnectionField for ZeroConnection {
    fn connection(&self, _r: &DVector<f64>) -> LocalConnection {
        LocalConnection::zero()
    }
}

fn shape_arg(r: &DVector<f64>) -> [f64; 2] {
    [r[0], r[1]]
}

fn matrix2_to_dmatrix(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 2, m.as_slice())
}

macro_rules! swimmer_field {
    ($name:ident, $full:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            params: SwimmerParams,
        }

        impl $name {
            pub fn new(params: SwimmerParams) -> Result<Self, ModelError> {
                params.validate()?;
                Ok(Self { params })
            }

            pub fn params(&self) -> &SwimmerParams {
                &self.params
            }
        }

        impl MetricField for $name {
            fn dim(&self) -> usize {
                2
            }

            fn metric_matrix(&self, r: &DVector<f64>) -> DMatrix<f64> {
                match schur_reduce(&$full(&self.params, shape_arg(r))) {
                    Some((_, m)) => matrix2_to_dmatrix(&m),
                    None => DMatrix::from_element(2, 2, f64::NAN),
                }
            }
        }

        impl ConnectionField for $name {
            fn connection(&self, r: &DVector<f64>) -> LocalConnection {
                schur_reduce(&$full(&self.params, shape_arg(r)))
                    .map(|(a, _)| a)
                    .unwrap_or_else(|| LocalConnection(Matrix3x2::from_element(f64::NAN)))
            }

            fn length_unit(&self) -> f64 {
                self.params.link_length
            }
        }
    };
}

swimmer_field!(
    DragMetric,
    full_drag_tensor,
    "Drag metric `D(r)` and connection of the viscous (low Reynolds number) swimmer."
);
swimmer_field!(
    MassMetric,
    full_mass_tensor,
    "Mass metric `M(r)` and connection of the perfect-fluid swimmer."
);

/// Integrates the body pose along a shape curve over `[t0, t1]`.
pub fn reconstruct_pose(
    connection: &dyn ConnectionField,
    curve: &dyn ShapeCurve,
    t0: f64,
    t1: f64,
    steps: usize,
) -> PoseTrajectory {
    integrate_body_velocity(
        |t| {
            let s = curve.sample(t);
            connection
                .connection(&s.position)
                .body_velocity(s.velocity.as_slice())
        },
        t0,
        t1,
        steps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait::{CurveSample, Gait};
    use crate::se2::Pose;

    fn p() -> SwimmerParams {
        SwimmerParams::default()
    }

    #[test]
    fn straight_configuration() {
        let links = link_kinematics(&p(), [0.0, 0.0]);
        let xs: Vec<f64> = links.iter().map(|l| l.position.x).collect();
        assert_eq!(xs, vec![-1.0, 0.0, 1.0]);
        assert!(links.iter().all(|l| l.position.y == 0.0 && l.angle == 0.0));
    }

    #[test]
    fn mirrored_shapes_mirror_links() {
        let a = link_kinematics(&p(), [0.4, 0.4]);
        let b = link_kinematics(&p(), [-0.4, -0.4]);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.position.x, y.position.x);
            assert_eq!(x.position.y, -y.position.y);
            assert_eq!(x.angle, -y.angle);
        }
        // C shape: both outer links on the same side
        assert!(a[0].position.y > 0.0 && a[2].position.y > 0.0);
    }

    #[test]
    fn shape_jacobian_matches_finite_differences() {
        let r = [0.3, -0.7];
        let h = 1e-6;
        let base = link_kinematics(&p(), r);
        for s in 0..2 {
            let mut rp = r;
            let mut rm = r;
            rp[s] += h;
            rm[s] -= h;
            let plus = link_kinematics(&p(), rp);
            let minus = link_kinematics(&p(), rm);
            for i in 0..3 {
                let dp = (plus[i].position - minus[i].position) / (2.0 * h);
                let dth = (plus[i].angle - minus[i].angle) / (2.0 * h);
                assert!((dp.x - base[i].jacobian[(0, 3 + s)]).abs() < 1e-6);
                assert!((dp.y - base[i].jacobian[(1, 3 + s)]).abs() < 1e-6);
                assert!((dth - base[i].jacobian[(2, 3 + s)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn body_jacobian_matches_frame_motion() {
        // Moving the body frame by exp(h ξ) moves each link center rigidly.
        let r = [0.5, 0.2];
        let links = link_kinematics(&p(), r);
        let h = 1e-6;
        for (col, xi) in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].iter().enumerate() {
            let plus = Pose::exp([h * xi[0], h * xi[1], h * xi[2]]);
            let minus = Pose::exp([-h * xi[0], -h * xi[1], -h * xi[2]]);
            for l in &links {
                let local = Pose::new(l.position.x, l.position.y, l.angle);
                let a = plus.compose(&local);
                let b = minus.compose(&local);
                let v = [(a.x - b.x) / (2.0 * h), (a.y - b.y) / (2.0 * h), (a.theta - b.theta) / (2.0 * h)];
                for row in 0..3 {
                    assert!((v[row] - l.jacobian[(row, col)]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn straight_swimmer_decouples_forward_motion_from_symmetric_bending() {
        let d = full_drag_tensor(&p(), [0.0, 0.0]);
        // (1, 1) bending pushes laterally only, never along x
        assert!((d[(0, 3)] + d[(0, 4)]).abs() < 1e-14);
        assert!(d[(0, 1)].abs() < 1e-14 && d[(0, 2)].abs() < 1e-14);
    }

    #[test]
    fn relabeling_symmetry_of_full_and_reduced_tensors() {
        let mut sign = Matrix5::zeros();
        sign[(0, 0)] = -1.0;
        sign[(1, 1)] = 1.0;
        sign[(2, 2)] = -1.0;
        sign[(3, 4)] = 1.0;
        sign[(4, 3)] = 1.0;
        let swap = Matrix2::new(0.0, 1.0, 1.0, 0.0);
        for r in [[0.3, -0.9], [1.1, 0.2], [-0.5, -1.2]] {
            let flipped = [r[1], r[0]];
            for full in [full_drag_tensor, full_mass_tensor] {
                let lhs = full(&p(), r);
                let rhs = sign.transpose() * full(&p(), flipped) * sign;
                assert!((lhs - rhs).amax() < 1e-10 * lhs.amax());
                let (_, d1) = schur_reduce(&lhs).unwrap();
                let (_, d2) = schur_reduce(&full(&p(), flipped)).unwrap();
                assert!((d1 - swap.transpose() * d2 * swap).amax() < 1e-10 * d1.amax());
            }
        }
    }

    #[test]
    fn symmetric_bending_costs_more_than_antisymmetric() {
        let (_, d) = reduce_drag(&p(), [0.0, 0.0]).unwrap();
        let m = d.matrix();
        let sym = m[(0, 0)] + 2.0 * m[(0, 1)] + m[(1, 1)];
        let anti = m[(0, 0)] - 2.0 * m[(0, 1)] + m[(1, 1)];
        assert!(sym > anti, "sym {sym} anti {anti}");
    }

    #[test]
    fn schur_matches_pinned_body_solve() {
        for r in [[0.0, 0.0], [0.7, -0.3], [-1.2, 1.4]] {
            for full in [full_drag_tensor(&p(), r), full_mass_tensor(&p(), r)] {
                let (_, reduced) = schur_reduce(&full).unwrap();
                let inv = full.try_inverse().unwrap();
                let ss: Matrix2<f64> = inv.fixed_view::<2, 2>(3, 3).into_owned();
                let residual = (reduced * ss - Matrix2::identity()).amax();
                assert!(residual < 1e-10, "{residual}");
            }
        }
    }

    #[test]
    fn kinetic_energy_is_preserved_by_reduction() {
        let r = [0.4, -0.8];
        let full = full_mass_tensor(&p(), r);
        let (a, m) = reduce_mass(&p(), r).unwrap();
        let rdot = [0.7, -1.3];
        let xi = a.body_velocity(&rdot);
        let q = nalgebra::SVector::<f64, 5>::from_column_slice(&[xi[0], xi[1], xi[2], rdot[0], rdot[1]]);
        let full_energy = 0.5 * (q.transpose() * full * q)[0];
        let rd = DVector::from_column_slice(&rdot);
        let reduced_energy = 0.5 * rd.dot(&(m.matrix() * &rd));
        assert!((full_energy - reduced_energy).abs() < 1e-10);
    }

    #[test]
    fn metrics_are_spd_on_grid() {
        let drag = DragMetric::new(p()).unwrap();
        let mass = MassMetric::new(p()).unwrap();
        for i in 0..25 {
            for j in 0..25 {
                let r = DVector::from_column_slice(&[
                    -PI / 2.0 + PI * i as f64 / 24.0,
                    -PI / 2.0 + PI * j as f64 / 24.0,
                ]);
                for field in [&drag as &dyn MetricField, &mass] {
                    let eig = field.metric_matrix(&r).symmetric_eigenvalues();
                    assert!(eig.min() > 1e-10 * eig.max());
                }
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = SwimmerParams {
            drag_ratio: 0.5,
            ..p()
        };
        assert!(DragMetric::new(bad).is_err());
        let bad = SwimmerParams {
            link_length: -1.0,
            ..p()
        };
        assert!(bad.validate().is_err());
    }

    struct Reversed<'a>(&'a Gait, f64);

    impl ShapeCurve for Reversed<'_> {
        fn dim(&self) -> usize {
            2
        }
        fn sample(&self, t: f64) -> CurveSample {
            let s = self.0.eval(self.1 - t);
            CurveSample {
                position: s.position,
                velocity: -s.velocity,
                acceleration: s.acceleration,
            }
        }
    }

    #[test]
    fn reversing_a_loop_inverts_the_displacement() {
        let drag = DragMetric::new(p()).unwrap();
        let gait = Gait::default_turning();
        let forward = reconstruct_pose(&drag, &gait, 0.0, 1.0, 400).net();
        let backward = reconstruct_pose(&drag, &Reversed(&gait, 1.0), 0.0, 1.0, 400).net();
        assert!(forward.compose(&backward).distance(&Pose::IDENTITY) < 1e-6);
        assert!(forward.distance(&Pose::IDENTITY) > 1e-3);
    }

    #[test]
    fn forward_gait_translates_without_net_turning() {
        let drag = DragMetric::new(p()).unwrap();
        let traj = reconstruct_pose(&drag, &Gait::default_forward(), 0.0, 1.0, 400);
        let net = traj.net();
        let forward = *traj.forward.last().unwrap();
        assert!(forward.abs() > 1e-3);
        assert!(net.theta.abs() < forward.abs());
    }

    #[test]
    fn stationary_shape_does_not_move() {
        let drag = DragMetric::new(p()).unwrap();
        let still = Gait::stationary("still", &[0.3, -0.2], 1.0).unwrap();
        let traj = reconstruct_pose(&drag, &still, 0.0, 1.0, 50);
        assert!(traj.poses.iter().all(|q| *q == Pose::IDENTITY));
    }
}
