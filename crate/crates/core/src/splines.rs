//! Shooting dynamics for geodesics and Riemannian splines.
//!
//! All three flows carry `(γ, γ̇)` first. The spline flows add two blocks of
//! covariant quantities whose covariant rates are prescribed; the raw time
//! derivatives integrated by the ODE solver are recovered with Christoffel
//! corrections.

use nalgebra::DVector;

use crate::geometry::{
    christoffel, curvature_with, incompatibility_with, spd_inverse, GeometryError, MetricField,
};
use crate::ode::ShotDynamics;

fn stack(blocks: &[&DVector<f64>]) -> DVector<f64> {
    let len = blocks.iter().map(|b| b.len()).sum();
    let mut out = DVector::zeros(len);
    let mut offset = 0;
    for b in blocks {
        out.rows_mut(offset, b.len()).copy_from(*b);
        offset += b.len();
    }
    out
}

fn block(state: &DVector<f64>, n: usize, index: usize) -> DVector<f64> {
    state.rows(index * n, n).into_owned()
}

/// Zero covariant acceleration: `γ̈ = −Γ(γ̇, γ̇)`. State `(γ, γ̇)`.
pub struct GeodesicFlow<'a> {
    pub field: &'a dyn MetricField,
}

impl ShotDynamics for GeodesicFlow<'_> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn state_len(&self) -> usize {
        2 * self.field.dim()
    }

    fn derivative(&self, state: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        let n = self.dim();
        let r = block(state, n, 0);
        let v = block(state, n, 1);
        let gamma = christoffel(self.field, &r)?;
        let acc = -gamma.contract(v.as_slice(), v.as_slice());
        Ok(stack(&[&v, &acc]))
    }
}

/// Acceleration spline `∇²a + R(a, γ̇)γ̇ = 0` with `a = ∇_γ̇ γ̇`.
/// State `(γ, γ̇, a, j)` with `j = ∇_γ̇ a`.
pub struct AccelSplineFlow<'a> {
    pub field: &'a dyn MetricField,
}

impl ShotDynamics for AccelSplineFlow<'_> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn state_len(&self) -> usize {
        4 * self.field.dim()
    }

    fn derivative(&self, state: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        let n = self.dim();
        let r = block(state, n, 0);
        let v = block(state, n, 1);
        let a = block(state, n, 2);
        let j = block(state, n, 3);
        let gamma = christoffel(self.field, &r)?;
        let vs = v.as_slice();
        let rddot = &a - gamma.contract(vs, vs);
        let adot = &j - gamma.contract(vs, a.as_slice());
        let mut jdot = -gamma.contract(vs, j.as_slice());
        if a.iter().any(|x| *x != 0.0) {
            let curv = curvature_with(self.field, &r, &gamma)?;
            jdot -= curv.apply(a.as_slice(), vs, vs);
        }
        Ok(stack(&[&v, &rddot, &adot, &jdot]))
    }
}

/// Torque (effort) spline
/// `∇²E + ⟨E, R(•, γ̇)γ̇⟩ − ½ ∇_• h*(E, E) = 0` with `a = h* E`.
/// State `(γ, γ̇, E, P)` with covectors `E` and `P = ∇_γ̇ E`.
pub struct TorqueSplineFlow<'a> {
    pub metric: &'a dyn MetricField,
    pub induced: &'a dyn MetricField,
}

impl ShotDynamics for TorqueSplineFlow<'_> {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn state_len(&self) -> usize {
        4 * self.metric.dim()
    }

    fn derivative(&self, state: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        let n = self.dim();
        let r = block(state, n, 0);
        let v = block(state, n, 1);
        let e = block(state, n, 2);
        let p = block(state, n, 3);
        let gamma = christoffel(self.metric, &r)?;
        let hstar = spd_inverse(&self.induced.metric_matrix(&r))?;
        let vs = v.as_slice();
        let a = &hstar * &e;
        let rddot = a - gamma.contract(vs, vs);
        let edot = &p + gamma.covector_correction(vs, e.as_slice());
        let mut pdot = gamma.covector_correction(vs, p.as_slice());
        if e.iter().any(|x| *x != 0.0) {
            let curv = curvature_with(self.metric, &r, &gamma)?;
            pdot -= curv.covector_term(e.as_slice(), vs);
            pdot += incompatibility_with(&gamma, self.induced, &r, e.as_slice())?;
        }
        Ok(stack(&[&v, &rddot, &edot, &pdot]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Euclidean, Sphere};
    use crate::ode::integrate_shot;
    use std::f64::consts::PI;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn flat_geodesic_is_a_straight_line() {
        let e = Euclidean::new(2);
        let t = integrate_shot(&GeodesicFlow { field: &e }, v(&[0.0, 0.0, 3.0, 4.0]), 1.0, 64, None)
            .unwrap();
        let end = t.position(t.len() - 1);
        assert!((end[0] - 3.0).abs() < 1e-12 && (end[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn equator_stays_on_equator() {
        let t = integrate_shot(
            &GeodesicFlow { field: &Sphere },
            v(&[0.0, 0.0, 0.0, 1.0]),
            2.0 * PI,
            256,
            None,
        )
        .unwrap();
        for i in 0..t.len() {
            assert!(t.position(i)[0].abs() < 1e-8);
        }
    }

    #[test]
    fn geodesic_speed_is_conserved() {
        let t = integrate_shot(
            &GeodesicFlow { field: &Sphere },
            v(&[0.3, 0.0, 0.4, 1.1]),
            2.0,
            256,
            None,
        )
        .unwrap();
        let speed = |i: usize| {
            let g = Sphere.metric_matrix(&t.position(i).into_owned());
            let vel = t.velocity(i).into_owned();
            vel.dot(&(g * &vel)).sqrt()
        };
        let s0 = speed(0);
        for i in 0..t.len() {
            assert!((speed(i) - s0).abs() < 1e-6 * s0);
        }
    }

    #[test]
    fn flat_accel_spline_is_hermite_cubic() {
        // γ(0)=(0,0), γ̇(0)=(1,0), γ(1)=(1,1), γ̇(1)=(0,1):
        // c2 = 3Δ − 2v0 − v1 = (1, 2), c3 = −2Δ + v0 + v1 = (−1, −1)
        let e = Euclidean::new(2);
        let init = v(&[0.0, 0.0, 1.0, 0.0, 2.0, 4.0, -6.0, -6.0]);
        let t = integrate_shot(&AccelSplineFlow { field: &e }, init, 1.0, 64, None).unwrap();
        let mid = t.position(32);
        assert!((mid[0] - 0.625).abs() < 1e-12 && (mid[1] - 0.375).abs() < 1e-12);
        let end = t.last_state();
        assert!((end - v(&[1.0, 1.0, 0.0, 1.0, -4.0, -2.0, -6.0, -6.0])).amax() < 1e-12);
    }

    #[test]
    fn zero_spline_data_reduces_to_geodesic() {
        let geo = integrate_shot(
            &GeodesicFlow { field: &Sphere },
            v(&[0.2, 0.1, 0.5, -0.7]),
            1.5,
            128,
            None,
        )
        .unwrap();
        let spl = integrate_shot(
            &AccelSplineFlow { field: &Sphere },
            v(&[0.2, 0.1, 0.5, -0.7, 0.0, 0.0, 0.0, 0.0]),
            1.5,
            128,
            None,
        )
        .unwrap();
        for i in 0..geo.len() {
            assert!((geo.position(i) - spl.position(i)).amax() < 1e-8);
        }
    }

    #[test]
    fn torque_with_induced_equal_to_metric_matches_accel_spline() {
        let init_a = v(&[0.2, 0.1, 0.5, -0.7, 0.3, 0.2, -0.4, 0.1]);
        let spl = integrate_shot(&AccelSplineFlow { field: &Sphere }, init_a.clone(), 1.5, 128, None)
            .unwrap();
        let g = Sphere.metric_matrix(&v(&[0.2, 0.1]));
        let e0 = &g * v(&[0.3, 0.2]);
        let p0 = &g * v(&[-0.4, 0.1]);
        let init_e = v(&[0.2, 0.1, 0.5, -0.7, e0[0], e0[1], p0[0], p0[1]]);
        let tor = integrate_shot(
            &TorqueSplineFlow {
                metric: &Sphere,
                induced: &Sphere,
            },
            init_e,
            1.5,
            128,
            None,
        )
        .unwrap();
        for i in 0..spl.len() {
            assert!((spl.position(i) - tor.position(i)).amax() < 1e-7);
        }
    }

    #[test]
    fn flat_torque_spline_with_constant_induced_metric_is_cubic() {
        use crate::fields::FnMetric;
        use nalgebra::DMatrix;
        let e = Euclidean::new(2);
        let h = FnMetric::new(2, |_: &DVector<f64>| DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]));
        let init = v(&[0.0, 0.0, 1.0, 0.0, 0.7, -0.2, 0.3, 0.9]);
        let t = integrate_shot(
            &TorqueSplineFlow {
                metric: &e,
                induced: &h,
            },
            init,
            1.0,
            64,
            None,
        )
        .unwrap();
        // raw accelerations are linear in time, so third differences vanish
        for i in 0..t.len() - 2 {
            let second = &t.accelerations[i + 2] - &t.accelerations[i + 1] * 2.0 + &t.accelerations[i];
            assert!(second.amax() < 1e-10);
        }
    }
}
