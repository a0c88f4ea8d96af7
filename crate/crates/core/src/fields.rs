//! Concrete metric fields: analytic test manifolds and derived fields.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::geometry::{GeometryError, MetricField, MetricTensor, DEFAULT_METRIC_STEP};

/// Flat space: the identity metric everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Euclidean {
    n: usize,
}

impl Euclidean {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        Self { n }
    }
}

impl MetricField for Euclidean {
    fn dim(&self) -> usize {
        self.n
    }

    fn metric_matrix(&self, _r: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n)
    }
}

/// Unit sphere in (latitude θ, longitude φ) coordinates: `diag(1, cos²θ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Sphere;

impl MetricField for Sphere {
    fn dim(&self) -> usize {
        2
    }

    fn metric_matrix(&self, r: &DVector<f64>) -> DMatrix<f64> {
        let c = r[0].cos();
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, c * c])
    }
}

/// Metric field backed by a closure.
pub struct FnMetric<F> {
    n: usize,
    step: f64,
    f: F,
}

impl<F> FnMetric<F>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        Self {
            n,
            step: DEFAULT_METRIC_STEP,
            f,
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }
}

impl<F> fmt::Debug for FnMetric<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnMetric").field("n", &self.n).finish()
    }
}

impl<F> MetricField for FnMetric<F>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn metric_matrix(&self, r: &DVector<f64>) -> DMatrix<f64> {
        (self.f)(r)
    }

    fn step(&self) -> f64 {
        self.step
    }
}

/// `h(r) = M(r) M̃ M(r)` for a constant actuator cometric `M̃`.
///
/// With `F = M a`, `‖F‖_{M̃} = ‖a‖_h`. For `M̃ = I` this is the square of
/// the base metric.
#[derive(Clone)]
pub struct InducedTorqueMetric {
    base: Arc<dyn MetricField>,
    actuator: DMatrix<f64>,
}

impl InducedTorqueMetric {
    pub fn new(
        base: Arc<dyn MetricField>,
        actuator_cometric: MetricTensor,
    ) -> Result<Self, GeometryError> {
        if actuator_cometric.dim() != base.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: base.dim(),
                found: actuator_cometric.dim(),
            });
        }
        Ok(Self {
            base,
            actuator: actuator_cometric.into_matrix(),
        })
    }

    pub fn base(&self) -> &Arc<dyn MetricField> {
        &self.base
    }

    pub fn actuator_cometric(&self) -> &DMatrix<f64> {
        &self.actuator
    }
}

impl fmt::Debug for InducedTorqueMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InducedTorqueMetric")
            .field("actuator", &self.actuator)
            .finish_non_exhaustive()
    }
}

impl MetricField for InducedTorqueMetric {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn metric_matrix(&self, r: &DVector<f64>) -> DMatrix<f64> {
        let m = self.base.metric_matrix(r);
        let h = &m * &self.actuator * &m;
        (&h + h.transpose()) * 0.5
    }

    fn step(&self) -> f64 {
        self.base.step()
    }

    fn curvature_step(&self) -> f64 {
        self.base.curvature_step()
    }
}

/// Analytic fields addressable from configuration: `"euclidean"` and
/// `"sphere"`.
pub fn named_field(name: &str, dim: usize) -> Option<Arc<dyn MetricField>> {
    match name {
        "euclidean" | "flat" => Some(Arc::new(Euclidean::new(dim.max(1)))),
        "sphere" if dim == 2 => Some(Arc::new(Sphere)),
        _ => None,
    }
}
