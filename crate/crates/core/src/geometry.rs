//! Riemannian geometry on a coordinate chart.
//!
//! Everything here is dimension-generic and works from a [`MetricField`]: a
//! callable that returns the metric matrix at a shape point. Connection
//! coefficients and curvature are obtained by central finite differences of
//! that callable, so analytic test manifolds and the swimmer models go
//! through exactly the same code path.
//!
//! Index conventions:
//!
//! * `Γ^k_{ij}` is stored at `[k][i][j]`, upper index first.
//! * `R^l_{kij}` is stored at `[l][k][i][j]` and satisfies
//!   `R(X, Y)Z = R^l_{kij} X^i Y^j Z^k ∂_l`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Central-difference step used for metric derivatives (radians).
pub const DEFAULT_METRIC_STEP: f64 = 1e-4;
/// Central-difference step used when differentiating Christoffel symbols.
pub const DEFAULT_CURVATURE_STEP: f64 = 1e-3;
/// Smallest admissible eigenvalue, relative to the largest one.
pub const SPD_FLOOR: f64 = 1e-12;
/// Relative asymmetry tolerated by [`MetricTensor::new`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("singular metric: eigenvalues span [{min:e}, {max:e}]")]
    SingularMetric { min: f64, max: f64 },
    #[error("metric is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),
}

fn check_dim(expected: usize, found: usize) -> Result<(), GeometryError> {
    if expected == found {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, found })
    }
}

/// A tangent vector in chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector(pub DVector<f64>);

/// A covector (one-form) in chart coordinates, e.g. a generalized force.
#[derive(Clone, Debug, PartialEq)]
pub struct Covector(pub DVector<f64>);

impl TangentVector {
    pub fn from_slice(v: &[f64]) -> Self {
        Self(DVector::from_column_slice(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl Covector {
    pub fn from_slice(v: &[f64]) -> Self {
        Self(DVector::from_column_slice(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Natural pairing `⟨E, X⟩ = E_i X^i`.
    pub fn pair(&self, x: &TangentVector) -> Result<f64, GeometryError> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.0.dot(&x.0))
    }
}

/// Symmetric positive-definite matrix at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTensor {
    matrix: DMatrix<f64>,
}

impl MetricTensor {
    /// Validates symmetry and positive definiteness.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, GeometryError> {
        if !matrix.is_square() {
            return Err(GeometryError::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite("metric"));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let asym = (&matrix - matrix.transpose()).amax() / scale;
        if asym > SYMMETRY_TOLERANCE {
            return Err(GeometryError::NotSymmetric(asym));
        }
        spd_spectrum(&matrix)?;
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self, GeometryError> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.matrix.clone().symmetric_eigenvalues()
    }

    pub fn inner(&self, x: &TangentVector, y: &TangentVector) -> Result<f64, GeometryError> {
        metric_inner(self, x, y)
    }

    /// Index lowering: `X ↦ M X`.
    pub fn lower(&self, x: &TangentVector) -> Result<Covector, GeometryError> {
        check_dim(self.dim(), x.dim())?;
        Ok(Covector(&self.matrix * &x.0))
    }

    /// Squared norm of a covector under this tensor read as a cometric.
    pub fn conorm_squared(&self, e: &Covector) -> Result<f64, GeometryError> {
        check_dim(self.dim(), e.dim())?;
        Ok(e.0.dot(&(&self.matrix * &e.0)))
    }

    pub fn dual(&self) -> Result<MetricTensor, GeometryError> {
        dual_metric(self)
    }
}

/// Returns `(min, max)` eigenvalues, or an error when the spectrum is not
/// bounded away from zero relative to the largest eigenvalue.
pub fn spd_spectrum(m: &DMatrix<f64>) -> Result<(f64, f64), GeometryError> {
    let eig = m.clone().symmetric_eigenvalues();
    let min = eig.min();
    let max = eig.max();
    if !(max > 0.0) || !(min > SPD_FLOOR * max) {
        return Err(GeometryError::SingularMetric { min, max });
    }
    Ok((min, max))
}

/// `Xᵀ M Y`.
pub fn metric_inner(
    m: &MetricTensor,
    x: &TangentVector,
    y: &TangentVector,
) -> Result<f64, GeometryError> {
    check_dim(m.dim(), x.dim())?;
    check_dim(m.dim(), y.dim())?;
    Ok(x.0.dot(&(&m.matrix * &y.0)))
}

/// Inverse of an SPD matrix, symmetrized so the result is exactly symmetric.
pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, GeometryError> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(GeometryError::NonFinite("metric"));
    }
    spd_spectrum(m)?;
    let chol = m
        .clone()
        .cholesky()
        .ok_or(GeometryError::SingularMetric { min: 0.0, max: 0.0 })?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// The cometric `M⁻¹`.
pub fn dual_metric(m: &MetricTensor) -> Result<MetricTensor, GeometryError> {
    Ok(MetricTensor {
        matrix: spd_inverse(&m.matrix)?,
    })
}

/// A smooth field of metric tensors over a coordinate chart.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;

    /// Raw metric matrix at `r`. Implementations must be deterministic.
    fn metric_matrix(&self, r: &DVector<f64>) -> DMatrix<f64>;

    fn step(&self) -> f64 {
        DEFAULT_METRIC_STEP
    }

    fn curvature_step(&self) -> f64 {
        DEFAULT_CURVATURE_STEP
    }

    fn metric(&self, r: &DVector<f64>) -> Result<MetricTensor, GeometryError> {
        check_dim(self.dim(), r.len())?;
        MetricTensor::new(self.metric_matrix(r))
    }
}

impl<F: MetricField + ?Sized> MetricField for Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn metric_matrix(&self, r: &DVector<f64>) -> DMatrix<f64> {
        (**self).metric_matrix(r)
    }
    fn step(&self) -> f64 {
        (**self).step()
    }
    fn curvature_step(&self) -> f64 {
        (**self).curvature_step()
    }
}

impl<F: MetricField + ?Sized> MetricField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn metric_matrix(&self, r: &DVector<f64>) -> DMatrix<f64> {
        (**self).metric_matrix(r)
    }
    fn step(&self) -> f64 {
        (**self).step()
    }
    fn curvature_step(&self) -> f64 {
        (**self).curvature_step()
    }
}

/// Central differences of any matrix-valued function along each coordinate.
pub(crate) fn matrix_gradient<F>(r: &DVector<f64>, eps: f64, mut f: F) -> Vec<DMatrix<f64>>
where
    F: FnMut(&DVector<f64>) -> DMatrix<f64>,
{
    let mut probe = r.clone();
    (0..r.len())
        .map(|i| {
            probe[i] = r[i] + eps;
            let plus = f(&probe);
            probe[i] = r[i] - eps;
            let minus = f(&probe);
            probe[i] = r[i];
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

/// Metric matrix and its coordinate derivatives `∂_m M`.
pub fn metric_derivatives(
    field: &dyn MetricField,
    r: &DVector<f64>,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>), GeometryError> {
    check_dim(field.dim(), r.len())?;
    let m = field.metric_matrix(r);
    let dm = matrix_gradient(r, field.step(), |p| field.metric_matrix(p));
    Ok((m, dm))
}

/// Christoffel symbols of the Levi-Civita connection at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    #[inline]
    fn set(&mut self, k: usize, i: usize, j: usize, value: f64) {
        let n = self.n;
        self.data[(k * n + i) * n + j] = value;
    }

    /// `Γ^k_{ij} x^i y^j`.
    pub fn contract(&self, x: &[f64], y: &[f64]) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |k, _| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += self.get(k, i, j) * x[i] * y[j];
                }
            }
            acc
        })
    }

    /// Covector correction `Γ^k_{ij} v^j E_k` (component `i`).
    pub fn covector_correction(&self, v: &[f64], e: &[f64]) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |i, _| {
            let mut acc = 0.0;
            for k in 0..n {
                for j in 0..n {
                    acc += self.get(k, i, j) * v[j] * e[k];
                }
            }
            acc
        })
    }

    fn axpy(&mut self, alpha: f64, other: &Christoffel) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }
}

/// Christoffel symbols from a metric matrix, its inverse and its gradient.
pub(crate) fn christoffel_from_parts(minv: &DMatrix<f64>, dm: &[DMatrix<f64>]) -> Christoffel {
    let n = minv.nrows();
    let mut lowered = vec![0.0; n * n * n];
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                lowered[(m * n + i) * n + j] =
                    0.5 * (dm[i][(m, j)] + dm[j][(m, i)] - dm[m][(i, j)]);
            }
        }
    }
    let mut out = Christoffel::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for m in 0..n {
                    acc += minv[(k, m)] * lowered[(m * n + i) * n + j];
                }
                out.set(k, i, j, acc);
            }
        }
    }
    out
}

pub fn christoffel(field: &dyn MetricField, r: &DVector<f64>) -> Result<Christoffel, GeometryError> {
    let (m, dm) = metric_derivatives(field, r)?;
    let minv = spd_inverse(&m)?;
    Ok(christoffel_from_parts(&minv, &dm))
}

/// Riemann curvature tensor at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Curvature {
    n: usize,
    data: Vec<f64>,
}

impl Curvature {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, l: usize, k: usize, i: usize, j: usize) -> f64 {
        let n = self.n;
        self.data[((l * n + k) * n + i) * n + j]
    }

    /// `R(X, Y)Z`.
    pub fn apply(&self, x: &[f64], y: &[f64], z: &[f64]) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |l, _| {
            let mut acc = 0.0;
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        acc += self.get(l, k, i, j) * x[i] * y[j] * z[k];
                    }
                }
            }
            acc
        })
    }

    /// Covector `k ↦ ⟨E, R(∂_k, v)v⟩ = E_l R^l_{mkj} v^m v^j`.
    pub fn covector_term(&self, e: &[f64], v: &[f64]) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |k, _| {
            let mut acc = 0.0;
            for l in 0..n {
                for m in 0..n {
                    for j in 0..n {
                        acc += e[l] * self.get(l, m, k, j) * v[m] * v[j];
                    }
                }
            }
            acc
        })
    }

    /// Largest `|R^l_{kij} + R^l_{kji}|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        worst = worst.max((self.get(l, k, i, j) + self.get(l, k, j, i)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest first-Bianchi residual `|R^l_{kij} + R^l_{ijk} + R^l_{jki}|`.
    pub fn bianchi_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let s = self.get(l, k, i, j) + self.get(l, i, j, k) + self.get(l, j, k, i);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Curvature by nested central differences of the Christoffel symbols.
pub fn curvature(field: &dyn MetricField, r: &DVector<f64>) -> Result<Curvature, GeometryError> {
    let gamma = christoffel(field, r)?;
    curvature_with(field, r, &gamma)
}

/// Same as [`curvature`], reusing Christoffel symbols already computed at `r`.
pub(crate) fn curvature_with(
    field: &dyn MetricField,
    r: &DVector<f64>,
    gamma: &Christoffel,
) -> Result<Curvature, GeometryError> {
    let n = field.dim();
    check_dim(n, r.len())?;
    let delta = field.curvature_step();
    let mut probe = r.clone();
    let mut dgamma = Vec::with_capacity(n);
    for i in 0..n {
        probe[i] = r[i] + delta;
        let mut d = christoffel(field, &probe)?;
        probe[i] = r[i] - delta;
        let minus = christoffel(field, &probe)?;
        probe[i] = r[i];
        d.axpy(-1.0, &minus);
        for x in d.data.iter_mut() {
            *x /= 2.0 * delta;
        }
        dgamma.push(d);
    }
    let mut data = vec![0.0; n * n * n * n];
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut value = dgamma[i].get(l, j, k) - dgamma[j].get(l, i, k);
                    for m in 0..n {
                        value += gamma.get(l, i, m) * gamma.get(m, j, k)
                            - gamma.get(l, j, m) * gamma.get(m, i, k);
                    }
                    data[((l * n + k) * n + i) * n + j] = value;
                }
            }
        }
    }
    Ok(Curvature { n, data })
}

/// `a^k = r̈^k + Γ^k_{ij} ṙ^i ṙ^j`.
pub fn covariant_acceleration(
    field: &dyn MetricField,
    r: &DVector<f64>,
    rdot: &TangentVector,
    rddot: &TangentVector,
) -> Result<TangentVector, GeometryError> {
    check_dim(field.dim(), rdot.dim())?;
    check_dim(field.dim(), rddot.dim())?;
    let gamma = christoffel(field, r)?;
    Ok(TangentVector(
        &rddot.0 + gamma.contract(rdot.0.as_slice(), rdot.0.as_slice()),
    ))
}

/// Covariant derivative along the curve of a vector field `X(t)` given its
/// raw time derivative: `Ẋ^k + Γ^k_{ij} ṙ^i X^j`.
pub fn covariant_derivative_vector(
    field: &dyn MetricField,
    r: &DVector<f64>,
    rdot: &TangentVector,
    x: &TangentVector,
    xdot: &TangentVector,
) -> Result<TangentVector, GeometryError> {
    check_dim(field.dim(), rdot.dim())?;
    check_dim(field.dim(), x.dim())?;
    check_dim(field.dim(), xdot.dim())?;
    let gamma = christoffel(field, r)?;
    Ok(TangentVector(
        &xdot.0 + gamma.contract(rdot.0.as_slice(), x.0.as_slice()),
    ))
}

/// Covariant derivative along the curve of a covector field `E(t)` given its
/// raw time derivative: `Ė_i − Γ^k_{ij} ṙ^j E_k`.
pub fn covariant_derivative_covector(
    field: &dyn MetricField,
    r: &DVector<f64>,
    rdot: &TangentVector,
    e: &Covector,
    edot: &Covector,
) -> Result<Covector, GeometryError> {
    check_dim(field.dim(), rdot.dim())?;
    check_dim(field.dim(), e.dim())?;
    check_dim(field.dim(), edot.dim())?;
    let gamma = christoffel(field, r)?;
    Ok(Covector(
        &edot.0 - gamma.covector_correction(rdot.0.as_slice(), e.0.as_slice()),
    ))
}

/// `½ (∇_k h*)(E, E)` with the connection of `g` and `h* = h⁻¹`.
pub fn cometric_incompatibility(
    g: &dyn MetricField,
    h: &dyn MetricField,
    r: &DVector<f64>,
    e: &Covector,
) -> Result<Covector, GeometryError> {
    check_dim(g.dim(), h.dim())?;
    check_dim(g.dim(), e.dim())?;
    let gamma = christoffel(g, r)?;
    incompatibility_with(&gamma, h, r, e.0.as_slice()).map(Covector)
}

pub(crate) fn incompatibility_with(
    gamma: &Christoffel,
    h: &dyn MetricField,
    r: &DVector<f64>,
    e: &[f64],
) -> Result<DVector<f64>, GeometryError> {
    let n = gamma.dim();
    check_dim(n, r.len())?;
    let hstar = spd_inverse(&h.metric_matrix(r))?;
    let mut failure = None;
    let dhstar = matrix_gradient(r, h.step(), |p| {
        spd_inverse(&h.metric_matrix(p)).unwrap_or_else(|err| {
            failure = Some(err);
            DMatrix::zeros(n, n)
        })
    });
    if let Some(err) = failure {
        return Err(err);
    }
    // ∇_k h*^{ij} E_i E_j, the two Christoffel terms contribute equally.
    Ok(DVector::from_fn(n, |k, _| {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut d = dhstar[k][(i, j)];
                for m in 0..n {
                    d += gamma.get(i, k, m) * hstar[(m, j)] + gamma.get(j, k, m) * hstar[(i, m)];
                }
                acc += d * e[i] * e[j];
            }
        }
        0.5 * acc
    }))
}

/// `h = M M̃ M`: the metric whose acceleration norm equals the actuator-force
/// norm `‖M a‖_{M̃}`.
pub fn induced_torque_metric(
    base: Arc<dyn MetricField>,
    actuator_cometric: MetricTensor,
) -> Result<crate::fields::InducedTorqueMetric, GeometryError> {
    crate::fields::InducedTorqueMetric::new(base, actuator_cometric)
}
