//! Thin adapters over the outer optimizers: `argmin`'s Nelder–Mead for the
//! derivative-free search and the MINPACK-style `levenberg-marquardt` crate
//! for the least-squares polish.

use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::neldermead::NelderMead;
use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{DMatrix, DVector, Dyn, Owned};

/// Objective values at or above this are treated as failed evaluations.
pub(crate) const FAILED: f64 = 1e300;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
}

struct Objective<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Objective<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, ArgminError> {
        let v = (self.0)(p);
        Ok(if v.is_finite() { v.min(FAILED) } else { FAILED })
    }
}

/// Minimizes `f` from the axis-aligned simplex `x0`, `x0 + steps[i] e_i`.
pub(crate) fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    steps: &[f64],
    max_iters: u64,
) -> SimplexResult {
    let mut simplex = vec![x0.to_vec()];
    for (i, s) in steps.iter().enumerate() {
        let mut p = x0.to_vec();
        p[i] += s;
        simplex.push(p);
    }
    let fallback = || SimplexResult {
        x: x0.to_vec(),
        value: f(x0),
    };
    if x0.is_empty() {
        return fallback();
    }
    let solver = match NelderMead::new(simplex).with_sd_tolerance(1e-14) {
        Ok(s) => s,
        Err(_) => return fallback(),
    };
    let run = Executor::new(Objective(&f), solver)
        .configure(|state| state.max_iters(max_iters))
        .timer(false)
        .run();
    match run {
        Ok(res) => {
            let state = res.state();
            match state.get_best_param() {
                Some(x) => SimplexResult {
                    x: x.clone(),
                    value: state.get_best_cost(),
                },
                None => fallback(),
            }
        }
        Err(_) => fallback(),
    }
}

struct Residuals<F> {
    f: F,
    x: DVector<f64>,
    r: Option<DVector<f64>>,
}

impl<F: Fn(&[f64]) -> Option<DVector<f64>>> LeastSquaresProblem<f64, Dyn, Dyn> for Residuals<F> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.x = x.clone();
        self.r = (self.f)(x.as_slice());
    }

    fn params(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        self.r.clone()
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let m = self.r.as_ref()?.len();
        let n = self.x.len();
        let mut jac = DMatrix::zeros(m, n);
        let mut probe = self.x.as_slice().to_vec();
        for j in 0..n {
            let h = 1e-6 * self.x[j].abs().max(1.0);
            probe[j] = self.x[j] + h;
            let plus = (self.f)(&probe)?;
            probe[j] = self.x[j] - h;
            let minus = (self.f)(&probe)?;
            probe[j] = self.x[j];
            jac.set_column(j, &((plus - minus) / (2.0 * h)));
        }
        Some(jac)
    }
}

/// Damped least squares on `f` with central-difference sensitivities.
/// Returns the final parameters; the caller re-evaluates the residual.
pub(crate) fn least_squares<F: Fn(&[f64]) -> Option<DVector<f64>>>(
    f: F,
    x0: &[f64],
    patience: usize,
) -> Vec<f64> {
    let x = DVector::from_column_slice(x0);
    let r = f(x0);
    if r.is_none() || x0.is_empty() {
        return x0.to_vec();
    }
    let problem = Residuals { f, x, r };
    let (problem, _report) = LevenbergMarquardt::new()
        .with_patience(patience.max(1))
        .minimize(problem);
    problem.x.as_slice().to_vec()
}
