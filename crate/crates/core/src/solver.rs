//! Box-constrained Levenberg-Marquardt for small dense least-squares problems.
//!
//! Minimizes `F(x) = sum_i r_i(x)^2` subject to `lower <= x <= upper`.
//! Steps solve the Marquardt-scaled damped normal equations; trial points
//! are projected onto the box and accepted only if they lower `F`. Variables
//! sitting on a bound whose gradient pushes outward are frozen for that step.
//!
//! Residual functions may return `None` (or non-finite values) for states
//! where the model is undefined; such trial points are simply rejected.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::{FD_REL_STEP, SOLVER_GTOL, SOLVER_MAX_ITER, SOLVER_XTOL};

#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl BoxBounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi)),
        )
    }
}

/// A least-squares problem over `dim()` parameters.
pub trait ResidualProblem {
    fn dim(&self) -> usize;

    fn bounds(&self) -> &BoxBounds;

    /// Weighted residuals at `x`, or `None` where the model is undefined.
    fn residuals(&self, x: &DVector<f64>) -> Option<DVector<f64>>;

    /// Jacobian of [`Self::residuals`]; defaults to central differences.
    fn jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        numeric_jacobian(self, x)
    }
}

/// Central-difference Jacobian with step `1e-6 * max(1, |x_j|)`.
pub fn numeric_jacobian<P: ResidualProblem + ?Sized>(problem: &P, x: &DVector<f64>) -> Option<DMatrix<f64>> {
    let r0 = problem.residuals(x)?;
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let h = FD_REL_STEP * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let plus = problem.residuals(&xp)?;
        xp[j] = x[j] - h;
        let minus = problem.residuals(&xp)?;
        xp[j] = x[j];
        jac.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    Some(jac)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTol,
    StepTol,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x: DVector<f64>,
    /// `sum r_i^2` at `x`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Cost after each accepted step, starting with the initial cost.
    pub cost_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub gtol: f64,
    pub xtol: f64,
    pub max_iter: usize,
    pub initial_damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gtol: SOLVER_GTOL,
            xtol: SOLVER_XTOL,
            max_iter: SOLVER_MAX_ITER,
            initial_damping: 1e-3,
        }
    }
}

fn finite(r: Option<DVector<f64>>) -> Option<(DVector<f64>, f64)> {
    let r = r?;
    let cost = r.norm_squared();
    cost.is_finite().then_some((r, cost))
}

pub fn solve<P: ResidualProblem + ?Sized>(problem: &P, x0: &DVector<f64>) -> Result<SolveResult> {
    solve_with(problem, x0, &SolverOptions::default())
}

pub fn solve_with<P: ResidualProblem + ?Sized>(
    problem: &P,
    x0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let n = problem.dim();
    let bounds = problem.bounds();
    if x0.len() != n {
        return Err(Error::InvalidArgument(format!(
            "start has {} entries, problem has {n}",
            x0.len()
        )));
    }
    if !bounds.contains(x0) {
        return Err(Error::InvalidArgument("start lies outside the bounds".into()));
    }
    let (mut r, mut cost) =
        finite(problem.residuals(x0)).ok_or_else(|| Error::InvalidStart("residuals at the start".into()))?;
    let mut jac = problem
        .jacobian(x0)
        .filter(|j| j.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::InvalidStart("jacobian at the start".into()))?;
    let mut x = x0.clone();
    let mut trace = vec![cost];
    let mut mu = opts.initial_damping;
    let mut nu = 2.0;
    let mut scale = DVector::<f64>::zeros(n);

    let done = |x: DVector<f64>, cost, iterations, termination, trace| SolveResult {
        x,
        cost,
        iterations,
        converged: termination != Termination::MaxIter,
        termination,
        cost_trace: trace,
    };

    for iter in 0..opts.max_iter {
        if cost == 0.0 {
            return Ok(done(x, cost, iter, Termination::GradientTol, trace));
        }
        let grad = jac.tr_mul(&r);
        let hess = jac.tr_mul(&jac);

        // Freeze variables pinned against a bound by the gradient.
        let free: Vec<bool> = (0..n)
            .map(|j| !((x[j] <= bounds.lower[j] && grad[j] > 0.0) || (x[j] >= bounds.upper[j] && grad[j] < 0.0)))
            .collect();

        let rnorm = cost.sqrt();
        let gmax = (0..n)
            .filter(|&j| free[j])
            .map(|j| {
                let cn = jac.column(j).norm();
                if cn == 0.0 {
                    0.0
                } else {
                    grad[j].abs() / (cn * rnorm)
                }
            })
            .fold(0.0, f64::max);
        if gmax <= opts.gtol {
            return Ok(done(x, cost, iter, Termination::GradientTol, trace));
        }

        for j in 0..n {
            scale[j] = scale[j].max(hess[(j, j)].sqrt());
        }
        let s: DVector<f64> = scale.map(|v| if v > 0.0 { v } else { 1.0 });

        // Scaled damped system on the free variables.
        let idx: Vec<usize> = (0..n).filter(|&j| free[j]).collect();
        let m = idx.len();
        let mut a = DMatrix::zeros(m, m);
        let mut b = DVector::zeros(m);
        for (p, &i) in idx.iter().enumerate() {
            b[p] = -grad[i] / s[i];
            for (q, &j) in idx.iter().enumerate() {
                a[(p, q)] = hess[(i, j)] / (s[i] * s[j]);
            }
            a[(p, p)] += mu;
        }
        let Some(chol) = a.cholesky() else {
            mu *= nu;
            nu *= 2.0;
            continue;
        };
        let scaled_step = chol.solve(&b);
        let mut step = DVector::zeros(n);
        for (p, &i) in idx.iter().enumerate() {
            step[i] = scaled_step[p] / s[i];
        }

        let trial = bounds.project(&(&x + &step));
        let step = &trial - &x;
        let step_norm = step.component_mul(&s).norm();
        let x_norm = x.component_mul(&s).norm();
        if step_norm <= opts.xtol * x_norm || step_norm == 0.0 {
            return Ok(done(x, cost, iter, Termination::StepTol, trace));
        }

        let predicted = -(2.0 * step.dot(&grad) + step.dot(&(&hess * &step)));
        match finite(problem.residuals(&trial)) {
            Some((r_t, cost_t)) if cost_t < cost => {
                let jac_t = problem.jacobian(&trial).filter(|j| j.iter().all(|v| v.is_finite()));
                let Some(jac_t) = jac_t else {
                    mu *= nu;
                    nu *= 2.0;
                    continue;
                };
                let rho = if predicted > 0.0 {
                    (cost - cost_t) / predicted
                } else {
                    0.0
                };
                mu *= (1.0 / 3.0f64).max(1.0 - (2.0 * rho - 1.0).powi(3));
                nu = 2.0;
                x = trial;
                r = r_t;
                cost = cost_t;
                jac = jac_t;
                trace.push(cost);
            }
            _ => {
                mu *= nu;
                nu *= 2.0;
                if !mu.is_finite() || mu > 1e32 {
                    // No descent left at working precision.
                    return Ok(done(x, cost, iter + 1, Termination::StepTol, trace));
                }
            }
        }
    }
    Ok(done(x, cost, opts.max_iter, Termination::MaxIter, trace))
}
