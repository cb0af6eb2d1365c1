//! Problem definitions: a cost function plus a constraint model.

mod appendix;
pub mod format;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::constraints::{ConstraintModel, Evaluation, ScalarFunction, UnivariateBounds};
use crate::error::{PgdError, Result};
use crate::vector::norm_inf;

pub use appendix::{make_appendix_problem, AppendixCost, AppendixProblem};

/// `min C(φ)` subject to the constraints of `constraints`.
#[derive(Clone)]
pub struct Problem {
    cost: Arc<dyn ScalarFunction>,
    constraints: ConstraintModel,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("dimension", &self.dimension())
            .field("constraints", &self.constraints)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn new(cost: Arc<dyn ScalarFunction>, constraints: ConstraintModel) -> Self {
        Self { cost, constraints }
    }

    pub fn dimension(&self) -> usize {
        self.constraints.dimension()
    }

    /// Cost value and gradient at `phi`.
    pub fn cost(&self, phi: &[f64]) -> Result<Evaluation> {
        let e = self.cost.evaluate(phi)?;
        if e.gradient.len() != phi.len() {
            return Err(PgdError::DimensionMismatch {
                expected: phi.len(),
                got: e.gradient.len(),
            });
        }
        if !e.value.is_finite() {
            return Err(PgdError::Evaluation("cost is not finite".into()));
        }
        Ok(e)
    }

    pub fn constraints(&self) -> &ConstraintModel {
        &self.constraints
    }

    pub fn bounds(&self) -> &UnivariateBounds {
        self.constraints.bounds()
    }

    pub fn with_constraints(mut self, constraints: ConstraintModel) -> Result<Self> {
        if constraints.dimension() != self.dimension() {
            return Err(PgdError::DimensionMismatch {
                expected: self.dimension(),
                got: constraints.dimension(),
            });
        }
        self.constraints = constraints;
        Ok(self)
    }
}

/// `C(φ) = ½c‖φ − center‖²`
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    pub curvature: f64,
    pub center: Vec<f64>,
}

impl ScalarFunction for QuadraticCost {
    fn evaluate(&self, phi: &[f64]) -> Result<Evaluation> {
        if phi.len() != self.center.len() {
            return Err(PgdError::DimensionMismatch {
                expected: self.center.len(),
                got: phi.len(),
            });
        }
        let gradient: Vec<f64> = phi
            .iter()
            .zip(&self.center)
            .map(|(p, c)| self.curvature * (p - c))
            .collect();
        let value = 0.5
            * self.curvature
            * phi
                .iter()
                .zip(&self.center)
                .map(|(p, c)| (p - c) * (p - c))
                .sum::<f64>();
        Ok(Evaluation { value, gradient })
    }
}

/// Unconstrained quadratic bowl of curvature `c` around `center`.
pub fn make_quadratic(k: usize, curvature: f64, center: Vec<f64>) -> Result<Problem> {
    if !(curvature > 0.0) {
        return Err(PgdError::InvalidParameter {
            name: "curvature",
            reason: format!("must be positive, got {curvature}"),
        });
    }
    if center.len() != k {
        return Err(PgdError::DimensionMismatch {
            expected: k,
            got: center.len(),
        });
    }
    Ok(Problem::new(
        Arc::new(QuadraticCost { curvature, center }),
        ConstraintModel::new(UnivariateBounds::unbounded(k)),
    ))
}

/// `C(φ) = Σ w_i |φ_i − c_i|^{p_i}`, read from a table of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparablePowerCost {
    pub weights: Vec<f64>,
    pub centers: Vec<f64>,
    pub powers: Vec<f64>,
}

impl ScalarFunction for SeparablePowerCost {
    fn evaluate(&self, phi: &[f64]) -> Result<Evaluation> {
        if phi.len() != self.weights.len() {
            return Err(PgdError::DimensionMismatch {
                expected: self.weights.len(),
                got: phi.len(),
            });
        }
        let mut value = 0.0;
        let mut gradient = vec![0.0; phi.len()];
        for i in 0..phi.len() {
            let x = phi[i] - self.centers[i];
            let (w, p) = (self.weights[i], self.powers[i]);
            value += w * x.abs().powf(p);
            gradient[i] = w * p * x.abs().powf(p - 1.0) * x.signum();
        }
        Ok(Evaluation { value, gradient })
    }
}

/// Largest relative discrepancy between analytic gradients and central
/// differences, over the cost and every global constraint.
///
/// Each function is compared as `‖g − g_fd‖∞ / max(‖g‖∞, ‖g_fd‖∞)`.
pub fn check_gradient(problem: &Problem, phi: &[f64], step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(PgdError::InvalidParameter {
            name: "step",
            reason: "must be positive".into(),
        });
    }
    let mut worst: f64 = 0.0;
    let mut check = |f: &dyn Fn(&[f64]) -> Result<Evaluation>| -> Result<()> {
        let analytic = f(phi)?.gradient;
        let mut x = phi.to_vec();
        let mut fd = vec![0.0; phi.len()];
        for i in 0..phi.len() {
            let orig = x[i];
            x[i] = orig + step;
            let up = f(&x)?.value;
            x[i] = orig - step;
            let down = f(&x)?.value;
            x[i] = orig;
            fd[i] = (up - down) / (2.0 * step);
        }
        let scale = norm_inf(&analytic).max(norm_inf(&fd));
        if scale > 0.0 {
            let diff: Vec<f64> = analytic.iter().zip(&fd).map(|(a, b)| a - b).collect();
            worst = worst.max(norm_inf(&diff) / scale);
        }
        Ok(())
    };
    check(&|x: &[f64]| problem.cost(x))?;
    for c in problem.constraints().globals() {
        check(&|x: &[f64]| c.function.evaluate(x))?;
    }
    Ok(worst)
}

/// Rejects linear equality systems `Aφ = a` that have no solution.
pub fn check_linear_equalities(rows: &[Vec<f64>], rhs: &[f64]) -> Result<()> {
    if rows.is_empty() {
        return Ok(());
    }
    let k = rows[0].len();
    let a = DMatrix::from_fn(rows.len(), k, |r, c| rows[r][c]);
    let b = DVector::from_column_slice(rhs);
    let svd = a.clone().svd(true, true);
    let tol = 1e-10 * svd.singular_values.max().max(1.0);
    let x = svd
        .solve(&b, tol)
        .map_err(|e| PgdError::Solver(e.to_string()))?;
    let residual = (&a * x - &b).amax();
    if residual > 1e-8 * (1.0 + b.amax()) {
        return Err(PgdError::InfeasibleProblem(format!(
            "linear equality constraints are contradictory (residual {residual:e})"
        )));
    }
    Ok(())
}
