//! Global constraints, univariate bounds and the model combining them.

use std::fmt;
use std::sync::Arc;

use crate::error::{PgdError, Result};
use crate::vector::dot;

/// Value and gradient of a scalar function at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// A differentiable scalar function of the design vector.
pub trait ScalarFunction: Send + Sync {
    fn evaluate(&self, phi: &[f64]) -> Result<Evaluation>;
}

impl<F> ScalarFunction for F
where
    F: Fn(&[f64]) -> Result<Evaluation> + Send + Sync,
{
    fn evaluate(&self, phi: &[f64]) -> Result<Evaluation> {
        self(phi)
    }
}

/// `f(φ) = c·φ`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunction {
    pub coefficients: Vec<f64>,
}

impl LinearFunction {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }
}

impl ScalarFunction for LinearFunction {
    fn evaluate(&self, phi: &[f64]) -> Result<Evaluation> {
        if phi.len() != self.coefficients.len() {
            return Err(PgdError::DimensionMismatch {
                expected: self.coefficients.len(),
                got: phi.len(),
            });
        }
        Ok(Evaluation {
            value: dot(&self.coefficients, phi),
            gradient: self.coefficients.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    Equality,
    Inequality,
}

/// How the tolerance ε is applied when deciding whether a constraint is broken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToleranceSide {
    /// broken iff |f − a| > ε
    Symmetric,
    /// broken iff f − a > ε
    UpperOnly,
}

/// `f_j(φ) = a_j` or `f_j(φ) ≤ a_j`.
#[derive(Clone)]
pub struct GlobalConstraint {
    pub id: usize,
    pub kind: ConstraintKind,
    pub bound: f64,
    pub tolerance: f64,
    pub tolerance_side: ToleranceSide,
    pub function: Arc<dyn ScalarFunction>,
}

impl fmt::Debug for GlobalConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GlobalConstraint")
            .field("id", &self.id)
            .field("kind", &self.kind)
            .field("bound", &self.bound)
            .field("tolerance", &self.tolerance)
            .field("tolerance_side", &self.tolerance_side)
            .finish_non_exhaustive()
    }
}

impl GlobalConstraint {
    pub fn is_equality(&self) -> bool {
        self.kind == ConstraintKind::Equality
    }

    /// Whether `value = f_j(φ)` breaks the constraint beyond its tolerance.
    pub fn is_broken(&self, value: f64) -> bool {
        let excess = value - self.bound;
        match self.tolerance_side {
            ToleranceSide::Symmetric => excess.abs() > self.tolerance,
            ToleranceSide::UpperOnly => excess > self.tolerance,
        }
    }
}

/// Per-variable box `d ≤ φ_i ≤ e`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl UnivariateBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(PgdError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (d, e)) in lower.iter().zip(&upper).enumerate() {
            if d.is_nan() || e.is_nan() || d > e {
                return Err(PgdError::InvalidParameter {
                    name: "bounds",
                    reason: format!("lower bound exceeds upper bound at index {i}"),
                });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(len: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; len], vec![upper; len])
    }

    /// No finite bounds on any variable.
    pub fn unbounded(len: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; len],
            upper: vec![f64::INFINITY; len],
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Smallest `e_i − d_i`, or `None` when every variable is unbounded.
    pub fn min_width(&self) -> Option<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(d, e)| e - d)
            .filter(|w| w.is_finite())
            .reduce(f64::min)
    }

    pub fn contains(&self, phi: &[f64]) -> bool {
        phi.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(p, (d, e))| *p >= *d && *p <= *e)
    }

    /// Componentwise min–max clipping.
    pub fn clip(&self, phi: &mut [f64]) {
        for (p, (d, e)) in phi.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *p = p.clamp(*d, *e);
        }
    }
}

/// Global constraints (equalities first) plus the univariate bounds.
#[derive(Debug, Clone)]
pub struct ConstraintModel {
    globals: Vec<GlobalConstraint>,
    n_equalities: usize,
    bounds: UnivariateBounds,
}

impl ConstraintModel {
    pub fn new(bounds: UnivariateBounds) -> Self {
        Self {
            globals: Vec::new(),
            n_equalities: 0,
            bounds,
        }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    /// Adds `f(φ) = bound`. Equalities are kept ahead of inequalities and
    /// ids are renumbered to match positions.
    pub fn with_equality(
        mut self,
        function: Arc<dyn ScalarFunction>,
        bound: f64,
        tolerance: f64,
    ) -> Result<Self> {
        check_tolerance(tolerance)?;
        let c = GlobalConstraint {
            id: self.n_equalities,
            kind: ConstraintKind::Equality,
            bound,
            tolerance,
            tolerance_side: ToleranceSide::Symmetric,
            function,
        };
        self.globals.insert(self.n_equalities, c);
        self.n_equalities += 1;
        for (i, g) in self.globals.iter_mut().enumerate() {
            g.id = i;
        }
        Ok(self)
    }

    /// Adds `f(φ) ≤ bound`.
    pub fn with_inequality(
        mut self,
        function: Arc<dyn ScalarFunction>,
        bound: f64,
        tolerance: f64,
    ) -> Result<Self> {
        check_tolerance(tolerance)?;
        let id = self.globals.len();
        self.globals.push(GlobalConstraint {
            id,
            kind: ConstraintKind::Inequality,
            bound,
            tolerance,
            tolerance_side: ToleranceSide::UpperOnly,
            function,
        });
        Ok(self)
    }

    pub fn with_linear_equality(self, coefficients: Vec<f64>, bound: f64, tolerance: f64) -> Result<Self> {
        self.check_len(coefficients.len())?;
        self.with_equality(Arc::new(LinearFunction::new(coefficients)), bound, tolerance)
    }

    pub fn with_linear_inequality(self, coefficients: Vec<f64>, bound: f64, tolerance: f64) -> Result<Self> {
        self.check_len(coefficients.len())?;
        self.with_inequality(Arc::new(LinearFunction::new(coefficients)), bound, tolerance)
    }

    /// Overrides the tolerance semantics of one constraint.
    pub fn set_tolerance_side(&mut self, id: usize, side: ToleranceSide) {
        self.globals[id].tolerance_side = side;
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dimension() {
            return Err(PgdError::DimensionMismatch {
                expected: self.dimension(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn globals(&self) -> &[GlobalConstraint] {
        &self.globals
    }

    pub fn n_globals(&self) -> usize {
        self.globals.len()
    }

    pub fn n_equalities(&self) -> usize {
        self.n_equalities
    }

    pub fn bounds(&self) -> &UnivariateBounds {
        &self.bounds
    }

    /// Evaluates every global constraint at `phi`.
    pub fn evaluate(&self, phi: &[f64]) -> Result<Vec<Evaluation>> {
        self.globals
            .iter()
            .map(|c| {
                let e = c.function.evaluate(phi)?;
                if e.gradient.len() != phi.len() {
                    return Err(PgdError::DimensionMismatch {
                        expected: phi.len(),
                        got: e.gradient.len(),
                    });
                }
                Ok(e)
            })
            .collect()
    }
}

fn check_tolerance(tolerance: f64) -> Result<()> {
    if !(tolerance >= 0.0) {
        return Err(PgdError::InvalidParameter {
            name: "tolerance",
            reason: format!("must be nonnegative, got {tolerance}"),
        });
    }
    Ok(())
}
