//! Tunable parameters for the projection and the outer optimizer loop.

use serde::{Deserialize, Serialize};

use crate::error::{PgdError, Result};

/// Which constraint gradients span the "parallel" part of the step split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecompositionScope {
    /// Gradients of the constraints active in the last projection.
    ActiveSetOnly,
    /// Every global constraint gradient plus the active bounds.
    AllConstraints,
}

/// Gradient whose norm sizes the inertial term `β(φ_n − φ_{n−1})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InertiaScale {
    /// `‖∇C(φ_n)‖`. The inertial term keeps a fixed size relative to the
    /// gradient step, so it does not vanish at a constrained optimum.
    CostGradient,
    /// `‖Δφ_{n−1}/α_{n−1}‖`, which goes to zero at KKT points.
    LagrangianGradient,
}

/// How the broken-constraint counter `h` recovers once constraints hold again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HResetMode {
    Decrement,
    Reset,
}

/// How bounds are restored after the γ-scaled update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PostGammaFeasibility {
    Clip,
    Reproject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    /// Step relaxation factor applied when the active set outgrows the dimension.
    pub zeta: f64,
    pub max_relaxations: usize,
    /// Cap on active-set sub-iterations; `None` means `100·(m + k)`.
    pub max_iterations: Option<usize>,
    /// A linearized inequality counts as violated above `a_j + violation_tol`.
    pub violation_tol: f64,
    /// Multipliers below `-negative_multiplier_tol` are negative.
    pub negative_multiplier_tol: f64,
    /// Absolute slack on the merit comparison.
    pub merit_slack: f64,
    /// Relative pivot threshold of the Schur-complement factorization.
    pub pivot_tol: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            zeta: 0.5,
            max_relaxations: 60,
            max_iterations: None,
            violation_tol: 1e-10,
            negative_multiplier_tol: 1e-12,
            merit_slack: 1e-12,
            pivot_tol: 1e-12,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(invalid("zeta", "must lie in (0, 1)"));
        }
        if self.violation_tol < 0.0 || self.negative_multiplier_tol < 0.0 || self.merit_slack < 0.0 {
            return Err(invalid("tolerance", "projection tolerances must be nonnegative"));
        }
        if !(self.pivot_tol > 0.0) {
            return Err(invalid("pivot_tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Inertia weight β̂ in [0, 1].
    pub beta_hat: f64,
    /// Broken-constraint relaxation μ in (0, 1].
    pub mu: f64,
    /// Upper bound on γ/α.
    pub gamma_cap: f64,
    /// Fraction of the bound width used for the first step.
    pub first_step_fraction: f64,
    pub max_iterations: usize,
    /// Stop when the relative cost change falls below this value.
    pub cost_rel_tol: Option<f64>,
    /// Stop when ‖Δφ‖/α falls below this value.
    pub pg_tol: Option<f64>,
    pub inertia_scale: InertiaScale,
    pub decomposition_scope: DecompositionScope,
    pub h_reset_mode: HResetMode,
    pub post_gamma_feasibility: PostGammaFeasibility,
    /// Repeat an iteration with a doubled Lipschitz estimate when the cost rises.
    pub monotone_safeguard: bool,
    pub projection: ProjectionConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            beta_hat: 0.2,
            mu: 0.95,
            gamma_cap: 10.0,
            first_step_fraction: 0.1,
            max_iterations: 1000,
            cost_rel_tol: Some(1e-6),
            pg_tol: None,
            inertia_scale: InertiaScale::LagrangianGradient,
            decomposition_scope: DecompositionScope::ActiveSetOnly,
            h_reset_mode: HResetMode::Decrement,
            post_gamma_feasibility: PostGammaFeasibility::Clip,
            monotone_safeguard: false,
            projection: ProjectionConfig::default(),
        }
    }
}

impl OptimizerConfig {
    /// Plain projected gradient descent: no inertia, no `μ^h` relaxation, `γ ≤ α`.
    pub fn traditional() -> Self {
        Self {
            beta_hat: 0.0,
            mu: 1.0,
            gamma_cap: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta_hat) {
            return Err(invalid("beta_hat", "must lie in [0, 1]"));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(invalid("mu", "must lie in (0, 1]"));
        }
        if !(self.gamma_cap >= 1.0) {
            return Err(invalid("gamma_cap", "must be at least 1"));
        }
        if !(self.first_step_fraction > 0.0) {
            return Err(invalid("first_step_fraction", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "must be positive"));
        }
        self.projection.validate()
    }
}

fn invalid(name: &'static str, reason: &str) -> PgdError {
    PgdError::InvalidParameter {
        name,
        reason: reason.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = OptimizerConfig::default();
        c.validate().unwrap();
        assert_eq!(c.beta_hat, 0.2);
        assert_eq!(c.mu, 0.95);
        assert_eq!(c.projection.zeta, 0.5);
        assert_eq!(c.gamma_cap, 10.0);
        OptimizerConfig::traditional().validate().unwrap();
    }

    #[test]
    fn out_of_range_rejected() {
        let mut c = OptimizerConfig::default();
        c.mu = 0.0;
        assert!(c.validate().is_err());
        let mut c = OptimizerConfig::default();
        c.projection.zeta = 1.0;
        assert!(c.validate().is_err());
        let mut c = OptimizerConfig::default();
        c.beta_hat = 1.5;
        assert!(c.validate().is_err());
    }
}
