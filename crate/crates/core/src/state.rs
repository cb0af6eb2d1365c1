//! Optimizer state carried between iterations and the per-iteration log.

use serde::Serialize;

use crate::vector::DesignVector;

/// One row of the optimization log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Cost at the iterate the step started from.
    pub cost: f64,
    /// `f_j` at the same iterate.
    pub constraint_values: Vec<f64>,
    pub active_set_size: usize,
    pub h: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Relaxation factor the projection applied to `α` and `β`.
    pub step_scale: f64,
    /// `‖Δφ‖/α` with the relaxed `α`.
    pub projected_gradient_norm: f64,
    pub broken: bool,
    /// `‖φ_{n+1} − candidate‖∞` moved by bound restoration.
    pub clip_displacement: f64,
    pub outer_iterations: usize,
    pub solves: usize,
    pub fallback_6: usize,
    pub fallback_6c: usize,
    pub relaxations: usize,
    /// Iterations repeated by the monotone safeguard.
    pub safeguard_retries: usize,
}

impl IterationRecord {
    pub fn gamma_ratio(&self) -> f64 {
        self.gamma / (self.step_scale * self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub phi_n: DesignVector,
    pub phi_prev: Option<DesignVector>,
    /// Cost gradient at `phi_prev`.
    pub grad_prev: Option<DesignVector>,
    pub lagrangian_grad_prev: Option<DesignVector>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lipschitz: Option<f64>,
    pub h: usize,
    pub iteration: usize,
    pub history: Vec<IterationRecord>,
}

impl OptimizerState {
    pub fn new(phi: DesignVector) -> Self {
        Self {
            phi_n: phi,
            phi_prev: None,
            grad_prev: None,
            lagrangian_grad_prev: None,
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            lipschitz: None,
            h: 0,
            iteration: 0,
            history: Vec::new(),
        }
    }
}
