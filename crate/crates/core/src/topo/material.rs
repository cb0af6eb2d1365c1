//! Smoothed Heaviside projection and SIMP conductivity.

use serde::{Deserialize, Serialize};

use crate::error::{PgdError, Result};

/// `H(x) = (tanh(λ(x−½)) + tanh(λ/2)) / (2 tanh(λ/2))` and `H'(x)`.
pub fn heaviside(x: f64, lambda: f64) -> (f64, f64) {
    let t = (0.5 * lambda).tanh();
    let u = (lambda * (x - 0.5)).tanh();
    let value = (u + t) / (2.0 * t);
    let slope = lambda * (1.0 - u * u) / (2.0 * t);
    (value, slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialModel {
    pub kappa_cond: f64,
    pub kappa_ins: f64,
    pub simp_b: f64,
    pub heaviside_lambda: f64,
    /// Filter radius in cell sizes.
    pub filter_radius_cells: f64,
}

impl Default for MaterialModel {
    fn default() -> Self {
        Self {
            kappa_cond: 1.0,
            kappa_ins: 0.001,
            simp_b: 1.0,
            heaviside_lambda: 1.0,
            filter_radius_cells: 3.0,
        }
    }
}

impl MaterialModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(PgdError::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.kappa_ins > 0.0 && self.kappa_ins.is_finite()) {
            return bad("kappa_ins", "must be positive");
        }
        // equal conductivities are allowed: the design then has no effect
        if !(self.kappa_cond >= self.kappa_ins && self.kappa_cond.is_finite()) {
            return bad("kappa_cond", "must be at least kappa_ins");
        }
        if !(self.simp_b >= 1.0) {
            return bad("simp_b", "must be at least 1");
        }
        if !(self.heaviside_lambda > 0.0 && self.heaviside_lambda.is_finite()) {
            return bad("heaviside_lambda", "must be positive");
        }
        if !(self.filter_radius_cells > 0.0 && self.filter_radius_cells.is_finite()) {
            return bad("filter_radius_cells", "must be positive");
        }
        Ok(())
    }

    /// `κ = κ_ins + (κ_cond − κ_ins) φ̄^b` and `dκ/dφ̄`.
    pub fn simp(&self, phi_bar: f64) -> (f64, f64) {
        let x = phi_bar.clamp(0.0, 1.0);
        let span = self.kappa_cond - self.kappa_ins;
        let b = self.simp_b;
        let slope = if b == 1.0 { span } else { span * b * x.powf(b - 1.0) };
        (self.kappa_ins + span * x.powf(b), slope)
    }
}
