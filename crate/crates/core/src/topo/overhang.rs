//! Overhang indicator on the filtered field.

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{PgdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverhangModel {
    /// Largest overhang angle from the build direction, radians.
    pub theta0: f64,
    /// Slope of the logistic gate.
    pub gate_slope: f64,
    pub build_dir: [f64; 2],
    /// Regularization of `‖∇φ̂‖`.
    pub delta: f64,
}

impl Default for OverhangModel {
    fn default() -> Self {
        Self {
            theta0: std::f64::consts::FRAC_PI_4,
            gate_slope: 20.0,
            build_dir: [0.0, 1.0],
            delta: 1e-8,
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Clamped central difference stencil along one axis.
fn stencil(i: usize, n: usize) -> (usize, usize) {
    (i.saturating_sub(1), (i + 1).min(n - 1))
}

impl OverhangModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(PgdError::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.theta0 > 0.0 && self.theta0 < std::f64::consts::FRAC_PI_2) {
            return bad("theta0", "must lie in (0, π/2)");
        }
        if !(self.gate_slope > 0.0 && self.gate_slope.is_finite()) {
            return bad("gate_slope", "must be positive");
        }
        let [a, b] = self.build_dir;
        if !((a * a + b * b).sqrt() - 1.0).abs().lt(&1e-12) {
            return bad("build_dir", "must be a unit vector");
        }
        if !(self.delta > 0.0) {
            return bad("delta", "must be positive");
        }
        Ok(())
    }

    /// Cell gradients `(∂x φ̂, ∂y φ̂)`.
    pub fn field_gradient(&self, grid: &Grid, phi_hat: &[f64]) -> Vec<[f64; 2]> {
        (0..grid.len())
            .map(|p| {
                let (i, j) = grid.coords(p);
                let (il, ih) = stencil(i, grid.nx);
                let (jl, jh) = stencil(j, grid.ny);
                let gx = (phi_hat[grid.index(ih, j)] - phi_hat[grid.index(il, j)]) / ((ih - il) as f64 * grid.h);
                let gy = (phi_hat[grid.index(i, jh)] - phi_hat[grid.index(i, jl)]) / ((jh - jl) as f64 * grid.h);
                [gx, gy]
            })
            .collect()
    }

    /// Indicator value and its gradient with respect to `φ̂`.
    pub fn evaluate(&self, grid: &Grid, phi_hat: &[f64]) -> (f64, Vec<f64>) {
        let n = grid.len() as f64;
        let [nx, ny] = self.build_dir;
        let cos0 = self.theta0.cos();
        let k = self.gate_slope;
        let grads = self.field_gradient(grid, phi_hat);
        let mut value = 0.0;
        let mut dg = Vec::with_capacity(grads.len());
        for &[gx, gy] in &grads {
            let a = gx * nx + gy * ny;
            let s = (gx * gx + gy * gy + self.delta * self.delta).sqrt();
            let c = a / s;
            let sig = logistic(k * (c - cos0));
            value += sig * a;
            // ∂c/∂g = n/s − a g/s³
            let s3 = s * s * s;
            let dcx = nx / s - a * gx / s3;
            let dcy = ny / s - a * gy / s3;
            let w = sig * (1.0 - sig) * k * a;
            dg.push([(w * dcx + sig * nx) / n, (w * dcy + sig * ny) / n]);
        }
        let mut grad = vec![0.0; grid.len()];
        for (p, [dx, dy]) in dg.into_iter().enumerate() {
            let (i, j) = grid.coords(p);
            let (il, ih) = stencil(i, grid.nx);
            let (jl, jh) = stencil(j, grid.ny);
            let cx = dx / ((ih - il) as f64 * grid.h);
            let cy = dy / ((jh - jl) as f64 * grid.h);
            grad[grid.index(ih, j)] += cx;
            grad[grid.index(il, j)] -= cx;
            grad[grid.index(i, jh)] += cy;
            grad[grid.index(i, jl)] -= cy;
        }
        (value / n, grad)
    }
}
