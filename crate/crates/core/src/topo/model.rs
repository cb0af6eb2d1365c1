//! Design field to cost and constraint values, with adjoint gradients.

use std::sync::Arc;

use super::filter::HelmholtzFilter;
use super::grid::Grid;
use super::heat::{conductivity_sensitivity, mean_temperature, solve_heat};
use super::material::{heaviside, MaterialModel};
use super::overhang::OverhangModel;
use crate::constraints::{ConstraintModel, Evaluation, ScalarFunction, UnivariateBounds};
use crate::error::{PgdError, Result};
use crate::problem::Problem;

/// `φ → φ̂ → φ̄` for one design.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTriple {
    pub phi: Vec<f64>,
    pub phi_hat: Vec<f64>,
    pub phi_bar: Vec<f64>,
    /// `dφ̄/dφ̂` per cell.
    pub slope: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TopoModel {
    pub grid: Grid,
    pub material: MaterialModel,
    pub overhang: OverhangModel,
    pub source: f64,
    filter: HelmholtzFilter,
}

impl TopoModel {
    pub fn new(grid: Grid, material: MaterialModel, overhang: OverhangModel, source: f64) -> Result<Self> {
        material.validate()?;
        overhang.validate()?;
        if !source.is_finite() {
            return Err(PgdError::InvalidParameter {
                name: "source",
                reason: "must be finite".into(),
            });
        }
        let filter = HelmholtzFilter::new(&grid, material.filter_radius_cells * grid.h)?;
        Ok(Self {
            grid,
            material,
            overhang,
            source,
            filter,
        })
    }

    /// Same grid and filter, new penalization.
    pub fn with_penalty(&self, simp_b: f64, lambda: f64) -> Result<Self> {
        let material = MaterialModel {
            simp_b,
            heaviside_lambda: lambda,
            ..self.material
        };
        material.validate()?;
        Ok(Self {
            material,
            ..self.clone()
        })
    }

    pub fn filter(&self, phi: &[f64]) -> Result<Vec<f64>> {
        self.filter.apply(phi)
    }

    pub fn fields(&self, phi: &[f64]) -> Result<FieldTriple> {
        let phi_hat = self.filter.apply(phi)?;
        let (phi_bar, slope) = phi_hat
            .iter()
            .map(|&x| heaviside(x, self.material.heaviside_lambda))
            .unzip();
        Ok(FieldTriple {
            phi: phi.to_vec(),
            phi_hat,
            phi_bar,
            slope,
        })
    }

    pub fn conductivity(&self, fields: &FieldTriple) -> (Vec<f64>, Vec<f64>) {
        fields.phi_bar.iter().map(|&x| self.material.simp(x)).unzip()
    }

    /// Temperature field of a design.
    pub fn temperature(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let f = self.fields(phi)?;
        let (kappa, _) = self.conductivity(&f);
        Ok(solve_heat(&self.grid, &kappa, self.source)?.temperature)
    }

    /// Mean temperature and its gradient with respect to `φ`.
    pub fn cost(&self, phi: &[f64]) -> Result<Evaluation> {
        let f = self.fields(phi)?;
        let (kappa, dkappa) = self.conductivity(&f);
        let heat = solve_heat(&self.grid, &kappa, self.source)?;
        let n = self.grid.len();
        let adjoint = heat.solve_again(&vec![1.0 / n as f64; n])?;
        let dk = conductivity_sensitivity(&self.grid, &kappa, &heat.temperature, &adjoint);
        let d_hat: Vec<f64> = (0..n).map(|p| dk[p] * dkappa[p] * f.slope[p]).collect();
        Ok(Evaluation {
            value: mean_temperature(&heat.temperature),
            gradient: self.filter.apply(&d_hat)?,
        })
    }

    /// `mean(φ̄)`.
    pub fn volume(&self, phi: &[f64]) -> Result<Evaluation> {
        let f = self.fields(phi)?;
        let n = self.grid.len() as f64;
        let d_hat: Vec<f64> = f.slope.iter().map(|s| s / n).collect();
        Ok(Evaluation {
            value: f.phi_bar.iter().sum::<f64>() / n,
            gradient: self.filter.apply(&d_hat)?,
        })
    }

    pub fn overhang_indicator(&self, phi: &[f64]) -> Result<Evaluation> {
        let phi_hat = self.filter.apply(phi)?;
        let (value, d_hat) = self.overhang.evaluate(&self.grid, &phi_hat);
        Ok(Evaluation {
            value,
            gradient: self.filter.apply(&d_hat)?,
        })
    }
}

/// Limits for the demo constraints: `(bound, tolerance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopoLimits {
    pub volume: (f64, f64),
    pub overhang: Option<(f64, f64)>,
}

/// Cost, `mean(φ̄) ≤ a0` and optionally the overhang limit, with `φ ∈ [0, 1]`.
pub fn topo_problem(model: &Arc<TopoModel>, limits: TopoLimits) -> Result<Problem> {
    let n = model.grid.len();
    let m = Arc::clone(model);
    let cost: Arc<dyn ScalarFunction> = Arc::new(move |phi: &[f64]| m.cost(phi));
    let m = Arc::clone(model);
    let volume: Arc<dyn ScalarFunction> = Arc::new(move |phi: &[f64]| m.volume(phi));
    let mut constraints = ConstraintModel::new(UnivariateBounds::uniform(n, 0.0, 1.0)?)
        .with_inequality(volume, limits.volume.0, limits.volume.1)?;
    if let Some((a1, eps1)) = limits.overhang {
        let m = Arc::clone(model);
        let over: Arc<dyn ScalarFunction> = Arc::new(move |phi: &[f64]| m.overhang_indicator(phi));
        constraints = constraints.with_inequality(over, a1, eps1)?;
    }
    Ok(Problem::new(cost, constraints))
}
