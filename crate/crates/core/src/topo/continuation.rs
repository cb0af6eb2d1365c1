//! The `(b, λ)` continuation schedule and the demo configuration.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::material::MaterialModel;
use super::model::{topo_problem, TopoLimits, TopoModel};
use super::overhang::OverhangModel;
use crate::config::OptimizerConfig;
use crate::driver::{optimize, StopReason};
use crate::error::{PgdError, Result};

/// Penalty schedule `(b, λ)` per loop.
pub const DEFAULT_SCHEDULE: [[f64; 2]; 8] = [
    [1.0, 1.0],
    [2.0, 2.0],
    [3.0, 4.0],
    [3.0, 8.0],
    [3.0, 16.0],
    [3.0, 32.0],
    [3.0, 64.0],
    [3.0, 128.0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub nx: usize,
    pub ny: usize,
    /// Bottom cells `[start, end)` held at zero temperature; central tenth if absent.
    pub sink: Option<[usize; 2]>,
    pub source: f64,
    /// Volume bound `a0`.
    pub volume_fraction: f64,
    pub enable_overhang: bool,
    /// Overhang bound `a1`; derived from an unconstrained run if absent.
    pub overhang_limit: Option<f64>,
    /// `a1` as a fraction of the unconstrained run's final indicator.
    pub overhang_fraction: f64,
    /// Constraint tolerance as a fraction of the bound.
    pub tolerance_fraction: f64,
    pub max_cycles: usize,
    pub cost_rel_tol: f64,
    pub schedule: Vec<[f64; 2]>,
    pub material: MaterialModel,
    pub overhang: OverhangModel,
    pub optimizer: OptimizerConfig,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            nx: 32,
            ny: 32,
            sink: None,
            source: 1.0,
            volume_fraction: 0.3,
            enable_overhang: false,
            overhang_limit: None,
            overhang_fraction: 0.1,
            tolerance_fraction: 0.02,
            max_cycles: 50,
            cost_rel_tol: 1e-6,
            schedule: DEFAULT_SCHEDULE.to_vec(),
            material: MaterialModel::default(),
            overhang: OverhangModel::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> PgdError {
    PgdError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

impl DemoConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| invalid("config", e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.material.validate()?;
        self.overhang.validate()?;
        self.optimizer.validate()?;
        if !(self.volume_fraction > 0.0 && self.volume_fraction < 1.0) {
            return Err(invalid("volume_fraction", "must lie in (0, 1)"));
        }
        if let Some(a1) = self.overhang_limit {
            if !(a1 > 0.0 && a1.is_finite()) {
                return Err(invalid("overhang_limit", "must be positive"));
            }
        }
        if !(self.overhang_fraction > 0.0 && self.overhang_fraction.is_finite()) {
            return Err(invalid("overhang_fraction", "must be positive"));
        }
        if !(self.tolerance_fraction >= 0.0 && self.tolerance_fraction.is_finite()) {
            return Err(invalid("tolerance_fraction", "must be non-negative"));
        }
        if self.max_cycles == 0 {
            return Err(invalid("max_cycles", "must be positive"));
        }
        if !(self.cost_rel_tol >= 0.0) {
            return Err(invalid("cost_rel_tol", "must be non-negative"));
        }
        if self.schedule.is_empty() {
            return Err(invalid("schedule", "needs at least one (b, lambda) pair"));
        }
        for &[b, l] in &self.schedule {
            MaterialModel {
                simp_b: b,
                heaviside_lambda: l,
                ..self.material
            }
            .validate()?;
        }
        if !self.source.is_finite() {
            return Err(invalid("source", "must be finite"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = Grid::new(self.nx, self.ny)?;
        match self.sink {
            Some([a, b]) => g.with_sink(a..b),
            None => Ok(g),
        }
    }

    fn loop_optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            max_iterations: self.max_cycles,
            cost_rel_tol: Some(self.cost_rel_tol),
            ..self.optimizer.clone()
        }
    }
}

/// One optimization cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub stage: usize,
    pub b: f64,
    pub lambda: f64,
    pub cost: f64,
    pub volume: f64,
    /// Overhang indicator; `NaN` when the constraint is off.
    pub overhang: f64,
    pub h: usize,
    pub alpha: f64,
    pub gamma_ratio: f64,
    pub active_set_size: usize,
    pub solves: usize,
    pub broken: bool,
}

pub const CYCLE_CSV_HEADER: &str = "cycle,stage,b,lambda,cost,f0,f1,h,alpha,gamma_over_alpha,active_set_size,solves,broken";

/// State at the end of one `(b, λ)` loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageSummary {
    pub b: f64,
    pub lambda: f64,
    pub cycles: usize,
    pub stop: String,
    pub cost: f64,
    pub volume: f64,
    pub overhang: f64,
}

#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub grid: Grid,
    pub records: Vec<CycleRecord>,
    pub stages: Vec<StageSummary>,
    pub phi: Vec<f64>,
    pub phi_bar: Vec<f64>,
    /// Mean temperature of the uniform start under the first penalty pair.
    pub uniform_cost: f64,
    pub volume_limit: (f64, f64),
    pub overhang_limit: Option<(f64, f64)>,
    pub final_cost: f64,
    pub final_volume: f64,
    pub final_overhang: f64,
}

fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::CostTolerance => "cost-tolerance",
        StopReason::ProjectedGradient => "projected-gradient",
        StopReason::Stationary => "stationary",
        StopReason::MaxIterations => "max-cycles",
    }
}

fn run_schedule(base: &TopoModel, limits: TopoLimits, config: &DemoConfig) -> Result<ContinuationResult> {
    let n = base.grid.len();
    let opt = config.loop_optimizer();
    let [b0, l0] = config.schedule[0];
    let uniform = vec![config.volume_fraction; n];
    let uniform_cost = base.with_penalty(b0, l0)?.cost(&uniform)?.value;


    let mut phi = uniform;
    let mut records = Vec::new();
    let mut stages = Vec::new();
    let mut phi_bar = Vec::new();
    for (stage, &[b, lambda]) in config.schedule.iter().enumerate() {
        let model = Arc::new(base.with_penalty(b, lambda)?);
        let problem = topo_problem(&model, limits)?;
        let history = optimize(&problem, &phi, &opt)?;
        for r in &history.records {
            records.push(CycleRecord {
                cycle: records.len(),
                stage,
                b,
                lambda,
                cost: r.cost,
                volume: r.constraint_values[0],
                overhang: r.constraint_values.get(1).copied().unwrap_or(f64::NAN),
                h: r.h,
                alpha: r.alpha,
                gamma_ratio: r.gamma_ratio(),
                active_set_size: r.active_set_size,
                solves: r.solves,
                broken: r.broken,
            });
        }
        phi = history.phi.into_inner();
        stages.push(StageSummary {
            b,
            lambda,
            cycles: history.records.len(),
            stop: stop_name(history.stop).to_string(),
            cost: history.cost,
            volume: model.volume(&phi)?.value,
            overhang: model.overhang_indicator(&phi)?.value,
        });
        log::info!(
            "stage {stage} (b={b}, lambda={lambda}): {} cycles, cost {:.6e}",
            history.records.len(),
            history.cost
        );
        phi_bar = model.fields(&phi)?.phi_bar;
    }
    let end = stages.last().expect("schedule is non-empty");
    Ok(ContinuationResult {
        grid: base.grid.clone(),
        final_cost: end.cost,
        final_volume: end.volume,
        final_overhang: end.overhang,
        records,
        stages,
        phi,
        phi_bar,
        uniform_cost,
        volume_limit: limits.volume,
        overhang_limit: limits.overhang,
    })
}

/// Runs the whole schedule. With the overhang constraint on and no explicit
/// bound, a volume-only run comes first and fixes `a1`.
pub fn run_continuation(config: &DemoConfig) -> Result<ContinuationResult> {
    config.validate()?;
    let base = TopoModel::new(config.grid()?, config.material, config.overhang, config.source)?;
    let a0 = config.volume_fraction;
    let volume = (a0, config.tolerance_fraction * a0);
    let overhang = if config.enable_overhang {
        let a1 = match config.overhang_limit {
            Some(a1) => a1,
            None => {
                let free = run_schedule(&base, TopoLimits { volume, overhang: None }, config)?;
                let a1 = config.overhang_fraction * free.final_overhang;
                if !(a1 > 0.0) {
                    return Err(PgdError::InfeasibleProblem(format!(
                        "unconstrained design has overhang indicator {:e}; cannot derive a limit",
                        free.final_overhang
                    )));
                }
                a1
            }
        };
        Some((a1, config.tolerance_fraction * a1))
    } else {
        None
    };
    run_schedule(&base, TopoLimits { volume, overhang }, config)
}

pub fn cycle_csv(records: &[CycleRecord]) -> String {
    let mut out = String::from(CYCLE_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.10e},{:.10e},{:.10e},{},{:.6e},{:.6},{},{},{}",
            r.cycle,
            r.stage,
            r.b,
            r.lambda,
            r.cost,
            r.volume,
            r.overhang,
            r.h,
            r.alpha,
            r.gamma_ratio,
            r.active_set_size,
            r.solves,
            r.broken
        );
    }
    out
}

/// Whitespace-separated matrix, top row first.
pub fn field_dump(grid: &Grid, field: &[f64]) -> String {
    let mut out = String::new();
    for j in (0..grid.ny).rev() {
        let row: Vec<String> = (0..grid.nx)
            .map(|i| format!("{:.6}", field[grid.index(i, j)]))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
