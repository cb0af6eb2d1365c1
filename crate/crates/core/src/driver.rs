//! Outer inertial PGD loop with the post-projection step adjustment.

use log::{debug, trace};

use crate::active_set::ActiveSet;
use crate::config::{DecompositionScope, HResetMode, InertiaScale, OptimizerConfig, PostGammaFeasibility};
use crate::constraints::{ConstraintModel, UnivariateBounds};
use crate::error::{PgdError, Result};
use crate::problem::Problem;
use crate::projection::{linearize_constraints, project_linearized, Linearization};
use crate::state::{IterationRecord, OptimizerState};
use crate::vector::{distance, dot, norm2, norm_inf, sub, DesignVector};

/// Below this ratio of the original norm a Gram–Schmidt residual is dropped.
const GS_DROP: f64 = 1e-12;
/// Relative threshold under which position or gradient differences count as zero.
const TINY: f64 = 1e-14;
const MAX_SAFEGUARD_RETRIES: usize = 30;

/// `L = ‖∇C_n − ∇C_{n−1}‖ / ‖φ_n − φ_{n−1}‖`, or `previous` when the step is negligible.
pub fn lipschitz_estimate(
    grad_n: &[f64],
    grad_prev: &[f64],
    phi_n: &[f64],
    phi_prev: &[f64],
    previous: Option<f64>,
) -> Option<f64> {
    let dx = distance(phi_n, phi_prev);
    if dx < TINY * (1.0 + norm2(phi_n)) {
        return previous;
    }
    Some(distance(grad_n, grad_prev) / dx)
}

/// Conservative first step: `fraction · min(e − d) / ‖∇C‖∞`.
///
/// Variables with a zero-width box are ignored; without any finite box a
/// unit width is used.
pub fn first_alpha(grad: &[f64], bounds: &UnivariateBounds, fraction: f64) -> Result<f64> {
    let g = norm_inf(grad);
    if g == 0.0 {
        return Err(PgdError::ZeroGradient);
    }
    let width = bounds
        .lower()
        .iter()
        .zip(bounds.upper())
        .map(|(d, e)| e - d)
        .filter(|w| w.is_finite() && *w > 0.0)
        .reduce(f64::min)
        .unwrap_or(1.0);
    Ok(fraction * width / g)
}

/// `α = 1/L`. A missing or degenerate estimate keeps `previous`.
pub fn compute_alpha(lipschitz: Option<f64>, previous: f64) -> f64 {
    match lipschitz {
        Some(l) if l > 0.0 && (1.0 / l).is_finite() => 1.0 / l,
        _ => previous,
    }
}

/// `β = β̂ α ‖∇C‖ / ‖φ_n − φ_{n−1}‖`; zero without history.
pub fn compute_beta(
    beta_hat: f64,
    alpha: f64,
    grad: &[f64],
    phi_n: &[f64],
    phi_prev: Option<&[f64]>,
) -> f64 {
    let Some(phi_prev) = phi_prev else {
        return 0.0;
    };
    let dx = distance(phi_n, phi_prev);
    if beta_hat == 0.0 || dx < TINY * (1.0 + norm2(phi_n)) {
        return 0.0;
    }
    beta_hat * alpha * norm2(grad) / dx
}

/// `∂L/∂φ ≈ Δφ/α`
pub fn lagrangian_gradient_estimate(delta_phi: &[f64], alpha: f64) -> Vec<f64> {
    delta_phi.iter().map(|d| d / alpha).collect()
}

/// `γ = ‖φ_n − φ_{n−1}‖ / ‖∂L_n/∂φ − ∂L_{n−1}/∂φ‖`, clamped to `cap·α`.
///
/// Returns `α` without history or when the denominator underflows.
pub fn compute_gamma(
    lag_n: &[f64],
    lag_prev: Option<&[f64]>,
    phi_n: &[f64],
    phi_prev: Option<&[f64]>,
    alpha: f64,
    cap: f64,
) -> f64 {
    let (Some(lag_prev), Some(phi_prev)) = (lag_prev, phi_prev) else {
        return alpha;
    };
    let denom = distance(lag_n, lag_prev);
    if denom < TINY * (1.0 + norm2(lag_n)) {
        return alpha;
    }
    (distance(phi_n, phi_prev) / denom).min(cap * alpha)
}

/// `Δφ = Δφ∥ + Δφ⊥` with `Δφ∥` in the span of the scope gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDecomposition {
    pub parallel: Vec<f64>,
    pub orthogonal: Vec<f64>,
}

/// Orthonormal basis of the span of `vectors` by modified Gram–Schmidt
/// with one reorthogonalization pass.
fn orthonormal_basis<'a>(vectors: impl IntoIterator<Item = &'a [f64]>) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for g in vectors {
        let n0 = norm2(g);
        if n0 == 0.0 || !n0.is_finite() {
            continue;
        }
        let mut v = g.to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
            }
        }
        let n = norm2(&v);
        if n < GS_DROP * n0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v);
    }
    basis
}

fn split(delta: &[f64], basis: &[Vec<f64>]) -> StepDecomposition {
    let mut orthogonal = delta.to_vec();
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &orthogonal);
            orthogonal.iter_mut().zip(q).for_each(|(r, qi)| *r -= c * qi);
        }
    }
    let parallel = sub(delta, &orthogonal);
    StepDecomposition { parallel, orthogonal }
}

/// Splits `delta` against an arbitrary list of gradients.
pub fn decompose(delta: &[f64], gradients: &[&[f64]]) -> StepDecomposition {
    split(delta, &orthonormal_basis(gradients.iter().copied()))
}

/// [`decompose`] for a scope made of `gradients` plus the unit vectors of
/// the variables in `bound_vars`.
///
/// The unit vectors are orthonormal already, so their coordinates go to
/// `Δφ∥` directly and only the masked gradients need Gram–Schmidt.
pub fn decompose_with_bounds(delta: &[f64], gradients: &[&[f64]], bound_vars: &[usize]) -> StepDecomposition {
    let mut mask = vec![false; delta.len()];
    for &i in bound_vars {
        mask[i] = true;
    }
    let masked = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(&mask)
            .map(|(x, m)| if *m { 0.0 } else { *x })
            .collect()
    };
    let masked_grads: Vec<Vec<f64>> = gradients.iter().map(|g| masked(g)).collect();
    let basis = orthonormal_basis(masked_grads.iter().map(|g| g.as_slice()));
    let mut d = split(&masked(delta), &basis);
    for i in 0..delta.len() {
        if mask[i] {
            d.parallel[i] = delta[i];
            d.orthogonal[i] = 0.0;
        }
    }
    d
}

/// Decomposition over the configured scope.
pub fn decompose_in_scope(
    delta: &[f64],
    active: &ActiveSet,
    lin: &Linearization,
    scope: DecompositionScope,
) -> StepDecomposition {
    let grads: Vec<&[f64]> = match scope {
        DecompositionScope::ActiveSetOnly => active
            .globals()
            .iter()
            .map(|&j| lin.gradients[j].as_slice())
            .collect(),
        DecompositionScope::AllConstraints => lin.gradients.iter().map(|g| g.as_slice()).collect(),
    };
    let vars: Vec<usize> = active.bounds().iter().map(|&(i, _)| i).collect();
    decompose_with_bounds(delta, &grads, &vars)
}

/// Consecutive-breakage counter `h`.
pub fn update_broken_counter(h: usize, any_broken: bool, mode: HResetMode) -> usize {
    match (any_broken, mode) {
        (true, _) => h + 1,
        (false, HResetMode::Decrement) => h.saturating_sub(1),
        (false, HResetMode::Reset) => 0,
    }
}

/// Multipliers applied to `Δφ∥` and `Δφ⊥`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateCoefficients {
    pub parallel: f64,
    pub orthogonal: f64,
}

pub fn update_coefficients(alpha: f64, gamma: f64, mu: f64, h: usize, feasible: bool) -> UpdateCoefficients {
    let ratio = gamma / alpha;
    let relax = mu.powi(h as i32);
    UpdateCoefficients {
        parallel: if feasible { ratio.min(1.0) } else { 1.0 },
        orthogonal: relax * ratio,
    }
}

/// `φ − c∥ Δφ∥ − c⊥ Δφ⊥`, before bound restoration.
pub fn apply_update(phi: &[f64], decomposition: &StepDecomposition, coefficients: UpdateCoefficients) -> Vec<f64> {
    phi.iter()
        .zip(&decomposition.parallel)
        .zip(&decomposition.orthogonal)
        .map(|((p, dp), dq)| p - coefficients.parallel * dp - coefficients.orthogonal * dq)
        .collect()
}

/// Brings `candidate` back inside the box, by clipping or by projecting the
/// step `φ − candidate` again at `phi`.
pub fn restore_feasibility(
    candidate: Vec<f64>,
    phi: &[f64],
    model: &ConstraintModel,
    lin: &Linearization,
    config: &OptimizerConfig,
) -> Result<Vec<f64>> {
    match config.post_gamma_feasibility {
        PostGammaFeasibility::Clip => {
            let mut c = candidate;
            model.bounds().clip(&mut c);
            Ok(c)
        }
        PostGammaFeasibility::Reproject => {
            let step = sub(phi, &candidate);
            let r = project_linearized(&step, phi, model, lin, &config.projection)?;
            let mut c = sub(phi, &r.delta_phi);
            // roundoff only
            model.bounds().clip(&mut c);
            Ok(c)
        }
    }
}

/// One inertial PGD iteration from `state.phi_n`.
pub fn step(problem: &Problem, state: &mut OptimizerState, config: &OptimizerConfig) -> Result<IterationRecord> {
    let model = problem.constraints();
    let phi = state.phi_n.clone();
    let cost = problem.cost(&phi)?;
    let grad = cost.gradient;
    let lin = linearize_constraints(&phi, model)?;
    let phi_prev = state.phi_prev.as_deref();

    let lipschitz = match (&state.grad_prev, phi_prev) {
        (Some(gp), Some(pp)) => lipschitz_estimate(&grad, gp, &phi, pp, state.lipschitz),
        _ => state.lipschitz,
    };
    let base_alpha = if state.iteration == 0 {
        first_alpha(&grad, model.bounds(), config.first_step_fraction)?
    } else {
        compute_alpha(lipschitz, state.alpha)
    };

    let broken = model
        .globals()
        .iter()
        .zip(&lin.values)
        .any(|(c, &v)| c.is_broken(v));
    let h = update_broken_counter(state.h, broken, config.h_reset_mode);

    let inertia_grad: &[f64] = match (config.inertia_scale, &state.lagrangian_grad_prev) {
        (InertiaScale::LagrangianGradient, Some(lag)) => lag,
        _ => &grad,
    };

    let mut boost = 1.0;
    let mut retries = 0;
    loop {
        let alpha = base_alpha / boost;
        let beta = compute_beta(config.beta_hat, alpha, inertia_grad, &phi, phi_prev);
        let delta_tilde: Vec<f64> = match phi_prev {
            Some(pp) => (0..phi.len())
                .map(|i| alpha * grad[i] - beta * (phi[i] - pp[i]))
                .collect(),
            None => grad.iter().map(|g| alpha * g).collect(),
        };

        let proj = project_linearized(&delta_tilde, &phi, model, &lin, &config.projection)?;
        let alpha_eff = proj.step_scale * alpha;
        let lag = lagrangian_gradient_estimate(&proj.delta_phi, alpha_eff);
        let gamma = compute_gamma(
            &lag,
            state.lagrangian_grad_prev.as_deref(),
            &phi,
            phi_prev,
            alpha_eff,
            config.gamma_cap,
        );

        let decomposition = decompose_in_scope(&proj.delta_phi, &proj.active_set, &lin, config.decomposition_scope);
        let coefficients = update_coefficients(alpha_eff, gamma, config.mu, h, !broken);
        let candidate = apply_update(&phi, &decomposition, coefficients);
        let next = restore_feasibility(candidate.clone(), &phi, model, &lin, config)?;

        if config.monotone_safeguard && retries < MAX_SAFEGUARD_RETRIES {
            let next_cost = problem.cost(&next)?.value;
            if next_cost > cost.value {
                boost *= 2.0;
                retries += 1;
                debug!("iteration {}: cost rose to {next_cost:e}, doubling L", state.iteration);
                continue;
            }
        }

        let record = IterationRecord {
            iteration: state.iteration,
            cost: cost.value,
            constraint_values: lin.values.clone(),
            active_set_size: proj.active_set.len(),
            h,
            alpha,
            beta,
            gamma,
            step_scale: proj.step_scale,
            projected_gradient_norm: norm2(&proj.delta_phi) / alpha_eff,
            broken,
            clip_displacement: norm_inf(&sub(&next, &candidate)),
            outer_iterations: proj.outer_iterations,
            solves: proj.solves,
            fallback_6: proj.fallback_6_count,
            fallback_6c: proj.fallback_6c_count,
            relaxations: proj.zeta_relaxations,
            safeguard_retries: retries,
        };
        trace!("{record:?}");

        state.phi_prev = Some(phi);
        state.phi_n = DesignVector::from(next);
        state.grad_prev = Some(DesignVector::from(grad));
        state.lagrangian_grad_prev = Some(DesignVector::from(lag));
        state.alpha = alpha;
        state.beta = beta;
        state.gamma = gamma;
        state.lipschitz = lipschitz.map(|l| l * boost);
        state.h = h;
        state.iteration += 1;
        state.history.push(record.clone());
        return Ok(record);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    CostTolerance,
    ProjectedGradient,
    /// The projected step vanished, or the start had a zero gradient.
    Stationary,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub records: Vec<IterationRecord>,
    pub phi: DesignVector,
    pub cost: f64,
    pub stop: StopReason,
    pub state: OptimizerState,
}

/// Runs [`step`] until a stopping rule fires.
pub fn optimize(problem: &Problem, initial: &[f64], config: &OptimizerConfig) -> Result<History> {
    config.validate()?;
    let k = problem.dimension();
    if initial.len() != k {
        return Err(PgdError::DimensionMismatch {
            expected: k,
            got: initial.len(),
        });
    }
    let phi0 = DesignVector::new(initial.to_vec())?;
    if !problem.bounds().contains(&phi0) {
        return Err(PgdError::InvalidParameter {
            name: "initial",
            reason: "starting point lies outside the bounds".into(),
        });
    }

    let start = problem.cost(&phi0)?;
    if norm_inf(&start.gradient) == 0.0 {
        let values = problem.constraints().evaluate(&phi0)?;
        let record = IterationRecord {
            iteration: 0,
            cost: start.value,
            broken: problem
                .constraints()
                .globals()
                .iter()
                .zip(&values)
                .any(|(c, e)| c.is_broken(e.value)),
            constraint_values: values.into_iter().map(|e| e.value).collect(),
            active_set_size: problem.constraints().n_equalities(),
            h: 0,
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            step_scale: 1.0,
            projected_gradient_norm: 0.0,
            clip_displacement: 0.0,
            outer_iterations: 0,
            solves: 0,
            fallback_6: 0,
            fallback_6c: 0,
            relaxations: 0,
            safeguard_retries: 0,
        };
        let mut state = OptimizerState::new(phi0.clone());
        state.history.push(record.clone());
        return Ok(History {
            records: vec![record],
            phi: phi0,
            cost: start.value,
            stop: StopReason::Stationary,
            state,
        });
    }

    let mut state = OptimizerState::new(phi0);
    let mut stop = StopReason::MaxIterations;
    for _ in 0..config.max_iterations {
        let rec = step(problem, &mut state, config)?;
        if rec.projected_gradient_norm == 0.0 {
            stop = StopReason::Stationary;
            break;
        }
        if config.pg_tol.is_some_and(|tol| rec.projected_gradient_norm < tol) {
            stop = StopReason::ProjectedGradient;
            break;
        }
        if let (Some(tol), [.., before, last]) = (config.cost_rel_tol, state.history.as_slice()) {
            let change = (last.cost - before.cost).abs();
            let scale = before.cost.abs();
            let rel = if scale > 0.0 { change / scale } else { change };
            if rel < tol {
                stop = StopReason::CostTolerance;
                break;
            }
        }
    }
    let cost = problem.cost(&state.phi_n)?.value;
    Ok(History {
        records: state.history.clone(),
        phi: state.phi_n.clone(),
        cost,
        stop,
        state,
    })
}
