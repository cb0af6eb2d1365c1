use log::debug;

use crate::active_set::{ActiveSet, ConstraintId, MultiplierVector};
use crate::config::ProjectionConfig;
use crate::constraints::ConstraintModel;
use crate::error::{PgdError, Result};
use crate::vector::{distance, scaled, DesignVector};

use super::{
    apply_multipliers, assemble_schur, detect_violations, linearize_constraints, most_binding,
    solve_multipliers, Linearization,
};

/// Outcome of one projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    /// `Δφ`, so that the projected point is `φ − Δφ`.
    pub delta_phi: DesignVector,
    pub active_set: ActiveSet,
    pub multipliers: MultiplierVector,
    /// Outer active-set iterations of the final (unrelaxed) attempt.
    pub outer_iterations: usize,
    /// Multiplier solves, across all attempts.
    pub solves: usize,
    /// Times the merit check failed.
    pub fallback_6_count: usize,
    /// Times the merit check failed again after reincorporating the stored set.
    pub fallback_6c_count: usize,
    pub zeta_relaxations: usize,
    /// Factor applied to `Δφ̃` by relaxation (`ζ^relaxations`).
    pub step_scale: f64,
    /// `‖Δφ̃ − Δφ^{o+1}‖` at the end of each outer iteration of the final attempt.
    pub merit_trace: Vec<f64>,
}

impl ProjectionResult {
    pub fn objective(&self, delta_tilde: &[f64]) -> f64 {
        let d = distance(&scaled(self.step_scale, delta_tilde), &self.delta_phi);
        0.5 * d * d
    }
}

/// Projects `φ − Δφ̃` onto the constraints linearized at `φ`.
pub fn project(
    delta_tilde: &[f64],
    phi: &[f64],
    model: &ConstraintModel,
    config: &ProjectionConfig,
) -> Result<ProjectionResult> {
    let lin = linearize_constraints(phi, model)?;
    project_linearized(delta_tilde, phi, model, &lin, config)
}

/// [`project`] with a precomputed linearization.
pub fn project_linearized(
    delta_tilde: &[f64],
    phi: &[f64],
    model: &ConstraintModel,
    lin: &Linearization,
    config: &ProjectionConfig,
) -> Result<ProjectionResult> {
    let k = model.dimension();
    if delta_tilde.len() != k || phi.len() != k {
        return Err(PgdError::DimensionMismatch {
            expected: k,
            got: if delta_tilde.len() != k { delta_tilde.len() } else { phi.len() },
        });
    }
    let mut solver = ActiveSetSolver {
        phi,
        model,
        lin,
        config,
        limit: config
            .max_iterations
            .unwrap_or(100 * (model.n_globals() + k))
            .max(1),
        sub_iterations: 0,
        solves: 0,
        fallback_6: 0,
        fallback_6c: 0,
    };

    let mut scale = 1.0;
    let mut relaxations = 0;
    loop {
        let dt = scaled(scale, delta_tilde);
        match solver.run(&dt)? {
            Attempt::Done(done) => {
                return Ok(ProjectionResult {
                    delta_phi: done.delta.into(),
                    active_set: done.active,
                    multipliers: done.multipliers,
                    outer_iterations: done.outer_iterations,
                    solves: solver.solves,
                    fallback_6_count: solver.fallback_6,
                    fallback_6c_count: solver.fallback_6c,
                    zeta_relaxations: relaxations,
                    step_scale: scale,
                    merit_trace: done.merit_trace,
                })
            }
            Attempt::Overfull => {
                relaxations += 1;
                if relaxations > config.max_relaxations {
                    return Err(PgdError::RelaxationLimit {
                        limit: config.max_relaxations,
                    });
                }
                scale *= config.zeta;
                debug!("active set exceeds dimension {k}; relaxing step to scale {scale:e}");
            }
        }
    }
}

struct Done {
    delta: Vec<f64>,
    active: ActiveSet,
    multipliers: MultiplierVector,
    outer_iterations: usize,
    merit_trace: Vec<f64>,
}

enum Attempt {
    Done(Done),
    /// More active constraints than variables; the step must be relaxed.
    Overfull,
}

struct ActiveSetSolver<'a> {
    phi: &'a [f64],
    model: &'a ConstraintModel,
    lin: &'a Linearization,
    config: &'a ProjectionConfig,
    limit: usize,
    sub_iterations: usize,
    solves: usize,
    fallback_6: usize,
    fallback_6c: usize,
}

impl ActiveSetSolver<'_> {
    fn solve(&mut self, active: &ActiveSet, dt: &[f64]) -> Result<(MultiplierVector, Vec<f64>)> {
        self.solves += 1;
        let blocks = assemble_schur(active, self.lin, dt, self.phi, self.model);
        let y = solve_multipliers(&blocks, self.config.pivot_tol)?;
        let delta = apply_multipliers(dt, &y, self.lin);
        Ok((y, delta))
    }

    fn tick(&mut self) -> Result<()> {
        self.sub_iterations += 1;
        if self.sub_iterations > self.limit {
            return Err(PgdError::IterationLimit { limit: self.limit });
        }
        Ok(())
    }

    fn is_inequality(&self, id: ConstraintId) -> bool {
        !matches!(id, ConstraintId::Global(j) if j < self.model.n_equalities())
    }

    fn run(&mut self, dt: &[f64]) -> Result<Attempt> {
        let k = self.model.dimension();
        let neg_tol = self.config.negative_multiplier_tol;
        let slack = self.config.merit_slack;

        // Seed with the equalities and start from the unprojected step.
        let mut active = ActiveSet::new(k, self.model.n_globals(), self.model.n_equalities());
        let mut delta = dt.to_vec();
        let mut merit_prev = 0.0;
        let mut merit_trace = Vec::new();
        let mut outer = 0;

        loop {
            outer += 1;
            self.tick()?;
            let previous = active.clone();
            let mut stored = previous.clone();
            let mut journal: Vec<ConstraintId> = Vec::new();
            let mut changed = false;

            // Bulk-add everything broken along the current update.
            for id in detect_violations(
                self.phi,
                &delta,
                self.model,
                self.lin,
                self.config.violation_tol,
            ) {
                changed |= active.insert(id);
            }

            if active.len() > k {
                return Ok(Attempt::Overfull);
            }

            let (y, candidate) = loop {
                self.tick()?;
                let (mut y, mut candidate) = self.solve(&active, dt)?;

                if distance(dt, &candidate) + slack < merit_prev {
                    // Merit decreased: some constraint of the previous set is broken.
                    self.fallback_6 += 1;
                    for id in stored.local_to_global() {
                        changed |= active.insert(id);
                    }
                    (y, candidate) = self.solve(&active, dt)?;

                    if distance(dt, &candidate) + slack >= merit_prev {
                        if let Some((id, v)) = y.min_inequality(self.model.n_equalities()) {
                            if v < -neg_tol {
                                active.remove(id);
                                if stored.remove(id) {
                                    journal.push(id);
                                }
                                changed = true;
                                continue;
                            }
                        }
                    } else {
                        self.fallback_6c += 1;
                        let broken: Vec<ConstraintId> = journal
                            .iter()
                            .copied()
                            .filter(|&id| {
                                !active.contains(id)
                                    && super::linearized_excess(
                                        id, self.phi, &candidate, self.model, self.lin,
                                    ) > self.config.violation_tol
                            })
                            .collect();
                        if let Some(id) =
                            most_binding(&broken, self.phi, &candidate, self.model, self.lin)
                        {
                            active.insert(id);
                            stored.insert(id);
                            journal.retain(|&j| j != id);
                            changed = true;
                            continue;
                        }
                        debug!("merit check failed with no broken journal constraint; accepting");
                    }
                }

                // Bulk-remove negative multipliers, newly added constraints first.
                let negatives: Vec<ConstraintId> = y
                    .iter()
                    .filter(|&(id, v)| v < -neg_tol && self.is_inequality(id))
                    .map(|(id, _)| id)
                    .collect();
                if !negatives.is_empty() {
                    let fresh: Vec<ConstraintId> = negatives
                        .iter()
                        .copied()
                        .filter(|&id| !previous.contains(id))
                        .collect();
                    let removal = if fresh.is_empty() { negatives } else { fresh };
                    active.remove_all(&removal);
                    changed = true;
                    continue;
                }
                break (y, candidate);
            };

            delta = candidate;
            merit_prev = distance(dt, &delta);
            merit_trace.push(merit_prev);

            // The pinned equalities can move the step onto constraints that
            // were satisfied by the unprojected one.
            let settled = !changed
                && detect_violations(
                    self.phi,
                    &delta,
                    self.model,
                    self.lin,
                    self.config.violation_tol,
                )
                .into_iter()
                .all(|id| active.contains(id));
            if settled {
                return Ok(Attempt::Done(Done {
                    delta,
                    active,
                    multipliers: y,
                    outer_iterations: outer,
                    merit_trace,
                }));
            }
        }
    }
}
