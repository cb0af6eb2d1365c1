//! Exhaustive solver for small projection problems, used as ground truth.
//!
//! Every subset of inequality constraints (equalities always included) is
//! treated as an equality-constrained projection and solved through the full
//! dense KKT matrix. A subset whose solution is primal feasible with
//! nonnegative inequality multipliers is a KKT point of the whole problem and
//! therefore its unique optimum.

use nalgebra::{DMatrix, DVector};

use crate::active_set::{ConstraintId, Side};
use crate::constraints::{ConstraintKind, ConstraintModel};
use crate::error::{PgdError, Result};

/// Largest number of enumerated inequality constraints.
pub const MAX_ENUMERATED: usize = 20;

const FEAS_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub delta_phi: Vec<f64>,
    /// `½‖Δφ̃ − Δφ‖²`
    pub objective: f64,
    pub active: Vec<ConstraintId>,
    pub multipliers: Vec<f64>,
}

/// Row `n·Δφ ≥ c` (or `=` for equalities).
struct Row {
    id: ConstraintId,
    normal: Vec<f64>,
    rhs: f64,
    equality: bool,
}

/// Solves `min ½‖Δφ̃ − Δφ‖²` over the constraints of `model` linearized at `phi`.
pub fn solve_bruteforce(
    delta_tilde: &[f64],
    phi: &[f64],
    model: &ConstraintModel,
) -> Result<OracleResult> {
    let k = phi.len();
    let evals = model.evaluate(phi)?;

    // f − g·Δφ ≤ a  ⇔  g·Δφ ≥ f − a
    let mut equalities = Vec::new();
    let mut globals = Vec::new();
    for (c, e) in model.globals().iter().zip(evals) {
        let row = Row {
            id: ConstraintId::Global(c.id),
            normal: e.gradient,
            rhs: e.value - c.bound,
            equality: c.kind == ConstraintKind::Equality,
        };
        if row.equality {
            equalities.push(row);
        } else {
            globals.push(row);
        }
    }
    let bound_row = |i: usize, side: Side| -> Row {
        let mut normal = vec![0.0; k];
        normal[i] = side.sign();
        let rhs = match side {
            // φ_i − Δφ_i ≤ e_i  ⇔  Δφ_i ≥ φ_i − e_i
            Side::Upper => phi[i] - model.bounds().upper()[i],
            // φ_i − Δφ_i ≥ d_i  ⇔  −Δφ_i ≥ d_i − φ_i
            Side::Lower => model.bounds().lower()[i] - phi[i],
        };
        Row {
            id: ConstraintId::Bound(i, side),
            normal,
            rhs,
            equality: false,
        }
    };
    let all_bounds: Vec<Row> = (0..k)
        .flat_map(|i| [Side::Lower, Side::Upper].map(|s| (i, s)))
        .filter(|&(i, s)| bound_row(i, s).rhs.is_finite())
        .map(|(i, s)| bound_row(i, s))
        .collect();

    let violates = |row: &Row, x: &[f64]| -> bool {
        let v: f64 = row.normal.iter().zip(x).map(|(n, xi)| n * xi).sum();
        if row.equality {
            (v - row.rhs).abs() > FEAS_TOL
        } else {
            v < row.rhs - FEAS_TOL
        }
    };

    // Start from the bound sides violated by the unconstrained solution and
    // grow with sides violated by any enumerated candidate.
    let mut included: Vec<bool> = all_bounds.iter().map(|r| violates(r, delta_tilde)).collect();
    loop {
        let enumerated: Vec<&Row> = globals
            .iter()
            .chain(
                all_bounds
                    .iter()
                    .zip(&included)
                    .filter(|(_, inc)| **inc)
                    .map(|(r, _)| r),
            )
            .collect();
        if enumerated.len() > MAX_ENUMERATED {
            return Err(PgdError::TooManyConstraints {
                count: enumerated.len(),
                limit: MAX_ENUMERATED,
            });
        }

        let mut best: Option<OracleResult> = None;
        let mut seen_violations = vec![false; all_bounds.len()];
        let n = enumerated.len();
        for mask in 0u32..(1u32 << n) {
            let subset: Vec<&Row> = equalities
                .iter()
                .chain((0..n).filter(|b| mask & (1 << b) != 0).map(|b| enumerated[b]))
                .collect();
            if subset.len() > k || has_opposite_sides(&subset) {
                continue;
            }
            let Some((x, lambda)) = solve_equality_projection(delta_tilde, &subset) else {
                continue;
            };
            let mut feasible = true;
            for row in equalities.iter().chain(&globals) {
                if violates(row, &x) {
                    feasible = false;
                }
            }
            for (b, row) in all_bounds.iter().enumerate() {
                if violates(row, &x) {
                    feasible = false;
                    seen_violations[b] = true;
                }
            }
            let dual_ok = subset
                .iter()
                .zip(&lambda)
                .all(|(row, l)| row.equality || *l >= -DUAL_TOL);
            if !(feasible && dual_ok) {
                continue;
            }
            let objective = 0.5
                * x.iter()
                    .zip(delta_tilde)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            if best.as_ref().is_none_or(|b| objective < b.objective) {
                best = Some(OracleResult {
                    delta_phi: x,
                    objective,
                    active: subset.iter().map(|r| r.id).collect(),
                    multipliers: lambda,
                });
            }
        }

        if let Some(best) = best {
            return Ok(best);
        }
        let mut grew = false;
        for (inc, seen) in included.iter_mut().zip(&seen_violations) {
            if *seen && !*inc {
                *inc = true;
                grew = true;
            }
        }
        if !grew {
            return Err(PgdError::InfeasibleProblem(
                "no constraint subset yields a feasible KKT point".into(),
            ));
        }
    }
}

fn has_opposite_sides(subset: &[&Row]) -> bool {
    let mut vars: Vec<usize> = subset
        .iter()
        .filter_map(|r| match r.id {
            ConstraintId::Bound(i, _) => Some(i),
            _ => None,
        })
        .collect();
    let n = vars.len();
    vars.sort_unstable();
    vars.dedup();
    vars.len() != n
}

/// Solves `[I −Nᵗ; N 0][x; λ] = [x̃; c]`. Returns `None` when the rows are
/// linearly dependent.
fn solve_equality_projection(target: &[f64], rows: &[&Row]) -> Option<(Vec<f64>, Vec<f64>)> {
    let k = target.len();
    let s = rows.len();
    if s > 0 {
        let n = DMatrix::from_fn(s, k, |r, c| rows[r].normal[c]);
        let sv = n.singular_values();
        let max = sv.max();
        if !(sv.min() > 1e-10 * max.max(1.0)) {
            return None;
        }
    }
    let dim = k + s;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for i in 0..k {
        kkt[(i, i)] = 1.0;
        rhs[i] = target[i];
    }
    for (r, row) in rows.iter().enumerate() {
        for c in 0..k {
            kkt[(c, k + r)] = -row.normal[c];
            kkt[(k + r, c)] = row.normal[c];
        }
        rhs[k + r] = row.rhs;
    }
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((
        sol.rows(0, k).iter().copied().collect(),
        sol.rows(k, s).iter().copied().collect(),
    ))
}
