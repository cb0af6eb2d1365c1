//! Projection of a trial step onto the linearized feasible set.
//!
//! Solves `min ½‖Δφ̃ − Δφ‖²` subject to the constraints linearized at `φ`,
//! with an infeasible active-set loop that adds and removes constraints in
//! bulk and falls back to single-constraint moves when the merit stalls.

mod schur;
mod solver;

pub use schur::{assemble_schur, solve_multipliers, SchurBlocks};
pub use solver::{project, project_linearized, ProjectionResult};

use crate::active_set::{ConstraintId, MultiplierVector, Side};
use crate::constraints::{ConstraintKind, ConstraintModel};
use crate::error::Result;
use crate::vector::{axpy, dot, norm2};

/// Constraint values and gradients at the linearization point.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub values: Vec<f64>,
    pub gradients: Vec<Vec<f64>>,
}

/// Evaluates every global constraint at `phi`. Bounds stay implicit.
pub fn linearize_constraints(phi: &[f64], model: &ConstraintModel) -> Result<Linearization> {
    let evals = model.evaluate(phi)?;
    let (values, gradients) = evals.into_iter().map(|e| (e.value, e.gradient)).unzip();
    Ok(Linearization { values, gradients })
}

/// Linearized excess `f_j − Δφ·∇f_j − a_j`, written for bounds as
/// `s·(φ_i − Δφ_i) − s·limit`.
pub fn linearized_excess(
    id: ConstraintId,
    phi: &[f64],
    delta_phi: &[f64],
    model: &ConstraintModel,
    lin: &Linearization,
) -> f64 {
    match id {
        ConstraintId::Global(j) => {
            lin.values[j] - dot(delta_phi, &lin.gradients[j]) - model.globals()[j].bound
        }
        ConstraintId::Bound(i, Side::Upper) => phi[i] - delta_phi[i] - model.bounds().upper()[i],
        ConstraintId::Bound(i, Side::Lower) => model.bounds().lower()[i] - (phi[i] - delta_phi[i]),
    }
}

fn gradient_norm(id: ConstraintId, lin: &Linearization) -> f64 {
    match id {
        ConstraintId::Global(j) => norm2(&lin.gradients[j]),
        ConstraintId::Bound(..) => 1.0,
    }
}

/// Every inequality (global or bound side) whose linearized excess at
/// `φ − Δφ` is above `tol`, in identifier order.
pub fn detect_violations(
    phi: &[f64],
    delta_phi: &[f64],
    model: &ConstraintModel,
    lin: &Linearization,
    tol: f64,
) -> Vec<ConstraintId> {
    let mut out = Vec::new();
    for c in model.globals() {
        if c.kind == ConstraintKind::Inequality {
            let id = ConstraintId::Global(c.id);
            if linearized_excess(id, phi, delta_phi, model, lin) > tol {
                out.push(id);
            }
        }
    }
    let (lower, upper) = (model.bounds().lower(), model.bounds().upper());
    for i in 0..phi.len() {
        let x = phi[i] - delta_phi[i];
        if x - upper[i] > tol {
            out.push(ConstraintId::Bound(i, Side::Upper));
        } else if lower[i] - x > tol {
            out.push(ConstraintId::Bound(i, Side::Lower));
        }
    }
    out
}

/// Candidate with the largest normalized violation
/// `(f_j − Δφ·∇f_j − a_j)/‖∇f_j‖`; ties go to the lowest identifier.
pub fn most_binding(
    candidates: &[ConstraintId],
    phi: &[f64],
    delta_phi: &[f64],
    model: &ConstraintModel,
    lin: &Linearization,
) -> Option<ConstraintId> {
    let mut best: Option<(ConstraintId, f64)> = None;
    for &id in candidates {
        let norm = gradient_norm(id, lin).max(f64::MIN_POSITIVE);
        let ratio = linearized_excess(id, phi, delta_phi, model, lin) / norm;
        best = match best {
            Some((bid, br)) if br > ratio || (br == ratio && bid < id) => Some((bid, br)),
            _ => Some((id, ratio)),
        };
    }
    best.map(|(id, _)| id)
}

/// `Δφ = Δφ̃ + Σ y_j ∇f_j`, with signed unit vectors for bounds.
pub fn apply_multipliers(
    delta_tilde: &[f64],
    multipliers: &MultiplierVector,
    lin: &Linearization,
) -> Vec<f64> {
    let mut out = delta_tilde.to_vec();
    for (&j, &y) in multipliers.globals.iter().zip(&multipliers.y1) {
        axpy(y, &lin.gradients[j], &mut out);
    }
    for (&(i, side), &y) in multipliers.bounds.iter().zip(&multipliers.y2) {
        out[i] += y * side.sign();
    }
    out
}

/// KKT residuals of a projection at the returned point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `‖Δφ − Δφ̃ − Σ y_j ∇f_j‖`
    pub stationarity: f64,
    /// Largest equality mismatch or inequality excess, bounds included.
    pub primal: f64,
    /// Smallest inequality multiplier (0 when none are active).
    pub min_multiplier: f64,
    /// Largest `|excess·y|` over active inequalities.
    pub complementarity: f64,
}

pub fn kkt_report(
    delta_tilde: &[f64],
    phi: &[f64],
    model: &ConstraintModel,
    lin: &Linearization,
    result: &ProjectionResult,
) -> KktReport {
    let delta = &result.delta_phi;
    let rebuilt = apply_multipliers(delta_tilde, &result.multipliers, lin);
    let stationarity = crate::vector::distance(delta, &rebuilt);

    let mut primal: f64 = 0.0;
    for c in model.globals() {
        let e = linearized_excess(ConstraintId::Global(c.id), phi, delta, model, lin);
        primal = primal.max(match c.kind {
            ConstraintKind::Equality => e.abs(),
            ConstraintKind::Inequality => e.max(0.0),
        });
    }
    for i in 0..phi.len() {
        for side in [Side::Lower, Side::Upper] {
            let e = linearized_excess(ConstraintId::Bound(i, side), phi, delta, model, lin);
            if e.is_finite() {
                primal = primal.max(e.max(0.0));
            }
        }
    }

    let n_eq = model.n_equalities();
    let mut min_multiplier: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for (id, y) in result.multipliers.iter() {
        if matches!(id, ConstraintId::Global(j) if j < n_eq) {
            continue;
        }
        min_multiplier = min_multiplier.min(y);
        let e = linearized_excess(id, phi, delta, model, lin);
        complementarity = complementarity.max((e * y).abs());
    }

    KktReport {
        stationarity,
        primal,
        min_multiplier,
        complementarity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::active_set::ActiveSet;
    use crate::constraints::{Evaluation, UnivariateBounds};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn halfspace() -> ConstraintModel {
        ConstraintModel::new(UnivariateBounds::unbounded(2))
            .with_linear_inequality(vec![1.0, 1.0], 1.0, 0.0)
            .unwrap()
    }

    #[test]
    fn linearize_linear_and_quadratic() {
        let model = ConstraintModel::new(UnivariateBounds::unbounded(2))
            .with_linear_inequality(vec![1.0, 1.0], 0.0, 0.0)
            .unwrap()
            .with_inequality(
                Arc::new(|p: &[f64]| {
                    Ok(Evaluation {
                        value: p[0] * p[0],
                        gradient: vec![2.0 * p[0], 0.0],
                    })
                }),
                0.0,
                0.0,
            )
            .unwrap();
        let lin = linearize_constraints(&[0.0, 0.0], &model).unwrap();
        assert_eq!(lin.values[0], 0.0);
        assert_eq!(lin.gradients[0], vec![1.0, 1.0]);
        let lin = linearize_constraints(&[2.0, 0.0], &model).unwrap();
        assert_eq!(lin.values[1], 4.0);
        assert_eq!(lin.gradients[1], vec![4.0, 0.0]);
    }

    #[test]
    fn linearized_gradient_matches_central_differences() {
        let f = |p: &[f64]| (p[0] * p[1]).sin() + p[2].exp() * p[0];
        let model = ConstraintModel::new(UnivariateBounds::unbounded(3))
            .with_inequality(
                Arc::new(move |p: &[f64]| {
                    Ok(Evaluation {
                        value: f(p),
                        gradient: vec![
                            p[1] * (p[0] * p[1]).cos() + p[2].exp(),
                            p[0] * (p[0] * p[1]).cos(),
                            p[2].exp() * p[0],
                        ],
                    })
                }),
                0.0,
                0.0,
            )
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lin = linearize_constraints(&p, &model).unwrap();
            for i in 0..3 {
                let h = 1e-6 * (1.0 + p[i].abs());
                let mut a = p.clone();
                let mut b = p.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (f(&a) - f(&b)) / (2.0 * h);
                let g = lin.gradients[0][i];
                assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0));
            }
        }
    }

    #[test]
    fn violation_detection() {
        let model = halfspace();
        let phi = [0.0, 0.0];
        let lin = linearize_constraints(&phi, &model).unwrap();
        assert_eq!(
            detect_violations(&phi, &[-2.0, 0.0], &model, &lin, 1e-10),
            vec![ConstraintId::Global(0)]
        );
        assert!(detect_violations(&phi, &[0.5, 0.0], &model, &lin, 1e-10).is_empty());
    }

    #[test]
    fn violation_detection_matches_exhaustive_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let k = 5;
            let mut model = ConstraintModel::new(UnivariateBounds::uniform(k, -1.0, 1.0).unwrap());
            let mut rows = Vec::new();
            for _ in 0..4 {
                let row: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                let a = rng.random_range(0.0..1.0);
                rows.push((row.clone(), a));
                model = model.with_linear_inequality(row, a, 0.0).unwrap();
            }
            let phi: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let delta: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lin = linearize_constraints(&phi, &model).unwrap();
            let got = detect_violations(&phi, &delta, &model, &lin, 1e-10);
            let x: Vec<f64> = phi.iter().zip(&delta).map(|(p, d)| p - d).collect();
            let mut expected = Vec::new();
            for (j, (row, a)) in rows.iter().enumerate() {
                let v: f64 = row.iter().zip(&x).map(|(r, xi)| r * xi).sum();
                if v > a + 1e-10 {
                    expected.push(ConstraintId::Global(j));
                }
            }
            for (i, xi) in x.iter().enumerate() {
                if *xi > 1.0 + 1e-10 {
                    expected.push(ConstraintId::Bound(i, Side::Upper));
                }
                if *xi < -1.0 - 1e-10 {
                    expected.push(ConstraintId::Bound(i, Side::Lower));
                }
            }
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn most_binding_picks_largest_ratio() {
        let model = ConstraintModel::new(UnivariateBounds::unbounded(2))
            .with_linear_inequality(vec![1.0, 0.0], 0.0, 0.0)
            .unwrap()
            .with_linear_inequality(vec![0.0, 2.0], 0.0, 0.0)
            .unwrap();
        let phi = [0.2, 0.25];
        let lin = linearize_constraints(&phi, &model).unwrap();
        let c = [ConstraintId::Global(0), ConstraintId::Global(1)];
        // ratios 0.2 and 0.5/2 = 0.25
        assert_eq!(
            most_binding(&c, &phi, &[0.0, 0.0], &model, &lin),
            Some(ConstraintId::Global(1))
        );
        assert_eq!(
            most_binding(&c[..1], &phi, &[0.0, 0.0], &model, &lin),
            Some(ConstraintId::Global(0))
        );
        assert_eq!(most_binding(&[], &phi, &[0.0, 0.0], &model, &lin), None);
    }

    #[test]
    fn most_binding_ties_go_to_lowest_id() {
        let model = ConstraintModel::new(UnivariateBounds::unbounded(2))
            .with_linear_inequality(vec![1.0, 0.0], 0.0, 0.0)
            .unwrap()
            .with_linear_inequality(vec![0.0, 1.0], 0.0, 0.0)
            .unwrap();
        let phi = [0.5, 0.5];
        let lin = linearize_constraints(&phi, &model).unwrap();
        let c = [ConstraintId::Global(1), ConstraintId::Global(0)];
        assert_eq!(
            most_binding(&c, &phi, &[0.0, 0.0], &model, &lin),
            Some(ConstraintId::Global(0))
        );
    }

    #[test]
    fn most_binding_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let k = 4;
            let mut model = ConstraintModel::new(UnivariateBounds::uniform(k, -1.0, 1.0).unwrap());
            for _ in 0..5 {
                let row: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                model = model
                    .with_linear_inequality(row, rng.random_range(0.0..1.0), 0.0)
                    .unwrap();
            }
            let phi: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let delta: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let lin = linearize_constraints(&phi, &model).unwrap();
            let mut cands: Vec<ConstraintId> = (0..5).map(ConstraintId::Global).collect();
            cands.push(ConstraintId::Bound(1, Side::Upper));
            cands.push(ConstraintId::Bound(2, Side::Lower));
            let got = most_binding(&cands, &phi, &delta, &model, &lin).unwrap();
            let mut best = cands[0];
            let mut best_r = f64::NEG_INFINITY;
            for &c in &cands {
                let n = match c {
                    ConstraintId::Global(j) => norm2(&lin.gradients[j]),
                    _ => 1.0,
                };
                let r = linearized_excess(c, &phi, &delta, &model, &lin) / n;
                if r > best_r {
                    best_r = r;
                    best = c;
                }
            }
            assert_eq!(got, best);
        }
    }

    #[test]
    fn apply_multipliers_cases() {
        let model = halfspace();
        let phi = [0.0, 0.0];
        let lin = linearize_constraints(&phi, &model).unwrap();
        let empty = ActiveSet::new(2, 1, 0);
        let y = MultiplierVector::new(&empty, vec![], vec![]);
        assert_eq!(apply_multipliers(&[-2.0, 0.0], &y, &lin), vec![-2.0, 0.0]);

        let mut active = ActiveSet::new(2, 1, 0);
        active.insert(ConstraintId::Global(0));
        let y = MultiplierVector::new(&active, vec![0.5], vec![]);
        assert_eq!(apply_multipliers(&[-2.0, 0.0], &y, &lin), vec![-1.5, 0.5]);

        let mut active = ActiveSet::new(2, 1, 0);
        active.insert(ConstraintId::Bound(1, Side::Upper));
        let y = MultiplierVector::new(&active, vec![], vec![0.75]);
        assert_eq!(apply_multipliers(&[0.0, -1.0], &y, &lin), vec![0.0, -0.25]);
    }
}
