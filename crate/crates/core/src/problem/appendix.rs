use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::{ConstraintModel, Evaluation, ScalarFunction, UnivariateBounds};
use crate::error::{PgdError, Result};

use super::Problem;

/// Breakage tolerance on the random linear constraints.
pub const APPENDIX_TOLERANCE: f64 = 1e-9;

/// `C(φ) = Σ |B_i| (φ_i − B_i)⁴`
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixCost {
    pub b: Vec<f64>,
}

impl ScalarFunction for AppendixCost {
    fn evaluate(&self, phi: &[f64]) -> Result<Evaluation> {
        if phi.len() != self.b.len() {
            return Err(PgdError::DimensionMismatch {
                expected: self.b.len(),
                got: phi.len(),
            });
        }
        let mut value = 0.0;
        let mut gradient = Vec::with_capacity(phi.len());
        for (p, b) in phi.iter().zip(&self.b) {
            let x = p - b;
            let x2 = x * x;
            value += b.abs() * x2 * x2;
            gradient.push(4.0 * b.abs() * x2 * x);
        }
        Ok(Evaluation { value, gradient })
    }
}

/// Random convex test problem: quartic cost, `A φ ≤ a`, `−10 ≤ φ ≤ 10`.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixProblem {
    pub b: Vec<f64>,
    /// `m` rows of length `k`.
    pub a_mat: Vec<Vec<f64>>,
    pub a: Vec<f64>,
    pub seed: u64,
}

impl AppendixProblem {
    /// Draws `B`, then `A` row by row, then `a` from `rng`.
    pub fn sample<R: Rng>(k: usize, m: usize, rng: &mut R, seed: u64) -> Self {
        let b = (0..k).map(|_| rng.random_range(-10.0..10.0)).collect();
        let a_mat = (0..m)
            .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let a = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        Self { b, a_mat, a, seed }
    }

    /// Instance `trial` of the batch seeded by `master`.
    pub fn for_trial(k: usize, m: usize, master: u64, trial: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        rng.set_stream(trial);
        Self::sample(k, m, &mut rng, master)
    }

    pub fn dimension(&self) -> usize {
        self.b.len()
    }

    pub fn to_problem(&self) -> Result<Problem> {
        let k = self.dimension();
        let mut model = ConstraintModel::new(UnivariateBounds::uniform(k, -10.0, 10.0)?);
        for (row, &rhs) in self.a_mat.iter().zip(&self.a) {
            model = model.with_linear_inequality(row.clone(), rhs, APPENDIX_TOLERANCE)?;
        }
        Ok(Problem::new(Arc::new(AppendixCost { b: self.b.clone() }), model))
    }
}

/// Deterministic appendix instance for `seed`.
pub fn make_appendix_problem(k: usize, m: usize, seed: u64) -> Result<AppendixProblem> {
    if k == 0 {
        return Err(PgdError::InvalidParameter {
            name: "k",
            reason: "must be at least 1".into(),
        });
    }
    Ok(AppendixProblem::for_trial(k, m, seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::check_gradient;

    #[test]
    fn minimum_at_b() {
        let ap = make_appendix_problem(6, 3, 11).unwrap();
        let p = ap.to_problem().unwrap();
        let e = p.cost(&ap.b).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.gradient.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn draws_are_in_range_and_reproducible() {
        let x = make_appendix_problem(10, 7, 5).unwrap();
        assert_eq!(x, make_appendix_problem(10, 7, 5).unwrap());
        assert_ne!(x, make_appendix_problem(10, 7, 6).unwrap());
        assert!(x.b.iter().all(|v| (-10.0..10.0).contains(v)));
        assert!(x.a_mat.iter().flatten().all(|v| (-1.0..1.0).contains(v)));
        assert!(x.a.iter().all(|v| (0.0..1.0).contains(v)));
        assert_ne!(
            AppendixProblem::for_trial(10, 7, 5, 1),
            AppendixProblem::for_trial(10, 7, 5, 2)
        );
    }

    #[test]
    fn origin_is_feasible() {
        let p = make_appendix_problem(5, 5, 1).unwrap().to_problem().unwrap();
        let evals = p.constraints().evaluate(&[0.0; 5]).unwrap();
        for (c, e) in p.constraints().globals().iter().zip(evals) {
            assert!(e.value <= c.bound);
        }
    }

    #[test]
    fn gradient_matches_fd() {
        let ap = make_appendix_problem(8, 4, 2).unwrap();
        let p = ap.to_problem().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(-10.0..10.0)).collect();
            assert!(check_gradient(&p, &x, 1e-4).unwrap() < 1e-5);
        }
        // ∂C/∂φ_i = 4|B_i|(φ_i − B_i)³, independently
        let x = vec![1.0; 8];
        let g = p.cost(&x).unwrap().gradient;
        for i in 0..8 {
            let expected = 4.0 * ap.b[i].abs() * (1.0 - ap.b[i]).powi(3);
            assert!((g[i] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }
}
