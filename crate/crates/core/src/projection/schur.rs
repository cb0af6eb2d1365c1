//! Block elimination of the multiplier system.
//!
//! With `m*` active global constraints and `m̂ − m*` active bounds the
//! multiplier system is
//!
//! ```text
//!     [ A  Bᵗ ] [y1]   [b1]
//!     [ B  D  ] [y2] = [b2]
//! ```
//!
//! where `A` holds pairwise dot products of global gradients, `B` the global
//! gradient components at the bound-active variables (signed by side) and
//! `D` is diagonal. Eliminating `y2` leaves an `m*`×`m*` system in the Schur
//! complement `A − BᵗD⁻¹B`.

use crate::active_set::{ActiveSet, MultiplierVector, Side};
use crate::constraints::ConstraintModel;
use crate::error::{PgdError, Result};
use crate::vector::dot;

use super::Linearization;

#[derive(Debug, Clone, PartialEq)]
pub struct SchurBlocks {
    pub globals: Vec<usize>,
    pub bounds: Vec<(usize, Side)>,
    /// Row-major `m*`×`m*`.
    pub a: Vec<f64>,
    /// Row-major `(m̂−m*)`×`m*`.
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
}

impl SchurBlocks {
    pub fn n_globals(&self) -> usize {
        self.globals.len()
    }

    pub fn n_bounds(&self) -> usize {
        self.bounds.len()
    }

    /// Dense `M` and right-hand side, in local order.
    pub fn dense(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let g = self.n_globals();
        let n = g + self.n_bounds();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..g {
            for j in 0..g {
                m[i][j] = self.a[i * g + j];
            }
        }
        for r in 0..self.n_bounds() {
            for j in 0..g {
                m[g + r][j] = self.b[r * g + j];
                m[j][g + r] = self.b[r * g + j];
            }
            m[g + r][g + r] = self.d[r];
        }
        let rhs = self.b1.iter().chain(&self.b2).copied().collect();
        (m, rhs)
    }
}

/// Assembles the blocks for `active` at the linearization point `phi`.
pub fn assemble_schur(
    active: &ActiveSet,
    lin: &Linearization,
    delta_tilde: &[f64],
    phi: &[f64],
    model: &ConstraintModel,
) -> SchurBlocks {
    let globals = active.globals().to_vec();
    let bounds = active.bounds().to_vec();
    let g = globals.len();
    let nb = bounds.len();

    let mut a = vec![0.0; g * g];
    for (p, &i) in globals.iter().enumerate() {
        for (q, &j) in globals.iter().enumerate().skip(p) {
            let v = dot(&lin.gradients[i], &lin.gradients[j]);
            a[p * g + q] = v;
            a[q * g + p] = v;
        }
    }

    let mut b = vec![0.0; nb * g];
    for (r, &(var, side)) in bounds.iter().enumerate() {
        for (q, &j) in globals.iter().enumerate() {
            b[r * g + q] = side.sign() * lin.gradients[j][var];
        }
    }

    let d = vec![1.0; nb];

    let b1 = globals
        .iter()
        .map(|&j| {
            let c = &model.globals()[j];
            -(c.bound - lin.values[j]) - dot(&lin.gradients[j], delta_tilde)
        })
        .collect();

    let b2 = bounds
        .iter()
        .map(|&(var, side)| {
            let s = side.sign();
            let limit = match side {
                Side::Lower => model.bounds().lower()[var],
                Side::Upper => model.bounds().upper()[var],
            };
            // bound written as s·φ_i ≤ s·limit
            -(s * limit - s * phi[var]) - s * delta_tilde[var]
        })
        .collect();

    SchurBlocks {
        globals,
        bounds,
        a,
        b,
        d,
        b1,
        b2,
    }
}

/// Solves for the multipliers through the Schur complement.
///
/// Fails with [`PgdError::SingularSystem`] when a pivot of the complement
/// falls below `pivot_tol` times the matching diagonal entry of `A`, i.e.
/// when the active constraints are (numerically) linearly dependent.
pub fn solve_multipliers(blocks: &SchurBlocks, pivot_tol: f64) -> Result<MultiplierVector> {
    let g = blocks.n_globals();
    let nb = blocks.n_bounds();

    for &dv in &blocks.d {
        if !(dv > 0.0) {
            return Err(PgdError::SingularSystem { pivot: dv });
        }
    }

    // S = A − Bᵗ D⁻¹ B, rhs = b1 − Bᵗ D⁻¹ b2
    let mut s = blocks.a.clone();
    let mut rhs = blocks.b1.clone();
    for r in 0..nb {
        let row = &blocks.b[r * g..(r + 1) * g];
        let inv_d = 1.0 / blocks.d[r];
        for p in 0..g {
            if row[p] == 0.0 {
                continue;
            }
            let w = row[p] * inv_d;
            rhs[p] -= w * blocks.b2[r];
            for q in 0..g {
                s[p * g + q] -= w * row[q];
            }
        }
    }

    let diag: Vec<f64> = (0..g).map(|p| blocks.a[p * g + p]).collect();
    let y1 = cholesky_solve(&mut s, g, &mut rhs, &diag, pivot_tol)?;

    let y2 = (0..nb)
        .map(|r| {
            let row = &blocks.b[r * g..(r + 1) * g];
            (blocks.b2[r] - dot(row, &y1)) / blocks.d[r]
        })
        .collect();

    Ok(MultiplierVector {
        globals: blocks.globals.clone(),
        bounds: blocks.bounds.clone(),
        y1,
        y2,
    })
}

/// In-place Cholesky factorization and solve of a symmetric `n`×`n` system.
fn cholesky_solve(
    s: &mut [f64],
    n: usize,
    rhs: &mut [f64],
    scale: &[f64],
    pivot_tol: f64,
) -> Result<Vec<f64>> {
    for j in 0..n {
        let mut pivot = s[j * n + j];
        for p in 0..j {
            pivot -= s[j * n + p] * s[j * n + p];
        }
        if !(pivot > pivot_tol * scale[j]) {
            return Err(PgdError::SingularSystem { pivot });
        }
        let l_jj = pivot.sqrt();
        s[j * n + j] = l_jj;
        for i in (j + 1)..n {
            let mut v = s[i * n + j];
            for p in 0..j {
                v -= s[i * n + p] * s[j * n + p];
            }
            s[i * n + j] = v / l_jj;
        }
    }
    // L z = rhs
    for i in 0..n {
        let mut v = rhs[i];
        for p in 0..i {
            v -= s[i * n + p] * rhs[p];
        }
        rhs[i] = v / s[i * n + i];
    }
    // Lᵗ y = z
    for i in (0..n).rev() {
        let mut v = rhs[i];
        for p in (i + 1)..n {
            v -= s[p * n + i] * rhs[p];
        }
        rhs[i] = v / s[i * n + i];
    }
    Ok(rhs.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::active_set::ConstraintId;
    use crate::constraints::UnivariateBounds;
    use crate::projection::linearize_constraints;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_hyperplane_blocks() {
        let model = ConstraintModel::new(UnivariateBounds::unbounded(2))
            .with_linear_inequality(vec![1.0, 1.0], 1.0, 0.0)
            .unwrap();
        let phi = [0.0, 0.0];
        let lin = linearize_constraints(&phi, &model).unwrap();
        let mut active = ActiveSet::new(2, 1, 0);
        active.insert(ConstraintId::Global(0));
        let blocks = assemble_schur(&active, &lin, &[-2.0, 0.0], &phi, &model);
        assert_eq!(blocks.a, vec![2.0]);
        assert_eq!(blocks.b1, vec![1.0]);
        let y = solve_multipliers(&blocks, 1e-12).unwrap();
        assert!((y.y1[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_lower_bound_blocks() {
        let model = ConstraintModel::new(UnivariateBounds::uniform(2, 0.0, 1.0).unwrap());
        let phi = [0.0, 0.5];
        let lin = linearize_constraints(&phi, &model).unwrap();
        let mut active = ActiveSet::new(2, 0, 0);
        active.insert(ConstraintId::Bound(0, Side::Lower));
        let blocks = assemble_schur(&active, &lin, &[0.5, 0.0], &phi, &model);
        assert_eq!(blocks.d, vec![1.0]);
        // −(−d − (−φ_0)) − (−1)(Δφ̃_0) = 0.5
        assert_eq!(blocks.b2, vec![0.5]);
        let y = solve_multipliers(&blocks, 1e-12).unwrap();
        assert_eq!(y.y2, vec![0.5]);
    }

    #[test]
    fn decoupled_blocks() {
        let blocks = SchurBlocks {
            globals: vec![0, 1],
            bounds: vec![(0, Side::Upper)],
            a: vec![2.0, 1.0, 1.0, 3.0],
            b: vec![0.0, 0.0],
            d: vec![1.0],
            b1: vec![1.0, 2.0],
            b2: vec![-0.7],
        };
        let y = solve_multipliers(&blocks, 1e-12).unwrap();
        // A⁻¹ b1 = [0.2, 0.6]
        assert!((y.y1[0] - 0.2).abs() < 1e-15);
        assert!((y.y1[1] - 0.6).abs() < 1e-15);
        assert_eq!(y.y2, vec![-0.7]);
    }

    #[test]
    fn bounds_only() {
        let blocks = SchurBlocks {
            globals: vec![],
            bounds: vec![(0, Side::Upper), (2, Side::Lower)],
            a: vec![],
            b: vec![],
            d: vec![1.0, 1.0],
            b1: vec![],
            b2: vec![0.3, -1.2],
        };
        let y = solve_multipliers(&blocks, 1e-12).unwrap();
        assert!(y.y1.is_empty());
        assert_eq!(y.y2, vec![0.3, -1.2]);
    }

    #[test]
    fn dependent_constraints_are_singular() {
        let model = ConstraintModel::new(UnivariateBounds::unbounded(2))
            .with_linear_inequality(vec![1.0, 1.0], 1.0, 0.0)
            .unwrap()
            .with_linear_inequality(vec![2.0, 2.0], 3.0, 0.0)
            .unwrap();
        let phi = [0.0, 0.0];
        let lin = linearize_constraints(&phi, &model).unwrap();
        let mut active = ActiveSet::new(2, 2, 0);
        active.insert(ConstraintId::Global(0));
        active.insert(ConstraintId::Global(1));
        let blocks = assemble_schur(&active, &lin, &[1.0, 0.0], &phi, &model);
        assert!(matches!(
            solve_multipliers(&blocks, 1e-12),
            Err(PgdError::SingularSystem { .. })
        ));
    }

    #[test]
    fn global_covered_by_bounds_is_singular() {
        let model = ConstraintModel::new(UnivariateBounds::uniform(2, -1.0, 1.0).unwrap())
            .with_linear_inequality(vec![1.0, 0.0], 1.0, 0.0)
            .unwrap();
        let phi = [0.0, 0.0];
        let lin = linearize_constraints(&phi, &model).unwrap();
        let mut active = ActiveSet::new(2, 1, 0);
        active.insert(ConstraintId::Global(0));
        active.insert(ConstraintId::Bound(0, Side::Upper));
        let blocks = assemble_schur(&active, &lin, &[1.0, 0.0], &phi, &model);
        assert!(solve_multipliers(&blocks, 1e-12).is_err());
    }

    /// Random active sets: the blocks are sub-blocks of the densely assembled
    /// `M`, and the Schur solution matches a dense LU solve of `M y = b`.
    #[test]
    fn matches_dense_assembly_and_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let k = 16;
            let n_glob = rng.random_range(1..=5);
            let n_bnd = rng.random_range(1..=10);
            let mut model = ConstraintModel::new(UnivariateBounds::uniform(k, -2.0, 2.0).unwrap());
            let mut rows = Vec::new();
            for _ in 0..n_glob {
                let row: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                rows.push(row.clone());
                model = model
                    .with_linear_inequality(row, rng.random_range(0.0..1.0), 0.0)
                    .unwrap();
            }
            let phi: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let dt: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lin = linearize_constraints(&phi, &model).unwrap();
            let mut active = ActiveSet::new(k, n_glob, 0);
            for j in 0..n_glob {
                active.insert(ConstraintId::Global(j));
            }
            let mut vars: Vec<usize> = (0..k).collect();
            for r in 0..n_bnd {
                let pick = rng.random_range(r..k);
                vars.swap(r, pick);
                let side = if rng.random_bool(0.5) { Side::Lower } else { Side::Upper };
                active.insert(ConstraintId::Bound(vars[r], side));
            }
            let blocks = assemble_schur(&active, &lin, &dt, &phi, &model);

            // Every entry of M is a gradient dot product in local order.
            let ids = active.local_to_global();
            let grad = |id: ConstraintId| -> Vec<f64> {
                match id {
                    ConstraintId::Global(j) => rows[j].clone(),
                    ConstraintId::Bound(i, s) => {
                        let mut e = vec![0.0; k];
                        e[i] = s.sign();
                        e
                    }
                }
            };
            let n = ids.len();
            let full = DMatrix::from_fn(n, n, |p, q| dot(&grad(ids[p]), &grad(ids[q])));
            let (m, rhs) = blocks.dense();
            for p in 0..n {
                for q in 0..n {
                    assert!((m[p][q] - full[(p, q)]).abs() < 1e-14);
                }
            }

            let y = solve_multipliers(&blocks, 1e-12).unwrap();
            let dense_y = full
                .clone()
                .lu()
                .solve(&DVector::from_vec(rhs.clone()))
                .unwrap();
            let all: Vec<f64> = y.y1.iter().chain(&y.y2).copied().collect();
            for p in 0..n {
                assert!((all[p] - dense_y[p]).abs() < 1e-10, "{} vs {}", all[p], dense_y[p]);
            }
        }
    }
}
