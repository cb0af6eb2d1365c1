//! Steady conduction `−∇·(κ∇T) = S`, finite volumes on the cell grid.

use super::banded::{BandedCholesky, BandedSpd};
use super::grid::Grid;
use crate::error::{PgdError, Result};
use crate::vector::norm2;

/// Relative residual every solve must meet.
pub const RESIDUAL_TOL: f64 = 1e-10;

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Conductance matrix. Faces use harmonic means; sink cells add `2κ_P`.
pub fn assemble(grid: &Grid, kappa: &[f64]) -> Result<BandedSpd> {
    if kappa.len() != grid.len() {
        return Err(PgdError::DimensionMismatch {
            expected: grid.len(),
            got: kappa.len(),
        });
    }
    if let Some(p) = kappa.iter().position(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(PgdError::InvalidParameter {
            name: "kappa",
            reason: format!("conductivity {} at cell {p} is not positive", kappa[p]),
        });
    }
    let mut k = BandedSpd::zeros(grid.len(), grid.nx);
    for (p, q) in grid.faces() {
        let g = harmonic(kappa[p], kappa[q]);
        k.add(p, p, g);
        k.add(q, q, g);
        k.add(q, p, -g);
    }
    for p in grid.sink.clone() {
        k.add(p, p, 2.0 * kappa[p]);
    }
    Ok(k)
}

#[derive(Debug, Clone)]
pub struct HeatSolution {
    pub temperature: Vec<f64>,
    matrix: BandedSpd,
    factor: BandedCholesky,
}

impl HeatSolution {
    /// Solves `K λ = rhs` with the same operator.
    pub fn solve_again(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        checked_solve(&self.matrix, &self.factor, rhs)
    }
}

fn checked_solve(k: &BandedSpd, factor: &BandedCholesky, rhs: &[f64]) -> Result<Vec<f64>> {
    let x = factor.solve(rhs);
    let r: Vec<f64> = k.mul_vec(&x).iter().zip(rhs).map(|(a, b)| a - b).collect();
    let scale = norm2(rhs);
    let res = norm2(&r);
    if scale > 0.0 && !(res <= RESIDUAL_TOL * scale) {
        return Err(PgdError::Solver(format!(
            "heat solve residual {:e} exceeds {RESIDUAL_TOL:e} relative",
            res / scale
        )));
    }
    Ok(x)
}

/// Temperature for source density `source` (per unit area).
pub fn solve_heat(grid: &Grid, kappa: &[f64], source: f64) -> Result<HeatSolution> {
    let matrix = assemble(grid, kappa)?;
    let factor = matrix.factor()?;
    let rhs = vec![source * grid.h * grid.h; grid.len()];
    let temperature = checked_solve(&matrix, &factor, &rhs)?;
    Ok(HeatSolution {
        temperature,
        matrix,
        factor,
    })
}

pub fn mean_temperature(t: &[f64]) -> f64 {
    if t.is_empty() {
        0.0
    } else {
        t.iter().sum::<f64>() / t.len() as f64
    }
}

/// `dC/dκ` for `C = mean(T)` given the adjoint field `λ` (`Kλ = 1/N`).
pub fn conductivity_sensitivity(grid: &Grid, kappa: &[f64], t: &[f64], adjoint: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; grid.len()];
    for (p, q) in grid.faces() {
        let (kp, kq) = (kappa[p], kappa[q]);
        let s = (kp + kq) * (kp + kq);
        let prod = (adjoint[p] - adjoint[q]) * (t[p] - t[q]);
        d[p] -= 2.0 * kq * kq / s * prod;
        d[q] -= 2.0 * kp * kp / s * prod;
    }
    for p in grid.sink.clone() {
        d[p] -= 2.0 * adjoint[p] * t[p];
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_kappa(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0.001..1.0)).collect()
    }

    /// Dense assembly straight from the flux balance of each cell.
    fn dense_system(grid: &Grid, kappa: &[f64]) -> DMatrix<f64> {
        let n = grid.len();
        let mut a = DMatrix::zeros(n, n);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let p = grid.index(i, j);
                let mut nb = Vec::new();
                if i > 0 { nb.push(grid.index(i - 1, j)); }
                if i + 1 < grid.nx { nb.push(grid.index(i + 1, j)); }
                if j > 0 { nb.push(grid.index(i, j - 1)); }
                if j + 1 < grid.ny { nb.push(grid.index(i, j + 1)); }
                for q in nb {
                    let g = 1.0 / (0.5 / kappa[p] + 0.5 / kappa[q]);
                    a[(p, p)] += g;
                    a[(p, q)] -= g;
                }
                if j == 0 && grid.sink.contains(&i) {
                    // half-cell distance to the boundary face
                    a[(p, p)] += kappa[p] / 0.5;
                }
            }
        }
        a
    }

    #[test]
    fn zero_source_gives_zero() {
        let g = Grid::new(8, 8).unwrap();
        let s = solve_heat(&g, &random_kappa(g.len(), 1), 0.0).unwrap();
        assert!(s.temperature.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn doubling_kappa_halves_temperature() {
        let g = Grid::new(9, 8).unwrap();
        let t1 = solve_heat(&g, &vec![0.3; g.len()], 1.0).unwrap().temperature;
        let t2 = solve_heat(&g, &vec![0.6; g.len()], 1.0).unwrap().temperature;
        for (a, b) in t1.iter().zip(&t2) {
            assert!((a - 2.0 * b).abs() <= 1e-12 * a.abs());
            assert!(*a > 0.0);
        }
    }

    #[test]
    fn matches_dense_solve() {
        let g = Grid::new(8, 10).unwrap();
        let kappa = random_kappa(g.len(), 4);
        let s = solve_heat(&g, &kappa, 1.0).unwrap();
        let a = dense_system(&g, &kappa);
        let rhs = DVector::from_element(g.len(), g.h * g.h);
        let oracle = a.lu().solve(&rhs).unwrap();
        for p in 0..g.len() {
            assert!((s.temperature[p] - oracle[p]).abs() <= 1e-10 * oracle[p].abs());
        }
    }

    #[test]
    fn sensitivity_matches_differences() {
        let g = Grid::new(8, 8).unwrap();
        let kappa = random_kappa(g.len(), 5);
        let s = solve_heat(&g, &kappa, 1.0).unwrap();
        let adj = s.solve_again(&vec![1.0 / g.len() as f64; g.len()]).unwrap();
        let d = conductivity_sensitivity(&g, &kappa, &s.temperature, &adj);
        for p in [0, 3, 17, 40, 63] {
            let e = 1e-6 * kappa[p];
            let mut kp = kappa.clone();
            kp[p] += e;
            let mut km = kappa.clone();
            km[p] -= e;
            let cp = mean_temperature(&solve_heat(&g, &kp, 1.0).unwrap().temperature);
            let cm = mean_temperature(&solve_heat(&g, &km, 1.0).unwrap().temperature);
            let fd = (cp - cm) / (2.0 * e);
            assert!((fd - d[p]).abs() <= 1e-5 * fd.abs(), "cell {p}: {fd} vs {}", d[p]);
        }
    }

    #[test]
    fn rejects_nonpositive_kappa() {
        let g = Grid::new(8, 8).unwrap();
        let mut k = vec![1.0; g.len()];
        k[5] = 0.0;
        assert!(solve_heat(&g, &k, 1.0).is_err());
        assert!(solve_heat(&g, &k[1..], 1.0).is_err());
    }
}
