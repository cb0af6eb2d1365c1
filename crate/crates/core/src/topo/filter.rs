//! Helmholtz density filter `(I − r²Δ)φ̂ = φ` with zero-flux boundaries.

use super::banded::{BandedCholesky, BandedSpd};
use super::grid::Grid;
use crate::error::{PgdError, Result};

#[derive(Debug, Clone)]
pub struct HelmholtzFilter {
    radius: f64,
    factor: BandedCholesky,
    n: usize,
}

impl HelmholtzFilter {
    pub fn new(grid: &Grid, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(PgdError::InvalidParameter {
                name: "filter_radius",
                reason: format!("must be positive, got {radius}"),
            });
        }
        let matrix = filter_matrix(grid, radius);
        Ok(Self {
            radius,
            factor: matrix.factor()?,
            n: grid.len(),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `φ̂ = F⁻¹φ`. `F` is symmetric, so this is also the adjoint.
    pub fn apply(&self, phi: &[f64]) -> Result<Vec<f64>> {
        if phi.len() != self.n {
            return Err(PgdError::DimensionMismatch {
                expected: self.n,
                got: phi.len(),
            });
        }
        Ok(self.factor.solve(phi))
    }
}

/// `I + (r/h)² L` with `L` the 5-point graph Laplacian.
pub fn filter_matrix(grid: &Grid, radius: f64) -> BandedSpd {
    let w = (radius / grid.h).powi(2);
    let mut m = BandedSpd::zeros(grid.len(), grid.nx);
    for p in 0..grid.len() {
        m.add(p, p, 1.0);
    }
    for (p, q) in grid.faces() {
        m.add(p, p, w);
        m.add(q, q, w);
        m.add(q, p, -w);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::dot;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0.0..1.0)).collect()
    }

    #[test]
    fn constants_pass_through() {
        let g = Grid::new(10, 12).unwrap();
        let f = HelmholtzFilter::new(&g, 3.0 * g.h).unwrap();
        for x in f.apply(&vec![0.37; g.len()]).unwrap() {
            assert!((x - 0.37).abs() < 1e-13);
        }
    }

    #[test]
    fn mean_and_self_adjointness() {
        let g = Grid::new(12, 9).unwrap();
        let f = HelmholtzFilter::new(&g, 3.0 * g.h).unwrap();
        let u = random_field(g.len(), 1);
        let v = random_field(g.len(), 2);
        let fu = f.apply(&u).unwrap();
        let fv = f.apply(&v).unwrap();
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        assert!((mean(&fu) - mean(&u)).abs() < 1e-10);
        assert!((dot(&fu, &v) - dot(&u, &fv)).abs() < 1e-10);
    }

    #[test]
    fn spike_matches_dense_solve() {
        let g = Grid::new(8, 8).unwrap();
        let r = 3.0 * g.h;
        let f = HelmholtzFilter::new(&g, r).unwrap();
        let mut spike = vec![0.0; g.len()];
        spike[g.index(3, 4)] = 1.0;
        let out = f.apply(&spike).unwrap();

        // independent assembly from the stencil
        let n = g.len();
        let c = (r / g.h).powi(2);
        let mut a = DMatrix::<f64>::identity(n, n);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let p = g.index(i, j);
                let mut nb = Vec::new();
                if i > 0 { nb.push(g.index(i - 1, j)); }
                if i + 1 < g.nx { nb.push(g.index(i + 1, j)); }
                if j > 0 { nb.push(g.index(i, j - 1)); }
                if j + 1 < g.ny { nb.push(g.index(i, j + 1)); }
                for q in nb {
                    a[(p, p)] += c;
                    a[(p, q)] -= c;
                }
            }
        }
        let oracle = a.lu().solve(&DVector::from_vec(spike)).unwrap();
        for p in 0..n {
            assert!((out[p] - oracle[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_radius() {
        let g = Grid::new(8, 8).unwrap();
        assert!(HelmholtzFilter::new(&g, 0.0).is_err());
        assert!(HelmholtzFilter::new(&g, f64::NAN).is_err());
    }
}
