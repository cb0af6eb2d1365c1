//! Symmetric positive definite band matrices and their Cholesky factors.

use crate::error::{PgdError, Result};

/// Lower band of a symmetric `n`×`n` matrix with half-bandwidth `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSpd {
    n: usize,
    w: usize,
    /// `data[i*(w+1) + d]` holds entry `(i, i−d)`.
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, w: usize) -> Self {
        Self {
            n,
            w,
            data: vec![0.0; n * (w + 1)],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bandwidth(&self) -> usize {
        self.w
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.w);
        i * (self.w + 1) + (i - j)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.w {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `v` to `(i, j)` (and implicitly to `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            y[i] += self.data[self.idx(i, i)] * x[i];
            for j in i.saturating_sub(self.w)..i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn factor(&self) -> Result<BandedCholesky> {
        let (n, w) = (self.n, self.w);
        let mut l = self.data.clone();
        let at = |i: usize, j: usize| i * (w + 1) + (i - j);
        for i in 0..n {
            for j in i.saturating_sub(w)..=i {
                let mut s = l[at(i, j)];
                for k in i.saturating_sub(w)..j {
                    s -= l[at(i, k)] * l[at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(PgdError::Solver(format!(
                            "matrix is not positive definite (pivot {s:e} at row {i})"
                        )));
                    }
                    l[at(i, i)] = s.sqrt();
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        Ok(BandedCholesky { n, w, l })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandedCholesky {
    n: usize,
    w: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * (self.w + 1) + (i - j)]
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let mut x = b.to_vec();
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(self.w)..i {
                s -= self.at(i, k) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in (i + 1)..(i + self.w + 1).min(self.n) {
                s -= self.at(k, i) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n = rng.random_range(1..40);
            let w = rng.random_range(0..6);
            let mut a = BandedSpd::zeros(n, w);
            for i in 0..n {
                for j in i.saturating_sub(w)..i {
                    a.add(i, j, rng.random_range(-1.0..1.0));
                }
            }
            // diagonal dominance makes it SPD
            for i in 0..n {
                a.add(i, i, 2.0 * (w as f64 + 1.0));
            }
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = a.factor().unwrap().solve(&b);
            let dense = a.to_dense();
            let m = DMatrix::from_fn(n, n, |i, j| dense[i][j]);
            let oracle = m.lu().solve(&DVector::from_column_slice(&b)).unwrap();
            for i in 0..n {
                assert!((x[i] - oracle[i]).abs() < 1e-12);
            }
            let r = a.mul_vec(&x);
            for i in 0..n {
                assert!((r[i] - b[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = BandedSpd::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.factor().is_err());
    }
}
