//! Cell-centered grid on `[0, 1] × [0, ny/nx]`.

use std::ops::Range;

use crate::error::{PgdError, Result};

/// Smallest grid side the demo accepts.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    /// Cell size.
    pub h: f64,
    /// Bottom-row cells held at `T = 0`.
    pub sink: Range<usize>,
}

impl Grid {
    /// Grid with the sink on the central tenth of the bottom edge.
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(PgdError::InvalidParameter {
                name: "grid",
                reason: format!("need at least {MIN_CELLS}×{MIN_CELLS} cells, got {nx}×{ny}"),
            });
        }
        // same parity as nx so the patch is centered
        let target = 0.1 * nx as f64;
        let mut width = (target.round() as usize).max(1);
        if width % 2 != nx % 2 {
            let lo = width.saturating_sub(1);
            let hi = width + 1;
            width = if lo >= 1 && (target - lo as f64).abs() <= (hi as f64 - target).abs() {
                lo
            } else {
                hi
            };
        }
        let start = (nx - width) / 2;
        Ok(Self {
            nx,
            ny,
            h: 1.0 / nx as f64,
            sink: start..start + width,
        })
    }

    pub fn with_sink(mut self, sink: Range<usize>) -> Result<Self> {
        if sink.is_empty() || sink.end > self.nx {
            return Err(PgdError::InvalidParameter {
                name: "sink",
                reason: format!("{sink:?} is not a non-empty range of bottom cells 0..{}", self.nx),
            });
        }
        self.sink = sink;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of cell `(i, j)`, with `j = 0` the bottom row.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, p: usize) -> (usize, usize) {
        (p % self.nx, p / self.nx)
    }

    /// Interior faces as `(p, q)` with `q > p`: right neighbours then top ones.
    pub fn faces(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let horizontal = (0..self.ny).flat_map(move |j| {
            (0..self.nx - 1).map(move |i| (self.index(i, j), self.index(i + 1, j)))
        });
        let vertical = (0..self.ny - 1).flat_map(move |j| {
            (0..self.nx).map(move |i| (self.index(i, j), self.index(i, j + 1)))
        });
        horizontal.chain(vertical)
    }

    pub fn is_sink(&self, p: usize) -> bool {
        p < self.nx && self.sink.contains(&p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sink_is_centered() {
        for nx in 8..80 {
            let g = Grid::new(nx, 8).unwrap();
            assert_eq!(g.sink.start + g.sink.end, nx, "nx={nx}");
            let w = g.sink.len() as f64;
            assert!((w - 0.1 * nx as f64).abs() <= 1.5, "nx={nx} w={w}");
        }
        assert_eq!(Grid::new(32, 32).unwrap().sink, 14..18);
        assert_eq!(Grid::new(16, 16).unwrap().sink, 7..9);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(Grid::new(7, 8).is_err());
        assert!(Grid::new(8, 4).is_err());
        let g = Grid::new(8, 8).unwrap();
        assert!(g.clone().with_sink(3..3).is_err());
        assert!(g.with_sink(0..9).is_err());
    }

    #[test]
    fn face_count() {
        let g = Grid::new(9, 11).unwrap();
        assert_eq!(g.faces().count(), 8 * 11 + 9 * 10);
        assert!(g.faces().all(|(p, q)| q == p + 1 || q == p + 9));
    }
}
