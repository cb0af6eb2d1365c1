//! Dense vector primitives shared by every module.

use std::ops::{Deref, DerefMut};

use crate::error::{PgdError, Result};

/// Dense vector of decision variables.
///
/// Entries are finite when built through [`DesignVector::new`]; the `From`
/// conversion is unchecked and meant for values produced internally.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DesignVector(Vec<f64>);

impl DesignVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(PgdError::NonFinite { index });
        }
        Ok(Self(entries))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for DesignVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DesignVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DesignVector {
    fn from(entries: Vec<f64>) -> Self {
        Self(entries)
    }
}

impl From<DesignVector> for Vec<f64> {
    fn from(v: DesignVector) -> Self {
        v.0
    }
}

/// Inner product. Panics on length mismatch; see [`try_dot`].
pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len(), "dot: length mismatch");
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn try_dot(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(PgdError::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(dot(u, v))
}

pub fn norm2(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

pub fn norm_inf(u: &[f64]) -> f64 {
    u.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `u - v`
pub fn sub(u: &[f64], v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| a - b).collect()
}

pub fn scaled(a: f64, u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| a * v).collect()
}

/// Euclidean distance between two vectors.
pub fn distance(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
