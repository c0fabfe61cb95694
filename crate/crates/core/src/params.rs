//! Flat model parameter vectors and the few dense-vector kernels the
//! simulator needs.

use serde::{Deserialize, Serialize};
use std::ops::{Deref, DerefMut};

/// Flat real parameter vector of dimension `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(d: usize) -> Self {
        ParamVector(vec![0.0; d])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self - other`.
    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        ParamVector(sub(&self.0, &other.0))
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &[f64]) {
        axpy(&mut self.0, alpha, x);
    }

    /// Squared distance to `other`.
    pub fn dist_sq(&self, other: &ParamVector) -> f64 {
        dist_sq(&self.0, &other.0)
    }

    /// Bit patterns of the entries; equality of these is bitwise equality.
    pub fn to_bits(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Elementwise mean of equal-length vectors, summed in the given order.
pub fn mean_of(vectors: &[&[f64]]) -> Vec<f64> {
    let d = vectors.first().map_or(0, |v| v.len());
    let mut acc = vec![0.0; d];
    for v in vectors {
        axpy(&mut acc, 1.0, v);
    }
    let n = vectors.len() as f64;
    acc.iter_mut().for_each(|x| *x /= n);
    acc
}
