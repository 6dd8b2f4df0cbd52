use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit-sum invariant.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A probability vector: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Simplex(Vec<f64>);

impl Simplex {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("empty simplex"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::invalid(format!("simplex entry {w} is not a probability")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("simplex sums to {sum}")));
        }
        Ok(Simplex(weights))
    }

    /// Normalizes non-negative weights with a positive finite total.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("empty simplex"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::invalid(format!("weights sum to {sum}")));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(Simplex(weights))
    }

    /// Normalizes log-weights with max subtraction. At least one entry must be finite.
    pub fn from_log_weights(log_w: &[f64]) -> Result<Self> {
        let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::numerical("no finite log-weight"));
        }
        Simplex::from_weights(log_w.iter().map(|l| (l - max).exp()).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("empty simplex"));
        }
        Ok(Simplex(vec![1.0 / n as f64; n]))
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::invalid(format!("point mass index {at} >= {n}")));
        }
        let mut w = vec![0.0; n];
        w[at] = 1.0;
        Ok(Simplex(w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Lowest index of the largest entry.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    /// Total-variation distance to another simplex of equal length.
    pub fn tv_distance(&self, other: &Simplex) -> f64 {
        0.5 * self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Lowest index of the maximum; ties go to the earlier entry.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

impl Index<usize> for Simplex {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Simplex {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Simplex::new(v)
    }
}

impl From<Simplex> for Vec<f64> {
    fn from(s: Simplex) -> Vec<f64> {
        s.0
    }
}
