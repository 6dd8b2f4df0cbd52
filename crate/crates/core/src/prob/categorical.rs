use crate::error::{Error, Result};
use crate::prob::rng::Rng;
use crate::prob::simplex::Simplex;

/// Draws an index with probability `p[k]` by inverting the cumulative sum.
pub fn sample_categorical(p: &Simplex, rng: &mut Rng) -> Result<usize> {
    sample_weights(p.as_slice(), rng)
}

/// Draws from unnormalized non-negative weights.
pub fn sample_weights(weights: &[f64], rng: &mut Rng) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::invalid("cannot sample from an empty distribution"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::numerical(format!("categorical weights sum to {total}")));
    }
    let u = rng.uniform() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            last_positive = k;
            acc += w;
            if u < acc {
                return Ok(k);
            }
        }
    }
    // rounding left u at the very top of the range
    Ok(last_positive)
}

/// Draws from a vector of unnormalized log-weights.
pub fn sample_log_weights(log_w: &[f64], rng: &mut Rng) -> Result<usize> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::numerical("no finite log-weight"));
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    sample_weights(&w, rng)
}
