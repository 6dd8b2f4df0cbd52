use rand_distr::{Beta, Distribution, Gamma};

use crate::error::{Error, Result};
use crate::prob::rng::Rng;
use crate::prob::simplex::Simplex;

/// Smallest probability a sampled simplex entry is allowed to take. Gamma
/// draws with shape < 1 can underflow to zero; the floor keeps every log finite.
pub const PROB_FLOOR: f64 = 1e-300;

/// `ln G` for `G ~ Gamma(shape, 1)`, stable for small shapes via
/// `G = G' * U^(1/shape)` with `G' ~ Gamma(shape + 1, 1)`.
fn log_gamma_variate(shape: f64, rng: &mut Rng) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("shape > 0").sample(rng);
        g.ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("shape > 0").sample(rng);
        let u = 1.0 - rng.uniform(); // (0, 1]
        g.ln() + u.ln() / shape
    }
}

/// Draw from `Dirichlet(concentration)`.
pub fn sample_dirichlet(concentration: &[f64], rng: &mut Rng) -> Result<Simplex> {
    if concentration.is_empty() {
        return Err(Error::invalid("empty Dirichlet"));
    }
    if concentration.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::invalid("Dirichlet concentrations must be positive"));
    }
    let logs: Vec<f64> = concentration
        .iter()
        .map(|a| log_gamma_variate(*a, rng))
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    if w.iter().any(|x| *x < PROB_FLOOR) {
        w.iter_mut().for_each(|x| *x = x.max(PROB_FLOOR));
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= sum);
    }
    Simplex::new(w)
}

/// Draw from the Dirichlet posterior `Dirichlet(counts + gamma)`.
pub fn sample_dirichlet_posterior(counts: &[f64], gamma: f64, rng: &mut Rng) -> Result<Simplex> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    if let Some(c) = counts.iter().find(|c| !c.is_finite() || **c < 0.0) {
        return Err(Error::invalid(format!("negative count {c}")));
    }
    let conc: Vec<f64> = counts.iter().map(|c| c + gamma).collect();
    sample_dirichlet(&conc, rng)
}

/// Truncated stick-breaking draw of length `k`; the final stick takes the remainder.
pub fn stick_breaking(alpha: f64, k: usize, rng: &mut Rng) -> Result<Simplex> {
    if k == 0 {
        return Err(Error::invalid("truncation level must be at least 1"));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let beta = Beta::new(1.0, alpha).map_err(|e| Error::invalid(e.to_string()))?;
    let mut weights = Vec::with_capacity(k);
    let mut remaining = 1.0;
    for _ in 0..k - 1 {
        let v: f64 = beta.sample(rng);
        weights.push(remaining * v);
        remaining *= 1.0 - v;
    }
    weights.push(remaining);
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Simplex::new(weights)
}
