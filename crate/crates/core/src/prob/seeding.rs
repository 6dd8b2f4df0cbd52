use crate::error::{Error, Result};
use crate::prob::categorical::sample_weights;
use crate::prob::rng::Rng;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of `k` points chosen by k-means++ seeding: the first uniformly,
/// each next one with probability proportional to its squared distance to
/// the nearest point already chosen. Repeats are possible once every point
/// coincides with a chosen one.
pub fn kmeans_pp<P: AsRef<[f64]>>(points: &[P], k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::invalid("no points to seed from"));
    }
    let mut chosen = vec![rng.below(points.len())];
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|x| dist2(x.as_ref(), points[chosen[0]].as_ref()))
        .collect();
    while chosen.len() < k {
        let next = if nearest.iter().any(|d| *d > 0.0) {
            sample_weights(&nearest, rng)?
        } else {
            rng.below(points.len())
        };
        for (d, x) in nearest.iter_mut().zip(points) {
            *d = d.min(dist2(x.as_ref(), points[next].as_ref()));
        }
        chosen.push(next);
    }
    Ok(chosen)
}
