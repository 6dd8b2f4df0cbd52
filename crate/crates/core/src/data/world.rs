use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::{ByModality, Modality};
use crate::prob::rng::Rng;

const MAX_ATTEMPTS: usize = 10_000;

/// Shape of the synthetic world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub n_action_types: usize,
    pub n_position_regions: usize,
    pub n_object_types: usize,
    pub n_color_types: usize,
    /// Per-dimension standard deviation of observation noise.
    pub noise_scale: ByModality<f64>,
    pub dims: ByModality<usize>,
    /// Prototypes are drawn uniformly from `[-spread, spread]^dim`.
    pub spread: ByModality<f64>,
    /// Scale of the region-dependent posture offset added to action
    /// features, in units of the action noise scale.
    pub posture_scale: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        // Scaled against the model's prior covariance (0.01 per dimension):
        // per-dimension noise well below it keeps the high-dimensional
        // mixtures from freezing, while action keeps region-dependent
        // posture offsets that blur its types (see `calibration` test).
        WorldSpec {
            n_action_types: 3,
            n_position_regions: 4,
            n_object_types: 4,
            n_color_types: 4,
            noise_scale: ByModality::new(0.05, 0.07, 0.05, 0.05),
            dims: ByModality::new(29, 2, 30, 10),
            spread: ByModality::new(0.15, 0.5, 0.15, 0.25),
            posture_scale: 1.1,
        }
    }
}

impl WorldSpec {
    pub fn n_types(&self, m: Modality) -> usize {
        match m {
            Modality::Action => self.n_action_types,
            Modality::Position => self.n_position_regions,
            Modality::Object => self.n_object_types,
            Modality::Color => self.n_color_types,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for m in Modality::ALL {
            if self.n_types(m) == 0 {
                return Err(Error::invalid(format!("{m}: type count must be at least 1")));
            }
            if self.dims[m] == 0 {
                return Err(Error::invalid(format!("{m}: dimension must be at least 1")));
            }
            if !(self.noise_scale[m] >= 0.0) || !(self.spread[m] > 0.0) {
                return Err(Error::invalid(format!("{m}: noise must be >= 0 and spread > 0")));
            }
        }
        if !(self.posture_scale >= 0.0) {
            return Err(Error::invalid("posture_scale must be non-negative"));
        }
        Ok(())
    }
}

/// Prototype vectors for every type in every modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub spec: WorldSpec,
    pub prototypes: ByModality<Vec<Vec<f64>>>,
    /// Action offset per position region of the attended object.
    pub posture: Vec<Vec<f64>>,
}

impl World {
    /// Noise-free action feature for an action type performed at a region.
    pub fn action_center(&self, action_type: usize, region: usize) -> Vec<f64> {
        self.prototypes.action[action_type]
            .iter()
            .zip(&self.posture[region])
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Index of the closest prototype (lowest index on ties).
    pub fn nearest_prototype(&self, m: Modality, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (k, p) in self.prototypes[m].iter().enumerate() {
            let d = sq_dist(p, x);
            if d < best.1 {
                best = (k, d);
            }
        }
        best.0
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn draw_prototypes(n: usize, dim: usize, spread: f64, min_sep: f64, rng: &mut Rng) -> Option<Vec<Vec<f64>>> {
    for _ in 0..MAX_ATTEMPTS {
        let protos: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| spread * (2.0 * rng.uniform() - 1.0)).collect())
            .collect();
        let ok = (0..n).all(|i| (0..i).all(|j| sq_dist(&protos[i], &protos[j]).sqrt() >= min_sep));
        if ok {
            return Some(protos);
        }
    }
    None
}

/// Draws per-type prototypes, rejecting sets whose pairwise distance falls
/// below `4 * noise_scale`.
pub fn generate_world(spec: &WorldSpec, rng: &mut Rng) -> Result<World> {
    spec.validate()?;
    let prototypes = spec.dims.try_map(|m, dim| {
        draw_prototypes(spec.n_types(m), *dim, spec.spread[m], 4.0 * spec.noise_scale[m], rng)
            .ok_or_else(|| {
                Error::Generation(format!(
                    "{m}: no prototype set with separation {} in {MAX_ATTEMPTS} attempts",
                    4.0 * spec.noise_scale[m]
                ))
            })
    })?;
    let posture_sd = spec.posture_scale * spec.noise_scale.action;
    let posture = (0..spec.n_position_regions)
        .map(|_| (0..spec.dims.action).map(|_| posture_sd * rng.standard_normal()).collect())
        .collect();
    Ok(World {
        spec: spec.clone(),
        prototypes,
        posture,
    })
}
