//! Interpersonal cross-modal inference: a speaker names a scene, a
//! listener turns the words back into predicted observations.

use serde::{Deserialize, Serialize};

use crate::agent::{AgentState, Utterance, SLOTS};
use crate::data::Scene;
use crate::error::{Error, Result};
use crate::modality::{ByModality, Modality};
use crate::prob::categorical::sample_categorical;
use crate::prob::rng::Rng;
use crate::prob::simplex::Simplex;

/// Category posterior of the attended object (or the action) given only
/// the speaker's observation: `pi(k) N(x | phi_k)`.
pub fn encode_posterior(speaker: &AgentState, scene: &Scene, m: Modality) -> Result<Simplex> {
    let x = scene.attended_obs(m);
    if x.len() != speaker.dims()[m] {
        return Err(Error::invalid(format!("{m} observation has {} dims, expected {}", x.len(), speaker.dims()[m])));
    }
    let lw: Vec<f64> = (0..speaker.n_categories(m))
        .map(|k| speaker.pi(m)[k].ln() + speaker.emission(m, k).logpdf(x))
        .collect();
    Simplex::from_log_weights(&lw)
}

pub fn encode_scene(speaker: &AgentState, scene: &Scene, rng: &mut Rng) -> Result<ByModality<usize>> {
    let post = ByModality::<()>::default().try_map(|m, _| encode_posterior(speaker, scene, m))?;
    post.try_map(|_, p| sample_categorical(p, rng))
}

/// One word per modality in canonical order.
pub fn encode_words(speaker: &AgentState, z: &ByModality<usize>, mec: bool, rng: &mut Rng) -> Result<Utterance> {
    let words = Modality::ALL
        .iter()
        .map(|m| {
            let row = speaker.production_row(speaker.flat_index(*m, z[*m]), mec);
            sample_categorical(&row, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Utterance {
        words,
        order: Modality::ALL,
    })
}

/// Category posterior of modality `m` given only the word in its slot:
/// `pi(k) P(w | m, k)`.
pub fn decode_posterior(listener: &AgentState, utt: &Utterance, m: Modality, mec: bool) -> Result<Simplex> {
    if utt.words.len() != SLOTS {
        return Err(Error::invalid(format!("utterance has {} words", utt.words.len())));
    }
    let w = utt.word_for(m);
    if w >= listener.vocab() {
        return Err(Error::invalid(format!("word {w} outside vocabulary of {}", listener.vocab())));
    }
    let weights: Vec<f64> = (0..listener.n_categories(m))
        .map(|k| listener.pi(m)[k] * listener.production_row(listener.flat_index(m, k), mec)[w])
        .collect();
    Simplex::from_weights(weights)
}

/// Decoded categories with the posteriors they were drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub z: ByModality<usize>,
    pub posterior: ByModality<Simplex>,
}

pub fn decode_words(listener: &AgentState, utt: &Utterance, mec: bool, rng: &mut Rng) -> Result<Decoded> {
    let posterior = ByModality::<()>::default().try_map(|m, _| decode_posterior(listener, utt, m, mec))?;
    let z = posterior.try_map(|_, p| sample_categorical(p, rng))?;
    Ok(Decoded { z, posterior })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub z: ByModality<usize>,
    /// A draw from the decoded category's Gaussian.
    pub sample: ByModality<Vec<f64>>,
    /// Posterior-weighted mean of the category means.
    pub mean: ByModality<Vec<f64>>,
}

pub fn predict_observations(listener: &AgentState, decoded: &Decoded, rng: &mut Rng) -> Result<Prediction> {
    let sample = decoded
        .z
        .map(|m, k| listener.emission(m, *k).sample(rng).iter().copied().collect());
    let mean = decoded.posterior.map(|m, post| {
        let mut acc = vec![0.0; listener.dims()[m]];
        for (k, p) in post.as_slice().iter().enumerate() {
            for (a, mu) in acc.iter_mut().zip(listener.phi(m, k).mean.iter()) {
                *a += p * mu;
            }
        }
        acc
    });
    if sample.iter().chain(mean.iter()).any(|(_, v)| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::numerical("non-finite prediction"));
    }
    Ok(Prediction {
        z: decoded.z,
        sample,
        mean,
    })
}

/// Speaker observes `scene`, names it, and the listener predicts what it
/// would observe.
pub fn interpersonal_predict(
    speaker: &AgentState,
    listener: &AgentState,
    scene: &Scene,
    mec: bool,
    rng: &mut Rng,
) -> Result<(Utterance, Prediction)> {
    let z = encode_scene(speaker, scene, rng)?;
    let utt = encode_words(speaker, &z, mec, rng)?;
    let decoded = decode_words(listener, &utt, mec, rng)?;
    let pred = predict_observations(listener, &decoded, rng)?;
    Ok((utt, pred))
}
