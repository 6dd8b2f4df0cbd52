//! Per-seed evaluation of a trained pair of agents.

use std::collections::BTreeMap;

use emergelex_core::agent::{AgentState, Utterance};
use emergelex_core::crossmodal::{decode_posterior, encode_posterior, interpersonal_predict};
use emergelex_core::data::{Scene, SceneSet, View};
use emergelex_core::game::Variant;
use emergelex_core::h2h::{h2h_cross_modal_predict, H2hAgent};
use emergelex_core::metrics::{
    ari, build_word_modality_joint, ear, kappa, nmi, squared_errors, welch_t_one_sided, WelchResult,
};
use emergelex_core::{ByModality, Error, Modality, Result, Rng};
use serde::{Deserialize, Serialize};

/// A trained pair, either naming-game agents or the integrated baseline.
#[derive(Debug, Clone)]
pub enum Trained {
    Csl { variant: Variant, a: AgentState, b: AgentState },
    H2h { a: H2hAgent, b: H2hAgent },
}

impl Trained {
    pub fn variant(&self) -> Variant {
        match self {
            Trained::Csl { variant, .. } => *variant,
            Trained::H2h { .. } => Variant::H2hG,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    /// Word-modality NMI for agents A and B.
    pub nmi: Option<[f64; 2]>,
    /// Categorization ARI against the hidden labels, agents A and B.
    pub ari: [ByModality<f64>; 2],
    /// Per-slot agreement of the two agents' words; `None` when undefined.
    pub kappa: Option<ByModality<Option<f64>>>,
    pub ear: Option<f64>,
    pub mse_train: ByModality<f64>,
    pub mse_test: ByModality<f64>,
    /// Test errors larger than training errors; `None` when undefined.
    pub welch: ByModality<Option<WelchResult>>,
    /// Share of novel-combination scenes whose color and object words
    /// decode to the true types.
    pub novel_decode: Option<f64>,
    /// Swapping only the color word changes only the color prediction.
    pub color_swap_factorized: Option<bool>,
}

impl SeedMetrics {
    /// Named scalar values, for averaging and tables.
    pub fn scalars(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        if let Some([a, b]) = self.nmi {
            out.insert("nmi_a".into(), a);
            out.insert("nmi_b".into(), b);
        }
        for m in Modality::ALL {
            let s = m.short();
            out.insert(format!("ari_a_{s}"), self.ari[0][m]);
            out.insert(format!("ari_b_{s}"), self.ari[1][m]);
            if let Some(Some(k)) = self.kappa.as_ref().map(|k| k[m]) {
                out.insert(format!("kappa_{s}"), k);
            }
            out.insert(format!("mse_train_{s}"), self.mse_train[m]);
            out.insert(format!("mse_test_{s}"), self.mse_test[m]);
            if let Some(w) = self.welch[m] {
                out.insert(format!("welch_t_{s}"), w.t);
                out.insert(format!("welch_p_{s}"), w.p);
            }
        }
        if let Some(e) = self.ear {
            out.insert("ear".into(), e);
        }
        if let Some(f) = self.novel_decode {
            out.insert("novel_decode".into(), f);
        }
        out
    }

    pub fn mse_test_mean(&self) -> f64 {
        Modality::ALL.iter().map(|m| self.mse_test[*m]).sum::<f64>() / 4.0
    }
}

fn truth_labels(scenes: &[Scene], m: Modality) -> Vec<usize> {
    scenes
        .iter()
        .flat_map(|s| (0..s.n_obs(m)).map(move |j| s.truth.label(m, j)))
        .collect()
}

/// Majority true type of each category over an agent's own assignments.
fn majority_map(assign: &[usize], truth: &[usize], n_categories: usize) -> Vec<Option<usize>> {
    let n_types = truth.iter().max().map_or(0, |t| t + 1);
    let mut counts = vec![vec![0usize; n_types]; n_categories];
    for (k, t) in assign.iter().zip(truth) {
        counts[*k][*t] += 1;
    }
    counts
        .iter()
        .map(|row| {
            let best = (0..n_types).max_by_key(|t| (row[*t], std::cmp::Reverse(*t)))?;
            (row[best] > 0).then_some(best)
        })
        .collect()
}

/// Each agent's most probable word for every slot of every training scene,
/// in canonical modality order.
pub fn eval_words(agent: &AgentState, mec: bool) -> Vec<ByModality<usize>> {
    (0..agent.n_scenes())
        .map(|d| {
            ByModality::from_fn(|m| {
                let l = agent.flat_index(m, agent.attended_category(m, d));
                agent.production_row(l, mec).argmax()
            })
        })
        .collect()
}

fn argmax_utterance(speaker: &AgentState, scene: &Scene, mec: bool) -> Result<Utterance> {
    let words = Modality::ALL
        .iter()
        .map(|m| {
            let k = encode_posterior(speaker, scene, *m)?.argmax();
            Ok(speaker.production_row(speaker.flat_index(*m, k), mec).argmax())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Utterance {
        words,
        order: Modality::ALL,
    })
}

/// Posterior-weighted mean observation the listener predicts for `m`.
pub fn posterior_mean(listener: &AgentState, utt: &Utterance, m: Modality, mec: bool) -> Result<Vec<f64>> {
    let post = decode_posterior(listener, utt, m, mec)?;
    let mut acc = vec![0.0; listener.dims()[m]];
    for (k, p) in post.as_slice().iter().enumerate() {
        for (a, mu) in acc.iter_mut().zip(listener.phi(m, k).mean.iter()) {
            *a += p * mu;
        }
    }
    Ok(acc)
}

/// Replaces the color word of a scene's utterance with every other word
/// and checks that only the color prediction moves.
pub fn color_swap_factorized(speaker: &AgentState, listener: &AgentState, scene: &Scene, mec: bool) -> Result<bool> {
    let base = argmax_utterance(speaker, scene, mec)?;
    let before = ByModality::<()>::default().try_map(|m, _| posterior_mean(listener, &base, m, mec))?;
    let ci = Modality::Color.index();
    let mut color_moved = false;
    for w in (0..listener.vocab()).filter(|w| *w != base.words[ci]) {
        let mut swapped = base.clone();
        swapped.words[ci] = w;
        for m in Modality::ALL {
            let after = posterior_mean(listener, &swapped, m, mec)?;
            if m == Modality::Color {
                color_moved |= after != before[m];
            } else if after != before[m] {
                return Ok(false);
            }
        }
    }
    Ok(color_moved)
}

/// Share of scenes where the listener's argmax color and object categories,
/// mapped to their majority true type, match the scene's attended object.
pub fn novel_decode_rate(
    speaker: &AgentState,
    listener: &AgentState,
    speaker_scenes: &[Scene],
    listener_train: &[Scene],
    mec: bool,
) -> Result<f64> {
    let maps = ByModality::<()>::default().map(|m, _| {
        majority_map(&listener.assignments(m), &truth_labels(listener_train, m), listener.n_categories(m))
    });
    let mut hits = 0;
    for s in speaker_scenes {
        let utt = argmax_utterance(speaker, s, mec)?;
        let ok = [Modality::Color, Modality::Object].iter().all(|m| {
            decode_posterior(listener, &utt, *m, mec)
                .map(|p| maps[*m][p.argmax()] == Some(s.truth.label(*m, s.attended)))
                .unwrap_or(false)
        });
        hits += ok as usize;
    }
    Ok(hits as f64 / speaker_scenes.len() as f64)
}

struct Views {
    train: [Vec<Scene>; 2],
    test: [Vec<Scene>; 2],
}

impl Views {
    fn of(set: &SceneSet) -> Self {
        Views {
            train: [set.train_view(View::A), set.train_view(View::B)],
            test: [set.test_view(View::A), set.test_view(View::B)],
        }
    }
}

/// Squared errors per modality, both speaking directions pooled.
fn prediction_errors(
    scenes: &[Vec<Scene>; 2],
    mut predict: impl FnMut(usize, &Scene) -> Result<ByModality<Vec<f64>>>,
) -> Result<ByModality<Vec<f64>>> {
    let mut errs: ByModality<Vec<f64>> = ByModality::default();
    for speaker in 0..2 {
        let listener = 1 - speaker;
        for (s_sp, s_li) in scenes[speaker].iter().zip(&scenes[listener]) {
            let mean = predict(speaker, s_sp)?;
            for m in Modality::ALL {
                errs[m].extend(squared_errors(&[&mean[m]], &[s_li.attended_obs(m)])?);
            }
        }
    }
    Ok(errs)
}

fn avg(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn welch_or_none(train: &[f64], test: &[f64]) -> Result<Option<WelchResult>> {
    match welch_t_one_sided(train, test) {
        Ok(w) => Ok(Some(w)),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn evaluate(trained: &Trained, set: &SceneSet, seed: u64) -> Result<SeedMetrics> {
    let views = Views::of(set);
    if views.test[0].len() < 2 || views.train[0].len() < 2 {
        return Err(Error::InvalidInput("evaluation needs at least two training and two test scenes".into()));
    }
    let mut rng = Rng::new(seed).fork(7);
    match trained {
        Trained::Csl { variant, a, b } => {
            let mec = variant.mec();
            let agents = [a, b];
            let ari_of = |ag: &AgentState, scenes: &[Scene]| -> Result<ByModality<f64>> {
                ByModality::<()>::default().try_map(|m, _| ari(&ag.assignments(m), &truth_labels(scenes, m)))
            };
            let words = [eval_words(a, mec), eval_words(b, mec)];
            let kappa = ByModality::<()>::default().try_map(|m, _| -> Result<Option<f64>> {
                let x: Vec<usize> = words[0].iter().map(|w| w[m]).collect();
                let y: Vec<usize> = words[1].iter().map(|w| w[m]).collect();
                match kappa(&x, &y) {
                    Ok(k) => Ok(Some(k.value)),
                    Err(Error::Undefined(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            })?;
            let flat = |ws: &[ByModality<usize>]| -> Vec<usize> {
                ws.iter().flat_map(|w| Modality::ALL.map(|m| w[m])).collect()
            };
            let mut predict = |sp: usize, scene: &Scene| -> Result<ByModality<Vec<f64>>> {
                Ok(interpersonal_predict(agents[sp], agents[1 - sp], scene, mec, &mut rng)?.1.mean)
            };
            let e_train = prediction_errors(&views.train, &mut predict)?;
            let e_test = prediction_errors(&views.test, &mut predict)?;
            let novel = [(a, b, 0), (b, a, 1)]
                .iter()
                .map(|(sp, li, i)| novel_decode_rate(sp, li, &views.test[*i], &views.train[1 - i], mec))
                .collect::<Result<Vec<_>>>()?;
            Ok(SeedMetrics {
                seed,
                nmi: Some([nmi(&build_word_modality_joint(a)?)?, nmi(&build_word_modality_joint(b)?)?]),
                ari: [ari_of(a, &views.train[0])?, ari_of(b, &views.train[1])?],
                kappa: Some(kappa),
                ear: Some(ear(&flat(&words[0]), &flat(&words[1]))?),
                mse_train: e_train.map(|_, e| avg(e)),
                mse_test: e_test.map(|_, e| avg(e)),
                welch: ByModality::<()>::default().try_map(|m, _| welch_or_none(&e_train[m], &e_test[m]))?,
                novel_decode: Some(avg(&novel)),
                color_swap_factorized: Some(color_swap_factorized(a, b, &views.test[0][0], mec)?),
            })
        }
        Trained::H2h { a, b } => {
            let agents = [a, b];
            let ari_of = |ag: &H2hAgent, scenes: &[Scene]| -> Result<ByModality<f64>> {
                ByModality::<()>::default().try_map(|m, _| {
                    let pred: Vec<usize> = if m.is_object_level() {
                        ag.assignments()
                    } else {
                        (0..ag.n_scenes()).map(|d| ag.attended_category(d)).collect()
                    };
                    ari(&pred, &truth_labels(scenes, m))
                })
            };
            let mut predict = |sp: usize, scene: &Scene| -> Result<ByModality<Vec<f64>>> {
                Ok(h2h_cross_modal_predict(agents[sp], agents[1 - sp], scene, &mut rng)?.1.mean)
            };
            let e_train = prediction_errors(&views.train, &mut predict)?;
            let e_test = prediction_errors(&views.test, &mut predict)?;
            Ok(SeedMetrics {
                seed,
                nmi: None,
                ari: [ari_of(a, &views.train[0])?, ari_of(b, &views.train[1])?],
                kappa: None,
                ear: None,
                mse_train: e_train.map(|_, e| avg(e)),
                mse_test: e_test.map(|_, e| avg(e)),
                welch: ByModality::<()>::default().try_map(|m, _| welch_or_none(&e_train[m], &e_test[m]))?,
                novel_decode: None,
                color_swap_factorized: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_mapping() {
        let assign = [0, 0, 0, 1, 1, 2];
        let truth = [3, 3, 1, 2, 2, 0];
        let map = majority_map(&assign, &truth, 4);
        assert_eq!(map, vec![Some(3), Some(2), Some(0), None]);
    }
}
