//! The integrated-category baseline: one category per object generates
//! all four modalities, and agents exchange a single word per scene.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::agent::{GaussSnapshot, InitPolicy};
use crate::crossmodal::Prediction;
use crate::data::Scene;
use crate::error::{Error, Result};
use crate::game::{mh_accept, HalfTurnStats, IterationRecord};
use crate::modality::{ByModality, Modality};
use crate::prob::categorical::{sample_categorical, sample_log_weights};
use crate::prob::dirichlet::sample_dirichlet_posterior;
use crate::prob::giw::{giw_log_density, giw_posterior, sample_gauss_params};
use crate::prob::rng::Rng;
use crate::prob::seeding::kmeans_pp;
use crate::prob::simplex::Simplex;
use crate::{GaussParams, GiwHyper, MvNormal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct H2hHyper {
    /// Concentration of the word-distribution prior.
    pub alpha: f64,
    /// Concentration of the category-weight prior.
    pub gamma: f64,
    pub kappa0: f64,
    pub v0_scale: f64,
    pub categories: usize,
    pub vocab: usize,
    pub init: InitPolicy,
}

impl Default for H2hHyper {
    fn default() -> Self {
        H2hHyper {
            alpha: 1.0,
            gamma: 0.1,
            kappa0: 0.001,
            v0_scale: 0.01,
            categories: 40,
            vocab: 13,
            init: InitPolicy::DataSeeded,
        }
    }
}

impl H2hHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.gamma > 0.0 && self.kappa0 > 0.0 && self.v0_scale > 0.0) {
            return Err(Error::invalid("alpha, gamma, kappa0 and v0_scale must be positive"));
        }
        if self.categories == 0 || self.vocab == 0 {
            return Err(Error::invalid("category and vocabulary counts must be positive"));
        }
        Ok(())
    }
}

fn object_features(scene: &Scene, j: usize) -> Vec<f64> {
    [Modality::Position, Modality::Object, Modality::Color]
        .iter()
        .flat_map(|m| scene.obs(*m, j).iter().copied())
        .collect()
}

#[derive(Debug, Clone)]
pub struct H2hAgent {
    hyper: H2hHyper,
    dims: ByModality<usize>,
    giw: ByModality<GiwHyper>,
    pi: Simplex,
    phi: ByModality<Vec<GaussParams>>,
    emission: ByModality<Vec<MvNormal>>,
    theta: Vec<Simplex>,
    /// `c[d][j]`: integrated category of object `j` in scene `d`.
    c: Vec<Vec<usize>>,
    attended: Vec<usize>,
}

impl H2hAgent {
    pub fn init(hyper: &H2hHyper, scenes: &[Scene], rng: &mut Rng) -> Result<Self> {
        hyper.validate()?;
        let first = scenes.first().ok_or_else(|| Error::invalid("no scenes"))?;
        let dims = ByModality::from_fn(|m| first.obs(m, 0).len());
        let l = hyper.categories;
        let giw = dims.try_map(|_, d| GiwHyper::isotropic(*d, hyper.kappa0, hyper.v0_scale))?;
        let pi = sample_dirichlet_posterior(&vec![0.0; l], hyper.gamma, rng)?;
        let mut phi = giw.try_map(|_, g| (0..l).map(|_| sample_gauss_params(g, rng)).collect::<Result<Vec<_>>>())?;
        let theta = (0..l)
            .map(|_| sample_dirichlet_posterior(&vec![0.0; hyper.vocab], hyper.alpha, rng))
            .collect::<Result<Vec<_>>>()?;
        if hyper.init == InitPolicy::DataSeeded {
            let objects: Vec<(usize, usize)> = scenes
                .iter()
                .enumerate()
                .flat_map(|(d, s)| (0..s.n_objects()).map(move |j| (d, j)))
                .collect();
            let feats: Vec<Vec<f64>> = objects.iter().map(|(d, j)| object_features(&scenes[*d], *j)).collect();
            for (k, i) in kmeans_pp(&feats, l, rng)?.into_iter().enumerate() {
                let (d, j) = objects[i];
                for m in Modality::ALL {
                    let cov = &giw[m].v0 / (giw[m].nu0 - dims[m] as f64 - 1.0);
                    let x = if m.is_object_level() { scenes[d].obs(m, j) } else { scenes[d].obs(m, 0) };
                    phi[m][k] = GaussParams::new(DVector::from_column_slice(x), cov)?;
                }
            }
        }
        let mut agent = H2hAgent {
            hyper: hyper.clone(),
            dims,
            giw,
            pi,
            emission: ByModality::default(),
            phi,
            theta,
            c: Vec::new(),
            attended: scenes.iter().map(|s| s.attended).collect(),
        };
        agent.refresh_emission()?;
        let mut c = Vec::with_capacity(scenes.len());
        for (d, s) in scenes.iter().enumerate() {
            let cs = (0..s.n_objects())
                .map(|j| match hyper.init {
                    InitPolicy::Prior => sample_categorical(&agent.pi, rng),
                    InitPolicy::DataSeeded => sample_log_weights(&agent.conditional_log_weights(s, None, d, j), rng),
                })
                .collect::<Result<Vec<_>>>()?;
            c.push(cs);
        }
        agent.c = c;
        Ok(agent)
    }

    fn refresh_emission(&mut self) -> Result<()> {
        self.emission = self
            .phi
            .try_map(|_, gs| gs.iter().map(MvNormal::new).collect::<Result<Vec<_>>>())?;
        Ok(())
    }

    pub fn hyper(&self) -> &H2hHyper {
        &self.hyper
    }

    pub fn n_scenes(&self) -> usize {
        self.attended.len()
    }

    pub fn n_categories(&self) -> usize {
        self.hyper.categories
    }

    pub fn vocab(&self) -> usize {
        self.hyper.vocab
    }

    pub fn pi(&self) -> &Simplex {
        &self.pi
    }

    pub fn phi(&self, m: Modality, l: usize) -> &GaussParams {
        &self.phi[m][l]
    }

    pub fn theta(&self, l: usize) -> &Simplex {
        &self.theta[l]
    }

    pub fn category(&self, d: usize, j: usize) -> usize {
        self.c[d][j]
    }

    pub fn attended_category(&self, d: usize) -> usize {
        self.c[d][self.attended[d]]
    }

    /// Categories of every object, flattened over scenes.
    pub fn assignments(&self) -> Vec<usize> {
        self.c.iter().flatten().copied().collect()
    }

    pub fn occupancy(&self) -> Vec<usize> {
        let mut n = vec![0; self.hyper.categories];
        for l in self.c.iter().flatten() {
            n[*l] += 1;
        }
        n
    }

    pub fn set_theta(&mut self, l: usize, row: Simplex) -> Result<()> {
        if row.len() != self.hyper.vocab || l >= self.hyper.categories {
            return Err(Error::invalid("theta row out of range"));
        }
        self.theta[l] = row;
        Ok(())
    }

    pub fn set_pi(&mut self, pi: Simplex) -> Result<()> {
        if pi.len() != self.hyper.categories {
            return Err(Error::invalid("pi length must equal the category count"));
        }
        self.pi = pi;
        Ok(())
    }

    pub fn set_phi(&mut self, m: Modality, l: usize, g: GaussParams) -> Result<()> {
        if g.dim() != self.dims[m] || l >= self.hyper.categories {
            return Err(Error::invalid("phi dimension or category out of range"));
        }
        self.emission[m][l] = MvNormal::new(&g)?;
        self.phi[m][l] = g;
        Ok(())
    }

    pub fn set_category(&mut self, d: usize, j: usize, l: usize) -> Result<()> {
        if l >= self.hyper.categories {
            return Err(Error::invalid("category out of range"));
        }
        self.c[d][j] = l;
        Ok(())
    }

    /// Word distribution for scene `d`: the attended object's row.
    pub fn word_dist(&self, d: usize) -> &Simplex {
        &self.theta[self.attended_category(d)]
    }

    pub fn sample_word(&self, d: usize, rng: &mut Rng) -> Result<usize> {
        sample_categorical(self.word_dist(d), rng)
    }

    pub fn initial_words(&self, rng: &mut Rng) -> Result<Vec<usize>> {
        (0..self.n_scenes()).map(|d| self.sample_word(d, rng)).collect()
    }

    fn check_inputs(&self, scenes: &[Scene], words: &[usize]) -> Result<()> {
        if scenes.len() != self.n_scenes() || words.len() != self.n_scenes() {
            return Err(Error::invalid("scene or word count does not match the agent"));
        }
        for (d, s) in scenes.iter().enumerate() {
            if s.n_objects() != self.c[d].len() || s.attended != self.attended[d] {
                return Err(Error::invalid(format!("scene {d} does not match the agent's data")));
            }
        }
        if words.iter().any(|w| *w >= self.hyper.vocab) {
            return Err(Error::invalid("word outside the vocabulary"));
        }
        Ok(())
    }

    /// Unnormalized log conditional of `c[d][j]`. The word and the action
    /// only inform the attended object.
    fn conditional_log_weights(&self, scene: &Scene, word: Option<usize>, d: usize, j: usize) -> Vec<f64> {
        let attended = j == self.attended[d];
        (0..self.hyper.categories)
            .map(|l| {
                let mut lw = self.pi[l].ln();
                for m in [Modality::Position, Modality::Object, Modality::Color] {
                    lw += self.emission[m][l].logpdf(scene.obs(m, j));
                }
                if attended {
                    lw += self.emission[Modality::Action][l].logpdf(scene.obs(Modality::Action, 0));
                    if let Some(w) = word {
                        lw += self.theta[l][w].ln();
                    }
                }
                lw
            })
            .collect()
    }

    pub fn category_conditional(&self, scenes: &[Scene], words: &[usize], d: usize, j: usize) -> Result<Simplex> {
        self.check_inputs(scenes, words)?;
        Simplex::from_log_weights(&self.conditional_log_weights(&scenes[d], Some(words[d]), d, j))
    }

    /// Learning and perception for the listener: phi, theta, pi from their
    /// conditionals, then every category assignment.
    pub fn update(&mut self, scenes: &[Scene], words: &[usize], rng: &mut Rng) -> Result<()> {
        self.check_inputs(scenes, words)?;
        let l_count = self.hyper.categories;
        for m in Modality::ALL {
            let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); l_count];
            for (d, s) in scenes.iter().enumerate() {
                if m.is_object_level() {
                    for (j, l) in self.c[d].iter().enumerate() {
                        members[*l].push(s.obs(m, j));
                    }
                } else {
                    members[self.attended_category(d)].push(s.obs(m, 0));
                }
            }
            for (l, data) in members.iter().enumerate() {
                let g = sample_gauss_params(&giw_posterior(data, &self.giw[m])?, rng)?;
                self.emission[m][l] = MvNormal::new(&g)?;
                self.phi[m][l] = g;
            }
        }
        let mut counts = vec![vec![0.0; self.hyper.vocab]; l_count];
        for (d, w) in words.iter().enumerate() {
            counts[self.attended_category(d)][*w] += 1.0;
        }
        for (l, cnt) in counts.iter().enumerate() {
            self.theta[l] = sample_dirichlet_posterior(cnt, self.hyper.alpha, rng)?;
        }
        let occ: Vec<f64> = self.occupancy().into_iter().map(|n| n as f64).collect();
        self.pi = sample_dirichlet_posterior(&occ, self.hyper.gamma, rng)?;
        self.resample_categories(scenes, words, rng)
    }

    /// Resamples every category assignment from its full conditional.
    pub fn resample_categories(&mut self, scenes: &[Scene], words: &[usize], rng: &mut Rng) -> Result<()> {
        self.check_inputs(scenes, words)?;
        for (d, s) in scenes.iter().enumerate() {
            for j in 0..s.n_objects() {
                let lw = self.conditional_log_weights(s, Some(words[d]), d, j);
                self.c[d][j] = sample_log_weights(&lw, rng)?;
            }
        }
        Ok(())
    }

    pub fn log_joint(&self, scenes: &[Scene], words: &[usize]) -> Result<f64> {
        self.check_inputs(scenes, words)?;
        let dir = |x: &Simplex, a: f64| {
            let n = x.len() as f64;
            statrs::function::gamma::ln_gamma(a * n) - n * statrs::function::gamma::ln_gamma(a)
                + x.as_slice().iter().map(|p| (a - 1.0) * p.ln()).sum::<f64>()
        };
        let mut total = dir(&self.pi, self.hyper.gamma);
        for row in &self.theta {
            total += dir(row, self.hyper.alpha);
        }
        for m in Modality::ALL {
            for g in &self.phi[m] {
                total += giw_log_density(g, &self.giw[m])?;
            }
        }
        for (d, s) in scenes.iter().enumerate() {
            for (j, l) in self.c[d].iter().enumerate() {
                total += self.pi[*l].ln();
                for m in [Modality::Position, Modality::Object, Modality::Color] {
                    total += self.emission[m][*l].logpdf(s.obs(m, j));
                }
            }
            let la = self.attended_category(d);
            total += self.emission[Modality::Action][la].logpdf(s.obs(Modality::Action, 0));
            total += self.theta[la][words[d]].ln();
        }
        if total.is_finite() {
            Ok(total)
        } else {
            Err(Error::numerical(format!("log joint is {total}")))
        }
    }

    /// Posterior over integrated categories of the attended object given all
    /// four of its observations.
    pub fn encode_posterior(&self, scene: &Scene) -> Result<Simplex> {
        let j = scene.attended;
        let lw: Vec<f64> = (0..self.hyper.categories)
            .map(|l| {
                self.pi[l].ln()
                    + Modality::ALL
                        .iter()
                        .map(|m| self.emission[*m][l].logpdf(scene.obs(*m, if m.is_object_level() { j } else { 0 })))
                        .sum::<f64>()
            })
            .collect();
        Simplex::from_log_weights(&lw)
    }

    /// Posterior over integrated categories given only a word.
    pub fn decode_posterior(&self, word: usize) -> Result<Simplex> {
        if word >= self.hyper.vocab {
            return Err(Error::invalid(format!("word {word} outside vocabulary of {}", self.hyper.vocab)));
        }
        Simplex::from_weights((0..self.hyper.categories).map(|l| self.pi[l] * self.theta[l][word]).collect())
    }

    pub fn snapshot(&self) -> H2hSnapshot {
        H2hSnapshot {
            hyper: self.hyper.clone(),
            dims: self.dims,
            pi: self.pi.clone(),
            phi: self.phi.map(|_, gs| gs.iter().map(GaussSnapshot::from).collect()),
            theta: self.theta.clone(),
            c: self.c.clone(),
            attended: self.attended.clone(),
        }
    }

    pub fn from_snapshot(s: &H2hSnapshot) -> Result<Self> {
        s.hyper.validate()?;
        let l = s.hyper.categories;
        if s.pi.len() != l
            || s.theta.len() != l
            || Modality::ALL.iter().any(|m| s.phi[*m].len() != l)
            || s.c.len() != s.attended.len()
            || s.c.iter().flatten().any(|x| *x >= l)
        {
            return Err(Error::invalid("h2h snapshot has inconsistent shapes"));
        }
        let phi = s
            .phi
            .try_map(|_, gs| gs.iter().map(GaussSnapshot::to_params).collect::<Result<Vec<_>>>())?;
        let mut agent = H2hAgent {
            hyper: s.hyper.clone(),
            dims: s.dims,
            giw: s.dims.try_map(|_, d| GiwHyper::isotropic(*d, s.hyper.kappa0, s.hyper.v0_scale))?,
            pi: s.pi.clone(),
            phi,
            emission: ByModality::default(),
            theta: s.theta.clone(),
            c: s.c.clone(),
            attended: s.attended.clone(),
        };
        agent.refresh_emission()?;
        Ok(agent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2hSnapshot {
    pub hyper: H2hHyper,
    pub dims: ByModality<usize>,
    pub pi: Simplex,
    pub phi: ByModality<Vec<GaussSnapshot>>,
    pub theta: Vec<Simplex>,
    pub c: Vec<Vec<usize>>,
    pub attended: Vec<usize>,
}

/// Listener judges one proposed word for scene `d`.
pub fn h2h_mh_step(speaker: &H2hAgent, listener: &H2hAgent, d: usize, current: usize, rng: &mut Rng) -> Result<usize> {
    let proposed = speaker.sample_word(d, rng)?;
    let dist = listener.word_dist(d);
    Ok(mh_accept(dist[proposed], dist[current], proposed, current, rng))
}

/// Proposal phase for every scene, without parameter updates.
pub fn h2h_communicate(
    speaker: &H2hAgent,
    listener: &H2hAgent,
    listener_words: &mut [usize],
    rng: &mut Rng,
) -> Result<HalfTurnStats> {
    if speaker.n_scenes() != listener.n_scenes() || listener_words.len() != listener.n_scenes() {
        return Err(Error::invalid("speaker, listener and words disagree on the number of scenes"));
    }
    let mut stats = HalfTurnStats::default();
    for (d, w) in listener_words.iter_mut().enumerate() {
        let proposed = speaker.sample_word(d, rng)?;
        let dist = listener.word_dist(d);
        let chosen = mh_accept(dist[proposed], dist[*w], proposed, *w, rng);
        stats.proposals += 1;
        if chosen == proposed {
            stats.accepted += 1;
        }
        *w = chosen;
    }
    Ok(stats)
}

#[derive(Debug, Clone)]
pub struct H2hOutcome {
    pub agent_a: H2hAgent,
    pub agent_b: H2hAgent,
    pub words_a: Vec<usize>,
    pub words_b: Vec<usize>,
    pub trace: Vec<IterationRecord>,
}

impl H2hOutcome {
    pub fn trace_jsonl(&self) -> String {
        self.trace
            .iter()
            .map(|r| serde_json::to_string(r).expect("trace records serialize") + "\n")
            .collect()
    }
}

pub fn h2h_run_game(
    hyper: &H2hHyper,
    scenes_a: &[Scene],
    scenes_b: &[Scene],
    iterations: usize,
    seed: u64,
) -> Result<H2hOutcome> {
    if iterations == 0 {
        return Err(Error::invalid("iterations must be at least 1"));
    }
    if scenes_a.len() != scenes_b.len() {
        return Err(Error::invalid("the two views must contain the same scenes"));
    }
    let root = Rng::new(seed);
    let mut agent_a = H2hAgent::init(hyper, scenes_a, &mut root.fork(1))?;
    let mut agent_b = H2hAgent::init(hyper, scenes_b, &mut root.fork(2))?;
    let mut rng = root.fork(3);
    let mut words_a = agent_a.initial_words(&mut rng)?;
    let mut words_b = agent_b.initial_words(&mut rng)?;
    let mut trace = Vec::with_capacity(iterations);
    for t in 0..iterations {
        let a_to_b = h2h_communicate(&agent_a, &agent_b, &mut words_b, &mut rng)?;
        agent_b.update(scenes_b, &words_b, &mut rng)?;
        let b_to_a = h2h_communicate(&agent_b, &agent_a, &mut words_a, &mut rng)?;
        agent_a.update(scenes_a, &words_a, &mut rng)?;
        trace.push(IterationRecord {
            t,
            a_to_b,
            b_to_a,
            log_joint_a: agent_a.log_joint(scenes_a, &words_a)?,
            log_joint_b: agent_b.log_joint(scenes_b, &words_b)?,
            words_a: words_a.iter().map(|w| vec![*w]).collect(),
            words_b: words_b.iter().map(|w| vec![*w]).collect(),
        });
    }
    Ok(H2hOutcome {
        agent_a,
        agent_b,
        words_a,
        words_b,
        trace,
    })
}

/// Speaker infers the attended object's integrated category from all four
/// observations and names it; the listener decodes the word into one
/// category and predicts every modality from it.
pub fn h2h_cross_modal_predict(
    speaker: &H2hAgent,
    listener: &H2hAgent,
    scene: &Scene,
    rng: &mut Rng,
) -> Result<(usize, Prediction)> {
    let c_sp = sample_categorical(&speaker.encode_posterior(scene)?, rng)?;
    let word = sample_categorical(speaker.theta(c_sp), rng)?;
    let post = listener.decode_posterior(word)?;
    let c_li = sample_categorical(&post, rng)?;
    let sample = ByModality::from_fn(|m| listener.emission[m][c_li].sample(rng).iter().copied().collect::<Vec<f64>>());
    let mean = ByModality::from_fn(|m| {
        let mut acc = vec![0.0; listener.dims[m]];
        for (l, p) in post.as_slice().iter().enumerate() {
            for (a, mu) in acc.iter_mut().zip(listener.phi[m][l].mean.iter()) {
                *a += p * mu;
            }
        }
        acc
    });
    Ok((
        word,
        Prediction {
            z: ByModality::new(c_li, c_li, c_li, c_li),
            sample,
            mean,
        },
    ))
}
