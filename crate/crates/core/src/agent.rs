//! One agent's cross-situational model: per-modality Gaussian mixtures, a
//! word distribution per (modality, category) pair, and the Gibbs updates
//! for learning (globals) and perception (assignments).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::Scene;
use crate::error::{Error, Result};
use crate::modality::{ByModality, Modality};
use crate::prob::categorical::{sample_categorical, sample_log_weights};
use crate::prob::dirichlet::{sample_dirichlet_posterior, stick_breaking};
use crate::prob::giw::{giw_log_density, giw_posterior, sample_gauss_params};
use crate::prob::rng::Rng;
use crate::prob::seeding::kmeans_pp;
use crate::prob::simplex::Simplex;
use crate::{GaussParams, GiwHyper, MvNormal};

/// Words per utterance: one per modality.
pub const SLOTS: usize = 4;

/// How the per-scene modality order of an utterance is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderPolicy {
    /// action, position, object, color for every scene.
    #[default]
    Canonical,
    /// A uniformly random permutation per scene, drawn once at init.
    RandomFixed,
}

/// How emission parameters and assignments are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    /// Emission means placed on observations chosen k-means++ style, with
    /// the prior's expected covariance; assignments drawn from `pi * N(x)`.
    #[default]
    DataSeeded,
    /// Emission parameters from the prior, assignments from `pi` alone.
    Prior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelHyper {
    /// Concentration of the category-weight prior (split as `alpha / K`).
    pub alpha: f64,
    /// Concentration of the word-distribution prior.
    pub gamma: f64,
    pub kappa0: f64,
    /// `V0 = v0_scale * I` in every modality.
    pub v0_scale: f64,
    pub categories: ByModality<usize>,
    pub vocab: usize,
    pub order: OrderPolicy,
    pub init: InitPolicy,
}

impl Default for ModelHyper {
    fn default() -> Self {
        ModelHyper {
            alpha: 1.0,
            gamma: 0.1,
            kappa0: 0.001,
            v0_scale: 0.01,
            categories: ByModality::new(10, 10, 10, 10),
            vocab: 13,
            order: OrderPolicy::Canonical,
            init: InitPolicy::DataSeeded,
        }
    }
}

impl ModelHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.gamma > 0.0 && self.kappa0 > 0.0 && self.v0_scale > 0.0) {
            return Err(Error::invalid("alpha, gamma, kappa0 and v0_scale must be positive"));
        }
        if self.vocab == 0 || Modality::ALL.iter().any(|m| self.categories[*m] == 0) {
            return Err(Error::invalid("vocabulary and category counts must be positive"));
        }
        Ok(())
    }

    /// Total number of (modality, category) pairs.
    pub fn n_flat(&self) -> usize {
        Modality::ALL.iter().map(|m| self.categories[*m]).sum()
    }

    pub fn giw_priors(&self, dims: &ByModality<usize>) -> Result<ByModality<GiwHyper>> {
        dims.try_map(|_, d| GiwHyper::isotropic(*d, self.kappa0, self.v0_scale))
    }
}

/// A word sequence with the modality order that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub words: Vec<usize>,
    pub order: [Modality; SLOTS],
}

impl Utterance {
    /// The word in the slot whose modality is `m`.
    pub fn word_for(&self, m: Modality) -> usize {
        let n = self.order.iter().position(|x| *x == m).expect("order is a permutation");
        self.words[n]
    }
}

fn is_permutation(order: &[Modality; SLOTS]) -> bool {
    Modality::ALL.iter().all(|m| order.contains(m))
}

fn random_order(rng: &mut Rng) -> [Modality; SLOTS] {
    let mut order = Modality::ALL;
    for i in (1..SLOTS).rev() {
        order.swap(i, rng.below(i + 1));
    }
    order
}

/// `k` observations of modality `m` chosen by k-means++ seeding.
fn seed_points<'a>(scenes: &'a [Scene], m: Modality, k: usize, rng: &mut Rng) -> Result<Vec<&'a [f64]>> {
    let pool: Vec<&[f64]> = scenes
        .iter()
        .flat_map(|s| (0..s.n_obs(m)).map(move |j| s.obs(m, j)))
        .collect();
    Ok(kmeans_pp(&pool, k, rng)?.into_iter().map(|i| pool[i]).collect())
}

fn dirichlet_log_density(x: &Simplex, conc: f64) -> f64 {
    let n = x.len() as f64;
    ln_gamma(conc * n) - n * ln_gamma(conc)
        + x.as_slice().iter().map(|p| (conc - 1.0) * p.ln()).sum::<f64>()
}

/// Latent variables and parameters of one agent.
#[derive(Debug, Clone)]
pub struct AgentState {
    hyper: ModelHyper,
    dims: ByModality<usize>,
    giw: ByModality<GiwHyper>,
    pi: ByModality<Simplex>,
    phi: ByModality<Vec<GaussParams>>,
    emission: ByModality<Vec<MvNormal>>,
    theta: Vec<Simplex>,
    theta_colsum: Vec<f64>,
    /// `z[m][d][j]`: category of object `j` in scene `d`; action uses `j = 0`.
    z: ByModality<Vec<Vec<usize>>>,
    order: Vec<[Modality; SLOTS]>,
    attended: Vec<usize>,
    n_objects: Vec<usize>,
}

impl AgentState {
    /// Draws every parameter from its prior and every assignment from the
    /// category weights.
    pub fn init(hyper: &ModelHyper, scenes: &[Scene], rng: &mut Rng) -> Result<Self> {
        hyper.validate()?;
        let first = scenes.first().ok_or_else(|| Error::invalid("no scenes"))?;
        let dims = ByModality::from_fn(|m| first.obs(m, 0).len());
        for s in scenes {
            for m in Modality::ALL {
                for j in 0..s.n_obs(m) {
                    if s.obs(m, j).len() != dims[m] {
                        return Err(Error::invalid(format!("scene {}: {m} dimension differs", s.id)));
                    }
                }
            }
        }
        let giw = hyper.giw_priors(&dims)?;
        let pi = hyper
            .categories
            .try_map(|_, k| stick_breaking(hyper.alpha, *k, rng))?;
        let phi = hyper.categories.try_map(|m, k| {
            (0..*k)
                .map(|_| sample_gauss_params(&giw[m], rng))
                .collect::<Result<Vec<_>>>()
        })?;
        let theta = (0..hyper.n_flat())
            .map(|_| sample_dirichlet_posterior(&vec![0.0; hyper.vocab], hyper.gamma, rng))
            .collect::<Result<Vec<_>>>()?;
        let mut phi = phi;
        if hyper.init == InitPolicy::DataSeeded {
            for m in Modality::ALL {
                let cov = &giw[m].v0 / (giw[m].nu0 - dims[m] as f64 - 1.0);
                for (kk, x) in seed_points(scenes, m, hyper.categories[m], rng)?.into_iter().enumerate() {
                    phi[m][kk] = GaussParams::new(DVector::from_column_slice(x), cov.clone())?;
                }
            }
        }
        let mut z = ByModality::<Vec<Vec<usize>>>::default();
        for m in Modality::ALL {
            let emission = phi[m].iter().map(MvNormal::new).collect::<Result<Vec<_>>>()?;
            for s in scenes {
                let zs = (0..s.n_obs(m))
                    .map(|j| match hyper.init {
                        InitPolicy::Prior => sample_categorical(&pi[m], rng),
                        InitPolicy::DataSeeded => {
                            let lw: Vec<f64> = emission
                                .iter()
                                .zip(pi[m].as_slice())
                                .map(|(e, p)| p.ln() + e.logpdf(s.obs(m, j)))
                                .collect();
                            sample_log_weights(&lw, rng)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                z[m].push(zs);
            }
        }
        let order = scenes
            .iter()
            .map(|_| match hyper.order {
                OrderPolicy::Canonical => Modality::ALL,
                OrderPolicy::RandomFixed => random_order(rng),
            })
            .collect();
        let mut agent = AgentState {
            hyper: hyper.clone(),
            dims,
            giw,
            pi,
            emission: ByModality::default(),
            phi,
            theta: Vec::new(),
            theta_colsum: Vec::new(),
            z,
            order,
            attended: scenes.iter().map(|s| s.attended).collect(),
            n_objects: scenes.iter().map(|s| s.n_objects()).collect(),
        };
        agent.refresh_emission()?;
        agent.set_theta(theta)?;
        Ok(agent)
    }

    pub fn hyper(&self) -> &ModelHyper {
        &self.hyper
    }

    pub fn dims(&self) -> &ByModality<usize> {
        &self.dims
    }

    pub fn n_scenes(&self) -> usize {
        self.attended.len()
    }

    pub fn vocab(&self) -> usize {
        self.hyper.vocab
    }

    pub fn n_categories(&self, m: Modality) -> usize {
        self.hyper.categories[m]
    }

    pub fn n_flat(&self) -> usize {
        self.theta.len()
    }

    /// Flat index of category `k` of modality `m` (modalities in canonical order).
    pub fn flat_index(&self, m: Modality, k: usize) -> usize {
        Modality::ALL
            .iter()
            .take_while(|x| **x != m)
            .map(|x| self.hyper.categories[*x])
            .sum::<usize>()
            + k
    }

    /// Inverse of [`AgentState::flat_index`].
    pub fn unflatten(&self, l: usize) -> (Modality, usize) {
        let mut rest = l;
        for m in Modality::ALL {
            if rest < self.hyper.categories[m] {
                return (m, rest);
            }
            rest -= self.hyper.categories[m];
        }
        panic!("flat index {l} out of range");
    }

    pub fn pi(&self, m: Modality) -> &Simplex {
        &self.pi[m]
    }

    pub fn phi(&self, m: Modality, k: usize) -> &GaussParams {
        &self.phi[m][k]
    }

    pub fn emission(&self, m: Modality, k: usize) -> &MvNormal {
        &self.emission[m][k]
    }

    pub fn theta(&self) -> &[Simplex] {
        &self.theta
    }

    pub fn theta_row(&self, m: Modality, k: usize) -> &Simplex {
        &self.theta[self.flat_index(m, k)]
    }

    pub fn order(&self, d: usize) -> [Modality; SLOTS] {
        self.order[d]
    }

    pub fn attended(&self, d: usize) -> usize {
        self.attended[d]
    }

    pub fn assignment(&self, m: Modality, d: usize, j: usize) -> usize {
        self.z[m][d][j]
    }

    /// Assignments of modality `m`, flattened over scenes and objects.
    pub fn assignments(&self, m: Modality) -> Vec<usize> {
        self.z[m].iter().flatten().copied().collect()
    }

    /// Category of the attended object (the scene's action for `Action`).
    pub fn attended_category(&self, m: Modality, d: usize) -> usize {
        let j = if m.is_object_level() { self.attended[d] } else { 0 };
        self.z[m][d][j]
    }

    /// Category counts of modality `m` over all observations.
    pub fn occupancy(&self, m: Modality) -> Vec<usize> {
        let mut counts = vec![0; self.hyper.categories[m]];
        for k in self.z[m].iter().flatten() {
            counts[*k] += 1;
        }
        counts
    }

    pub fn set_theta(&mut self, rows: Vec<Simplex>) -> Result<()> {
        if rows.len() != self.hyper.n_flat() || rows.iter().any(|r| r.len() != self.hyper.vocab) {
            return Err(Error::invalid("theta must have L rows of vocabulary length"));
        }
        let mut colsum = vec![0.0; self.hyper.vocab];
        for r in &rows {
            colsum.iter_mut().zip(r.as_slice()).for_each(|(c, p)| *c += p);
        }
        self.theta = rows;
        self.theta_colsum = colsum;
        Ok(())
    }

    pub fn set_pi(&mut self, m: Modality, pi: Simplex) -> Result<()> {
        if pi.len() != self.hyper.categories[m] {
            return Err(Error::invalid("pi length must equal the category count"));
        }
        self.pi[m] = pi;
        Ok(())
    }

    pub fn set_phi(&mut self, m: Modality, k: usize, g: GaussParams) -> Result<()> {
        if g.dim() != self.dims[m] || k >= self.hyper.categories[m] {
            return Err(Error::invalid("phi dimension or category out of range"));
        }
        self.emission[m][k] = MvNormal::new(&g)?;
        self.phi[m][k] = g;
        Ok(())
    }

    pub fn set_assignment(&mut self, m: Modality, d: usize, j: usize, k: usize) -> Result<()> {
        if k >= self.hyper.categories[m] {
            return Err(Error::invalid("category out of range"));
        }
        self.z[m][d][j] = k;
        Ok(())
    }

    pub fn set_order(&mut self, d: usize, order: [Modality; SLOTS]) -> Result<()> {
        if !is_permutation(&order) {
            return Err(Error::invalid("order must be a permutation of the modalities"));
        }
        self.order[d] = order;
        Ok(())
    }

    fn refresh_emission(&mut self) -> Result<()> {
        self.emission = self
            .phi
            .try_map(|_, gs| gs.iter().map(MvNormal::new).collect::<Result<Vec<_>>>())?;
        Ok(())
    }

    /// Unnormalized production weights of row `l`: `theta_l[w]`, divided by
    /// the column total `sum_l' theta_l'[w]` when the exclusivity rescaling is on.
    fn production_weights(&self, l: usize, mec: bool) -> Vec<f64> {
        let row = self.theta[l].as_slice();
        if mec {
            row.iter()
                .zip(&self.theta_colsum)
                .map(|(p, s)| if *s > 0.0 { p / s } else { 0.0 })
                .collect()
        } else {
            row.to_vec()
        }
    }

    /// Word distribution of flat category `l`.
    pub fn production_row(&self, l: usize, mec: bool) -> Simplex {
        Simplex::from_weights(self.production_weights(l, mec)).expect("theta rows are positive somewhere")
    }

    /// Word distributions of every flat category.
    pub fn production_table(&self, mec: bool) -> Vec<Simplex> {
        (0..self.n_flat()).map(|l| self.production_row(l, mec)).collect()
    }

    /// Distribution of the word in slot `n` of scene `d`.
    pub fn word_production_dist(&self, d: usize, n: usize, mec: bool) -> Simplex {
        let m = self.order[d][n];
        let l = self.flat_index(m, self.attended_category(m, d));
        self.production_row(l, mec)
    }

    pub fn sample_utterance(&self, d: usize, mec: bool, rng: &mut Rng) -> Result<Utterance> {
        let words = (0..SLOTS)
            .map(|n| sample_categorical(&self.word_production_dist(d, n, mec), rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Utterance {
            words,
            order: self.order[d],
        })
    }

    /// One utterance per scene drawn from the agent's own model.
    pub fn initial_words(&self, mec: bool, rng: &mut Rng) -> Result<Vec<Utterance>> {
        (0..self.n_scenes())
            .map(|d| self.sample_utterance(d, mec, rng))
            .collect()
    }

    fn check_inputs(&self, scenes: &[Scene], words: &[Utterance]) -> Result<()> {
        if scenes.len() != self.n_scenes() || words.len() != self.n_scenes() {
            return Err(Error::invalid(format!(
                "agent has {} scenes, got {} scenes and {} utterances",
                self.n_scenes(),
                scenes.len(),
                words.len()
            )));
        }
        for (d, (s, w)) in scenes.iter().zip(words).enumerate() {
            if s.n_objects() != self.n_objects[d] || s.attended != self.attended[d] {
                return Err(Error::invalid(format!("scene {d} does not match the agent's data")));
            }
            if w.words.len() != SLOTS || w.words.iter().any(|x| *x >= self.hyper.vocab) {
                return Err(Error::invalid(format!("utterance {d} is malformed")));
            }
        }
        Ok(())
    }

    /// Learning step: resample category weights, emission parameters and
    /// word distributions from their conditionals given assignments and words.
    pub fn update_globals(&mut self, scenes: &[Scene], words: &[Utterance], rng: &mut Rng) -> Result<()> {
        self.check_inputs(scenes, words)?;
        for m in Modality::ALL {
            let k = self.hyper.categories[m];
            let counts: Vec<f64> = self.occupancy(m).into_iter().map(|c| c as f64).collect();
            self.pi[m] = sample_dirichlet_posterior(&counts, self.hyper.alpha / k as f64, rng)?;
            let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); k];
            for (d, s) in scenes.iter().enumerate() {
                for (j, zk) in self.z[m][d].iter().enumerate() {
                    members[*zk].push(s.obs(m, j));
                }
            }
            for (kk, data) in members.iter().enumerate() {
                let post = giw_posterior(data, &self.giw[m])?;
                let g = sample_gauss_params(&post, rng)?;
                self.emission[m][kk] = MvNormal::new(&g)?;
                self.phi[m][kk] = g;
            }
        }
        let mut word_counts = vec![vec![0.0; self.hyper.vocab]; self.n_flat()];
        for (d, u) in words.iter().enumerate() {
            for (n, w) in u.words.iter().enumerate() {
                let m = self.order[d][n];
                let l = self.flat_index(m, self.attended_category(m, d));
                word_counts[l][*w] += 1.0;
            }
        }
        let theta = word_counts
            .iter()
            .map(|c| sample_dirichlet_posterior(c, self.hyper.gamma, rng))
            .collect::<Result<Vec<_>>>()?;
        self.set_theta(theta)
    }

    fn slot_of(&self, d: usize, m: Modality) -> usize {
        self.order[d].iter().position(|x| *x == m).expect("order is a permutation")
    }

    fn conditional_log_weights(
        &self,
        scene: &Scene,
        word: Option<usize>,
        m: Modality,
        j: usize,
        table: &[Simplex],
    ) -> Vec<f64> {
        let x = scene.obs(m, j);
        (0..self.hyper.categories[m])
            .map(|k| {
                let mut lw = self.pi[m][k].ln() + self.emission[m][k].logpdf(x);
                if let Some(w) = word {
                    lw += table[self.flat_index(m, k)][w].ln();
                }
                lw
            })
            .collect()
    }

    /// The word that informs `z[m][d][j]`, if any: only the attended object
    /// (and the scene-level action) is named in the utterance.
    fn informing_word(&self, words: &[Utterance], m: Modality, d: usize, j: usize) -> Option<usize> {
        let named = !m.is_object_level() || j == self.attended[d];
        named.then(|| words[d].words[self.slot_of(d, m)])
    }

    /// Full conditional of one assignment, normalized over the categories.
    pub fn assignment_conditional(
        &self,
        scenes: &[Scene],
        words: &[Utterance],
        mec: bool,
        m: Modality,
        d: usize,
        j: usize,
    ) -> Result<Simplex> {
        self.check_inputs(scenes, words)?;
        let table = self.production_table(mec);
        let word = self.informing_word(words, m, d, j);
        Simplex::from_log_weights(&self.conditional_log_weights(&scenes[d], word, m, j, &table))
    }

    /// Perception step: resample every assignment from its full conditional.
    pub fn resample_assignments(
        &mut self,
        scenes: &[Scene],
        words: &[Utterance],
        mec: bool,
        rng: &mut Rng,
    ) -> Result<()> {
        self.check_inputs(scenes, words)?;
        let table = self.production_table(mec);
        for (d, scene) in scenes.iter().enumerate() {
            for m in Modality::ALL {
                for j in 0..scene.n_obs(m) {
                    let word = self.informing_word(words, m, d, j);
                    let lw = self.conditional_log_weights(scene, word, m, j, &table);
                    self.z[m][d][j] = sample_log_weights(&lw, rng)?;
                }
            }
        }
        Ok(())
    }

    /// Log joint density of the current state with the given data and words,
    /// with words scored under the raw word distributions.
    pub fn log_joint(&self, scenes: &[Scene], words: &[Utterance]) -> Result<f64> {
        self.check_inputs(scenes, words)?;
        let mut total = 0.0;
        for m in Modality::ALL {
            let k = self.hyper.categories[m];
            total += dirichlet_log_density(&self.pi[m], self.hyper.alpha / k as f64);
            for g in &self.phi[m] {
                total += giw_log_density(g, &self.giw[m])?;
            }
            for (d, s) in scenes.iter().enumerate() {
                for (j, zk) in self.z[m][d].iter().enumerate() {
                    total += self.pi[m][*zk].ln() + self.emission[m][*zk].logpdf(s.obs(m, j));
                }
            }
        }
        for row in &self.theta {
            total += dirichlet_log_density(row, self.hyper.gamma);
        }
        for (d, u) in words.iter().enumerate() {
            for (n, w) in u.words.iter().enumerate() {
                let m = self.order[d][n];
                total += self.theta[self.flat_index(m, self.attended_category(m, d))][*w].ln();
            }
        }
        if total.is_finite() {
            Ok(total)
        } else {
            Err(Error::numerical(format!("log joint is {total}")))
        }
    }

    pub fn snapshot(&self) -> AgentSnapshot {
        AgentSnapshot {
            hyper: self.hyper.clone(),
            dims: self.dims,
            pi: self.pi.clone(),
            phi: self.phi.map(|_, gs| gs.iter().map(GaussSnapshot::from).collect()),
            theta: self.theta.clone(),
            z: self.z.clone(),
            order: self.order.clone(),
            attended: self.attended.clone(),
        }
    }

    pub fn from_snapshot(s: &AgentSnapshot) -> Result<Self> {
        s.hyper.validate()?;
        let l = s.hyper.n_flat();
        let ok_shapes = Modality::ALL.iter().all(|m| {
            s.pi[*m].len() == s.hyper.categories[*m] && s.phi[*m].len() == s.hyper.categories[*m]
        }) && s.theta.len() == l
            && s.order.len() == s.attended.len()
            && Modality::ALL.iter().all(|m| s.z[*m].len() == s.attended.len());
        if !ok_shapes || !s.order.iter().all(is_permutation) {
            return Err(Error::invalid("agent snapshot has inconsistent shapes"));
        }
        let phi = s
            .phi
            .try_map(|_, gs| gs.iter().map(GaussSnapshot::to_params).collect::<Result<Vec<_>>>())?;
        let mut agent = AgentState {
            hyper: s.hyper.clone(),
            dims: s.dims,
            giw: s.hyper.giw_priors(&s.dims)?,
            pi: s.pi.clone(),
            phi,
            emission: ByModality::default(),
            theta: Vec::new(),
            theta_colsum: Vec::new(),
            z: s.z.clone(),
            order: s.order.clone(),
            attended: s.attended.clone(),
            n_objects: s.z.position.iter().map(|v| v.len()).collect(),
        };
        agent.refresh_emission()?;
        agent.set_theta(s.theta.clone())?;
        Ok(agent)
    }
}

/// Serializable Gaussian parameters (covariance as rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussSnapshot {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl From<&GaussParams> for GaussSnapshot {
    fn from(g: &GaussParams) -> Self {
        GaussSnapshot {
            mean: g.mean.iter().copied().collect(),
            cov: g.cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }
}

impl GaussSnapshot {
    pub fn to_params(&self) -> Result<GaussParams> {
        let d = self.mean.len();
        if self.cov.len() != d || self.cov.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("covariance rows do not match the mean"));
        }
        let flat: Vec<f64> = self.cov.iter().flatten().copied().collect();
        GaussParams::new(DVector::from_vec(self.mean.clone()), DMatrix::from_row_slice(d, d, &flat))
    }
}

/// Complete serializable state of a trained agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub hyper: ModelHyper,
    pub dims: ByModality<usize>,
    pub pi: ByModality<Simplex>,
    pub phi: ByModality<Vec<GaussSnapshot>>,
    pub theta: Vec<Simplex>,
    pub z: ByModality<Vec<Vec<usize>>>,
    pub order: Vec<[Modality; SLOTS]>,
    pub attended: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_scenes, generate_world, WorldSpec};

    fn scenes(seed: u64, n: usize) -> Vec<Scene> {
        let mut rng = Rng::new(seed);
        let world = generate_world(&WorldSpec::default(), &mut rng).unwrap();
        generate_scenes(&world, n, (1, 3), &mut rng).unwrap().scenes_a
    }

    fn agent(seed: u64) -> (AgentState, Vec<Scene>) {
        let s = scenes(seed, 8);
        let a = AgentState::init(&ModelHyper::default(), &s, &mut Rng::new(seed + 100)).unwrap();
        (a, s)
    }

    fn rows(v: &[&[f64]]) -> Vec<Simplex> {
        v.iter().map(|r| Simplex::new(r.to_vec()).unwrap()).collect()
    }

    fn small_hyper(k: usize, vocab: usize) -> ModelHyper {
        ModelHyper {
            categories: ByModality::new(k, k, k, k),
            vocab,
            ..ModelHyper::default()
        }
    }

    #[test]
    fn default_sizes() {
        let (a, _) = agent(1);
        assert_eq!(a.n_flat(), 40);
        assert!(a.theta().iter().all(|r| r.len() == 13));
        assert_eq!(a.flat_index(Modality::Color, 3), 33);
        assert_eq!(a.unflatten(33), (Modality::Color, 3));
    }

    #[test]
    fn init_is_deterministic() {
        let (a, _) = agent(2);
        let (b, _) = agent(2);
        assert_eq!(a.snapshot(), b.snapshot());
    }

    #[test]
    fn uniform_theta_gives_uniform_words() {
        let (mut a, _) = agent(3);
        a.set_theta(vec![Simplex::uniform(13).unwrap(); 40]).unwrap();
        for mec in [false, true] {
            let p = a.word_production_dist(0, 1, mec);
            assert!(p.as_slice().iter().all(|x| (x - 1.0 / 13.0).abs() < 1e-12));
        }
    }

    #[test]
    fn without_rescaling_the_row_is_returned() {
        let (a, _) = agent(4);
        for n in 0..SLOTS {
            let m = a.order(0)[n];
            let row = a.theta_row(m, a.attended_category(m, 0));
            let p = a.word_production_dist(0, n, false);
            assert!(p.tv_distance(row) < 1e-12);
        }
    }

    #[test]
    fn rescaling_hand_values() {
        // two-row case: theta_0 = [0.9, 0.1], theta_1 = [0.5, 0.5]
        let w0: f64 = 0.9 / 1.4;
        let w1: f64 = 0.1 / 0.6;
        assert!((w0 / (w0 + w1) - 0.794).abs() < 5e-4);

        let s = scenes(5, 2);
        let mut a = AgentState::init(&small_hyper(1, 2), &s, &mut Rng::new(5)).unwrap();
        a.set_theta(rows(&[&[0.9, 0.1], &[0.5, 0.5], &[0.5, 0.5], &[0.5, 0.5]]))
            .unwrap();
        let w0 = 0.9 / 2.4;
        let w1 = 0.1 / 1.6;
        let p = a.production_row(0, true);
        assert!((p[0] - w0 / (w0 + w1)).abs() < 1e-12);
        assert!((p[1] - w1 / (w0 + w1)).abs() < 1e-12);
    }

    #[test]
    fn rescaling_suppresses_common_words() {
        let s = scenes(7, 2);
        let hyper = small_hyper(1, 3);
        let mut a = AgentState::init(&hyper, &s, &mut Rng::new(7)).unwrap();
        // word 0 and word 1 tie on row 0, but word 0 is common elsewhere
        a.set_theta(rows(&[
            &[0.4, 0.4, 0.2],
            &[0.8, 0.1, 0.1],
            &[0.7, 0.2, 0.1],
            &[0.6, 0.2, 0.2],
        ]))
        .unwrap();
        let p = a.production_row(0, true);
        assert!(p[0] < p[1]);
        let raw = a.production_row(0, false);
        assert_eq!(raw[0], raw[1]);
    }

    #[test]
    fn one_hot_theta_gives_fixed_utterance() {
        let s = scenes(8, 3);
        let hyper = small_hyper(2, 13);
        let mut a = AgentState::init(&hyper, &s, &mut Rng::new(8)).unwrap();
        let theta = (0..8).map(|l| Simplex::point_mass(13, l).unwrap()).collect();
        a.set_theta(theta).unwrap();
        let mut rng = Rng::new(9);
        for d in 0..3 {
            let expected: Vec<usize> = Modality::ALL
                .iter()
                .map(|m| a.flat_index(*m, a.attended_category(*m, d)))
                .collect();
            for mec in [false, true] {
                let u = a.sample_utterance(d, mec, &mut rng).unwrap();
                assert_eq!(u.words, expected);
                assert_eq!(u.order, Modality::ALL);
            }
        }
    }

    #[test]
    fn utterance_slot_frequencies() {
        let (a, _) = agent(10);
        let mut rng = Rng::new(11);
        let n = 100_000;
        let mut counts = vec![[0usize; 13]; SLOTS];
        for _ in 0..n {
            let u = a.sample_utterance(0, true, &mut rng).unwrap();
            for (slot, w) in u.words.iter().enumerate() {
                counts[slot][*w] += 1;
            }
        }
        for (slot, c) in counts.iter().enumerate() {
            let emp = Simplex::from_weights(c.iter().map(|x| *x as f64).collect()).unwrap();
            assert!(emp.tv_distance(&a.word_production_dist(0, slot, true)) < 0.01);
        }
    }

    #[test]
    fn word_counts_follow_the_order() {
        let s = scenes(12, 1);
        let hyper = ModelHyper {
            gamma: 1e-3,
            ..small_hyper(1, 13)
        };
        let mut a = AgentState::init(&hyper, &s, &mut Rng::new(12)).unwrap();
        let words = vec![Utterance {
            words: vec![0, 1, 2, 3],
            order: Modality::ALL,
        }];
        let mut order = Modality::ALL;
        order.swap(0, 3);
        a.set_order(0, order).unwrap();
        let words_perm = vec![Utterance { words: vec![0, 1, 2, 3], order }];
        a.update_globals(&s, &words_perm, &mut Rng::new(13)).unwrap();
        // slot 0 now names color, so color's row should favour word 0
        assert_eq!(a.theta_row(Modality::Color, 0).argmax(), 0);
        assert_eq!(a.theta_row(Modality::Action, 0).argmax(), 3);
        a.set_order(0, Modality::ALL).unwrap();
        a.update_globals(&s, &words, &mut Rng::new(13)).unwrap();
        assert_eq!(a.theta_row(Modality::Action, 0).argmax(), 0);
        assert_eq!(a.theta_row(Modality::Color, 0).argmax(), 3);
    }

    #[test]
    fn dominant_category_weight_mean() {
        // all data in one category: E[pi_0] = (alpha/K + D) / (alpha + D)
        let s = scenes(14, 20);
        let hyper = ModelHyper::default();
        let mut a = AgentState::init(&hyper, &s, &mut Rng::new(14)).unwrap();
        for d in 0..20 {
            a.set_assignment(Modality::Action, d, 0, 0).unwrap();
        }
        let words: Vec<Utterance> = a.initial_words(true, &mut Rng::new(15)).unwrap();
        let mut rng = Rng::new(16);
        let reps = 4000;
        let mut acc = 0.0;
        for _ in 0..reps {
            a.update_globals(&s, &words, &mut rng).unwrap();
            acc += a.pi(Modality::Action)[0];
        }
        let expected = (0.1 + 20.0) / (1.0 + 20.0);
        assert!((acc / reps as f64 - expected).abs() < 0.005);
    }

    #[test]
    fn empty_category_falls_back_to_prior() {
        let (mut a, s) = agent(17);
        for d in 0..s.len() {
            a.set_assignment(Modality::Color, d, 0, 0).unwrap();
            for j in 0..s[d].n_objects() {
                a.set_assignment(Modality::Color, d, j, 0).unwrap();
            }
        }
        let words = a.initial_words(true, &mut Rng::new(18)).unwrap();
        a.update_globals(&s, &words, &mut Rng::new(19)).unwrap();
        // prior mean spread is sqrt(v0 / kappa0) ~ 3 per coordinate
        let far = a.phi(Modality::Color, 5).mean.norm();
        let near = a.phi(Modality::Color, 0).mean.norm();
        assert!(far > 1.0 && near < 1.0, "far {far} near {near}");
        assert_eq!(a.occupancy(Modality::Color)[5], 0);
    }

    fn brute_force_conditional(
        a: &AgentState,
        scene: &Scene,
        word: Option<usize>,
        m: Modality,
        j: usize,
        mec: bool,
    ) -> Vec<f64> {
        let k = a.n_categories(m);
        let mut w = Vec::with_capacity(k);
        for kk in 0..k {
            let pdf = crate::prob::gauss::gaussian_logpdf(scene.obs(m, j), a.phi(m, kk)).unwrap().exp();
            let mut f = a.pi(m)[kk] * pdf;
            if let Some(word) = word {
                let row = a.theta_row(m, kk).as_slice();
                let weight = |v: usize| {
                    if mec {
                        let col: f64 = a.theta().iter().map(|r| r[v]).sum();
                        row[v] / col
                    } else {
                        row[v]
                    }
                };
                let norm: f64 = (0..a.vocab()).map(weight).sum();
                f *= weight(word) / norm;
            }
            w.push(f);
        }
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    }

    fn fitted_toy(k: usize, seed: u64) -> (AgentState, Vec<Scene>, Vec<Utterance>) {
        let s = scenes(seed, 6);
        let hyper = small_hyper(k, 5);
        let mut a = AgentState::init(&hyper, &s, &mut Rng::new(seed)).unwrap();
        let words = a.initial_words(true, &mut Rng::new(seed + 1)).unwrap();
        // put emission means on the data so conditionals are not degenerate
        for m in Modality::ALL {
            for kk in 0..k {
                let x = s[kk % s.len()].obs(m, 0);
                let d = x.len();
                let g = GaussParams::new(DVector::from_column_slice(x), DMatrix::identity(d, d) * 0.05).unwrap();
                a.set_phi(m, kk, g).unwrap();
            }
        }
        (a, s, words)
    }

    #[test]
    fn conditional_matches_enumeration() {
        for k in [2, 3] {
            let (a, s, words) = fitted_toy(k, 20 + k as u64);
            for mec in [false, true] {
                for d in 0..s.len() {
                    for m in Modality::ALL {
                        for j in 0..s[d].n_obs(m) {
                            let got = a.assignment_conditional(&s, &words, mec, m, d, j).unwrap();
                            let named = !m.is_object_level() || j == s[d].attended;
                            let word = named.then(|| words[d].word_for(m));
                            let want = brute_force_conditional(&a, &s[d], word, m, j, mec);
                            for (g, w) in got.as_slice().iter().zip(&want) {
                                assert!((g - w).abs() < 1e-9, "{g} vs {w}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sampled_assignments_match_enumeration() {
        let (mut a, s, words) = fitted_toy(2, 30);
        let d = 0;
        let m = Modality::Color;
        let j = s[d].attended;
        let target = a.assignment_conditional(&s, &words, true, m, d, j).unwrap();
        let mut rng = Rng::new(31);
        let n = 100_000;
        let mut counts = [0usize; 2];
        for _ in 0..n {
            a.resample_assignments(&s, &words, true, &mut rng).unwrap();
            counts[a.assignment(m, d, j)] += 1;
        }
        let emp = Simplex::from_weights(counts.iter().map(|c| *c as f64).collect()).unwrap();
        assert!(emp.tv_distance(&target) < 0.01, "{emp:?} vs {target:?}");
    }

    #[test]
    fn dominant_likelihood_wins() {
        let (mut a, s, words) = fitted_toy(3, 40);
        for m in Modality::ALL {
            a.set_pi(m, Simplex::uniform(3).unwrap()).unwrap();
        }
        a.set_theta(vec![Simplex::uniform(5).unwrap(); 12]).unwrap();
        let m = Modality::Object;
        let x = s[0].obs(m, 0);
        let d = x.len();
        let tight = GaussParams::new(DVector::from_column_slice(x), DMatrix::identity(d, d) * 1e-3).unwrap();
        a.set_phi(m, 1, tight).unwrap();
        let p = a.assignment_conditional(&s, &words, true, m, 0, 0).unwrap();
        assert!(p[1] >= 0.99, "{p:?}");
    }

    #[test]
    fn unnamed_objects_ignore_words() {
        let (a, s, words) = fitted_toy(3, 50);
        let d = (0..s.len()).find(|d| s[*d].n_objects() > 1).expect("a scene with two objects");
        let j = (s[d].attended + 1) % s[d].n_objects();
        let mut shuffled = words.clone();
        shuffled[d].words.rotate_left(1);
        shuffled[d].words[0] = (shuffled[d].words[0] + 1) % 5;
        for m in [Modality::Position, Modality::Object, Modality::Color] {
            let p1 = a.assignment_conditional(&s, &words, true, m, d, j).unwrap();
            let p2 = a.assignment_conditional(&s, &shuffled, true, m, d, j).unwrap();
            assert_eq!(p1, p2);
        }
    }

    #[test]
    fn impossible_word_is_a_numerical_error() {
        let s = scenes(60, 2);
        let hyper = small_hyper(1, 4);
        let mut a = AgentState::init(&hyper, &s, &mut Rng::new(60)).unwrap();
        let theta = (0..4).map(|l| Simplex::point_mass(4, l).unwrap()).collect();
        a.set_theta(theta).unwrap();
        let good = vec![Utterance { words: vec![0, 1, 2, 3], order: Modality::ALL }; 2];
        assert!(a.log_joint(&s, &good).is_err(), "point-mass theta has zero entries");
        let bad = vec![Utterance { words: vec![1, 1, 2, 3], order: Modality::ALL }; 2];
        assert!(matches!(a.log_joint(&s, &bad), Err(Error::Numerical(_))));
    }

    #[test]
    fn log_joint_is_repeatable() {
        let (a, s) = agent(61);
        let words = a.initial_words(true, &mut Rng::new(62)).unwrap();
        let x = a.log_joint(&s, &words).unwrap();
        assert_eq!(x, a.log_joint(&s, &words).unwrap());
    }

    #[test]
    fn updates_preserve_invariants_and_snapshots_round_trip() {
        let (mut a, s) = agent(63);
        let mut rng = Rng::new(64);
        let words = a.initial_words(true, &mut rng).unwrap();
        for _ in 0..3 {
            a.update_globals(&s, &words, &mut rng).unwrap();
            a.resample_assignments(&s, &words, true, &mut rng).unwrap();
        }
        for m in Modality::ALL {
            assert!((a.pi(m).as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(a.assignments(m).iter().all(|k| *k < a.n_categories(m)));
        }
        let snap = a.snapshot();
        let json = serde_json::to_string(&snap).unwrap();
        let back: AgentSnapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(back, snap);
        let b = AgentState::from_snapshot(&back).unwrap();
        assert_eq!(b.snapshot(), snap);
        assert_eq!(b.log_joint(&s, &words).unwrap(), a.log_joint(&s, &words).unwrap());
    }

    #[test]
    fn random_order_policy_is_permutation_and_fixed() {
        let s = scenes(65, 10);
        let hyper = ModelHyper {
            order: OrderPolicy::RandomFixed,
            ..ModelHyper::default()
        };
        let mut a = AgentState::init(&hyper, &s, &mut Rng::new(65)).unwrap();
        let before: Vec<_> = (0..10).map(|d| a.order(d)).collect();
        assert!(before.iter().all(is_permutation));
        let words = a.initial_words(true, &mut Rng::new(66)).unwrap();
        a.update_globals(&s, &words, &mut Rng::new(67)).unwrap();
        a.resample_assignments(&s, &words, true, &mut Rng::new(68)).unwrap();
        assert_eq!(before, (0..10).map(|d| a.order(d)).collect::<Vec<_>>());
    }
}
