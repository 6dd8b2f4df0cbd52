//! The two-agent naming game: speakers propose words, listeners accept or
//! reject them with a Metropolis-Hastings rule, then learn and perceive.

use serde::{Deserialize, Serialize};

use crate::agent::{AgentState, ModelHyper, Utterance, SLOTS};
use crate::data::Scene;
use crate::error::{Error, Result};
use crate::prob::categorical::sample_categorical;
use crate::prob::rng::Rng;

/// Model variants compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Proposed,
    NoMec,
    NoComm,
    H2hG,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Proposed, Variant::NoMec, Variant::NoComm, Variant::H2hG];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Proposed => "proposed",
            Variant::NoMec => "no-mec",
            Variant::NoComm => "no-comm",
            Variant::H2hG => "h2h-g",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == s)
    }

    /// Whether word production uses the exclusivity rescaling.
    pub fn mec(self) -> bool {
        matches!(self, Variant::Proposed | Variant::NoComm)
    }

    /// Whether listeners may accept proposals.
    pub fn communication(self) -> bool {
        !matches!(self, Variant::NoComm)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub iterations: usize,
    pub mec: bool,
    pub communication: bool,
    pub seed: u64,
    pub variant: Variant,
}

impl GameConfig {
    pub fn for_variant(variant: Variant, iterations: usize, seed: u64) -> Self {
        GameConfig {
            iterations,
            mec: variant.mec(),
            communication: variant.communication(),
            seed,
            variant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if self.variant == Variant::H2hG {
            return Err(Error::invalid("h2h-g is not a naming-game variant"));
        }
        if self.mec != self.variant.mec() || self.communication != self.variant.communication() {
            return Err(Error::invalid(format!("flags do not match variant {}", self.variant)));
        }
        Ok(())
    }
}

/// `min(1, p_proposed / p_current)`; a current word the listener cannot
/// produce is always replaced.
pub fn acceptance_ratio(p_proposed: f64, p_current: f64) -> f64 {
    if p_current <= 0.0 {
        1.0
    } else {
        (p_proposed / p_current).min(1.0)
    }
}

/// Metropolis-Hastings acceptance of a proposed word. Always draws one uniform.
pub fn mh_accept(p_proposed: f64, p_current: f64, proposed: usize, current: usize, rng: &mut Rng) -> usize {
    let r = acceptance_ratio(p_proposed, p_current);
    if rng.uniform() < r {
        proposed
    } else {
        current
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfTurnStats {
    pub proposals: usize,
    pub accepted: usize,
}

impl HalfTurnStats {
    pub fn rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// Proposal phase only: the speaker names every scene and the listener
/// updates its stored words. Neither agent's parameters change.
pub fn communicate(
    speaker: &AgentState,
    listener: &AgentState,
    listener_words: &mut [Utterance],
    mec: bool,
    communication: bool,
    rng: &mut Rng,
) -> Result<HalfTurnStats> {
    if speaker.n_scenes() != listener.n_scenes() || listener_words.len() != listener.n_scenes() {
        return Err(Error::invalid("speaker, listener and words disagree on the number of scenes"));
    }
    let mut stats = HalfTurnStats::default();
    for (d, current) in listener_words.iter_mut().enumerate() {
        for n in 0..SLOTS {
            let proposed = sample_categorical(&speaker.word_production_dist(d, n, mec), rng)?;
            stats.proposals += 1;
            if !communication {
                continue;
            }
            let dist = listener.word_production_dist(d, n, mec);
            let cur = current.words[n];
            let chosen = mh_accept(dist[proposed], dist[cur], proposed, cur, rng);
            if chosen != cur || proposed == cur {
                stats.accepted += 1;
            }
            current.words[n] = chosen;
        }
    }
    Ok(stats)
}

/// One speaker-to-listener half-turn: proposals for all scenes, then the
/// listener's learning step, then its perception step.
pub fn play_half_turn(
    speaker: &AgentState,
    listener: &mut AgentState,
    listener_scenes: &[Scene],
    listener_words: &mut [Utterance],
    cfg: &GameConfig,
    rng: &mut Rng,
) -> Result<HalfTurnStats> {
    let stats = communicate(speaker, listener, listener_words, cfg.mec, cfg.communication, rng)?;
    listener.update_globals(listener_scenes, listener_words, rng)?;
    listener.resample_assignments(listener_scenes, listener_words, cfg.mec, rng)?;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub a_to_b: HalfTurnStats,
    pub b_to_a: HalfTurnStats,
    pub log_joint_a: f64,
    pub log_joint_b: f64,
    pub words_a: Vec<Vec<usize>>,
    pub words_b: Vec<Vec<usize>>,
}

/// Final agent states, their stored words, and the per-iteration trace.
#[derive(Debug, Clone)]
pub struct GameOutcome {
    pub agent_a: AgentState,
    pub agent_b: AgentState,
    pub words_a: Vec<Utterance>,
    pub words_b: Vec<Utterance>,
    pub trace: Vec<IterationRecord>,
}

impl GameOutcome {
    /// Trace as JSON Lines, one record per iteration.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.trace {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

fn word_rows(words: &[Utterance]) -> Vec<Vec<usize>> {
    words.iter().map(|u| u.words.clone()).collect()
}

/// Initializes both agents on their own views and plays `cfg.iterations`
/// rounds of (A speaks to B, B speaks to A).
pub fn run_game(hyper: &ModelHyper, scenes_a: &[Scene], scenes_b: &[Scene], cfg: &GameConfig) -> Result<GameOutcome> {
    cfg.validate()?;
    if scenes_a.len() != scenes_b.len() {
        return Err(Error::invalid("the two views must contain the same scenes"));
    }
    let root = Rng::new(cfg.seed);
    let mut agent_a = AgentState::init(hyper, scenes_a, &mut root.fork(1))?;
    let mut agent_b = AgentState::init(hyper, scenes_b, &mut root.fork(2))?;
    let mut rng = root.fork(3);
    let mut words_a = agent_a.initial_words(cfg.mec, &mut rng)?;
    let mut words_b = agent_b.initial_words(cfg.mec, &mut rng)?;
    let mut trace = Vec::with_capacity(cfg.iterations);
    for t in 0..cfg.iterations {
        let a_to_b = play_half_turn(&agent_a, &mut agent_b, scenes_b, &mut words_b, cfg, &mut rng)?;
        let b_to_a = play_half_turn(&agent_b, &mut agent_a, scenes_a, &mut words_a, cfg, &mut rng)?;
        trace.push(IterationRecord {
            t,
            a_to_b,
            b_to_a,
            log_joint_a: agent_a.log_joint(scenes_a, &words_a)?,
            log_joint_b: agent_b.log_joint(scenes_b, &words_b)?,
            words_a: word_rows(&words_a),
            words_b: word_rows(&words_b),
        });
    }
    Ok(GameOutcome {
        agent_a,
        agent_b,
        words_a,
        words_b,
        trace,
    })
}
