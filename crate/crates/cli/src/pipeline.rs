//! The four stages and their on-disk layout:
//!
//! ```text
//! <out>/data/seed-NNN.jsonl
//! <out>/train/<variant>/seed-NNN/{state.json, trace.jsonl}
//! <out>/eval/<variant>.json
//! <out>/report/...
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use emergelex_core::agent::{AgentSnapshot, AgentState, Utterance};
use emergelex_core::data::{generate_scenes_with, generate_world, load_scenes, save_scenes, SceneSet, View};
use emergelex_core::game::{run_game, GameConfig, IterationRecord, Variant};
use emergelex_core::h2h::{h2h_run_game, H2hAgent, H2hSnapshot};
use emergelex_core::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::eval::{evaluate, SeedMetrics, Trained};
use crate::{io_err, CliError};

pub fn data_path(out: &Path, seed: u64) -> PathBuf {
    out.join("data").join(format!("seed-{seed:03}.jsonl"))
}

pub fn run_dir(out: &Path, variant: Variant, seed: u64) -> PathBuf {
    out.join("train").join(variant.name()).join(format!("seed-{seed:03}"))
}

pub fn eval_path(out: &Path, variant: Variant) -> PathBuf {
    out.join("eval").join(format!("{}.json", variant.name()))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Runs `f` for every item on a pool capped by `EMERGELEX_THREADS`,
/// returning results in input order.
pub fn par_map<T: Sync, R: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<R, CliError> + Sync + Send,
) -> Result<Vec<R>, CliError> {
    let threads = std::env::var("EMERGELEX_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataSummary {
    pub seed: u64,
    pub scenes: usize,
    pub train: usize,
    pub test: usize,
    pub objects: usize,
}

pub fn generate_set(cfg: &ExperimentConfig, seed: u64) -> Result<SceneSet, CliError> {
    let mut rng = Rng::new(seed).fork(11);
    let world = generate_world(&cfg.world, &mut rng)?;
    Ok(generate_scenes_with(&world, &cfg.scenes.options(), &mut rng)?)
}

pub fn cmd_gen_data(cfg: &ExperimentConfig) -> Result<Vec<DataSummary>, CliError> {
    par_map(&cfg.seeds, |&seed| {
        let set = generate_set(cfg, seed)?;
        let path = data_path(&cfg.out, seed);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        save_scenes(&set, &path)?;
        Ok(DataSummary {
            seed,
            scenes: set.len(),
            train: set.train.len(),
            test: set.test.len(),
            objects: set.scenes_a.iter().map(|s| s.n_objects()).sum(),
        })
    })
}

pub fn load_set(out: &Path, seed: u64) -> Result<SceneSet, CliError> {
    let path = data_path(out, seed);
    if !path.exists() {
        return Err(CliError::Input(format!("missing scene file {} (run gen-data)", path.display())));
    }
    let set = load_scenes(&path)?;
    set.validate()?;
    Ok(set)
}

/// Final state of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateFile {
    Csl {
        variant: Variant,
        seed: u64,
        agent_a: AgentSnapshot,
        agent_b: AgentSnapshot,
        words_a: Vec<Utterance>,
        words_b: Vec<Utterance>,
    },
    H2h {
        seed: u64,
        agent_a: H2hSnapshot,
        agent_b: H2hSnapshot,
        words_a: Vec<usize>,
        words_b: Vec<usize>,
    },
}

impl StateFile {
    pub fn trained(&self) -> Result<Trained, CliError> {
        Ok(match self {
            StateFile::Csl {
                variant,
                agent_a,
                agent_b,
                ..
            } => Trained::Csl {
                variant: *variant,
                a: AgentState::from_snapshot(agent_a)?,
                b: AgentState::from_snapshot(agent_b)?,
            },
            StateFile::H2h { agent_a, agent_b, .. } => Trained::H2h {
                a: H2hAgent::from_snapshot(agent_a)?,
                b: H2hAgent::from_snapshot(agent_b)?,
            },
        })
    }
}

/// Trains one variant on one seed's training split.
pub fn train_one(cfg: &ExperimentConfig, set: &SceneSet, variant: Variant, seed: u64) -> Result<(StateFile, Vec<IterationRecord>), CliError> {
    let (sa, sb) = (set.train_view(View::A), set.train_view(View::B));
    Ok(match variant {
        Variant::H2hG => {
            let g = h2h_run_game(&cfg.h2h, &sa, &sb, cfg.iterations, seed)?;
            let state = StateFile::H2h {
                seed,
                agent_a: g.agent_a.snapshot(),
                agent_b: g.agent_b.snapshot(),
                words_a: g.words_a,
                words_b: g.words_b,
            };
            (state, g.trace)
        }
        v => {
            let g = run_game(&cfg.model, &sa, &sb, &GameConfig::for_variant(v, cfg.iterations, seed))?;
            let state = StateFile::Csl {
                variant: v,
                seed,
                agent_a: g.agent_a.snapshot(),
                agent_b: g.agent_b.snapshot(),
                words_a: g.words_a,
                words_b: g.words_b,
            };
            (state, g.trace)
        }
    })
}

fn trace_jsonl(trace: &[IterationRecord]) -> String {
    trace
        .iter()
        .map(|r| serde_json::to_string(r).expect("trace records serialize") + "\n")
        .collect()
}

fn jobs(cfg: &ExperimentConfig) -> Result<Vec<(Variant, u64)>, CliError> {
    let variants = cfg.parsed_variants()?;
    Ok(variants
        .iter()
        .flat_map(|v| cfg.seeds.iter().map(move |s| (*v, *s)))
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub variant: Variant,
    pub seed: u64,
    pub final_acceptance: f64,
    pub final_log_joint: [f64; 2],
}

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<TrainSummary>, CliError> {
    par_map(&jobs(cfg)?, |&(variant, seed)| {
        let set = load_set(&cfg.out, seed)?;
        let (state, trace) = train_one(cfg, &set, variant, seed)?;
        let dir = run_dir(&cfg.out, variant, seed);
        write_file(&dir.join("state.json"), &serde_json::to_string(&state).expect("state serializes"))?;
        write_file(&dir.join("trace.jsonl"), &trace_jsonl(&trace))?;
        let last = trace.last().expect("at least one iteration");
        let props = last.a_to_b.proposals + last.b_to_a.proposals;
        Ok(TrainSummary {
            variant,
            seed,
            final_acceptance: (last.a_to_b.accepted + last.b_to_a.accepted) as f64 / props.max(1) as f64,
            final_log_joint: [last.log_joint_a, last.log_joint_b],
        })
    })
}

pub fn load_state(out: &Path, variant: Variant, seed: u64) -> Result<StateFile, CliError> {
    let path = run_dir(out, variant, seed).join("state.json");
    if !path.exists() {
        return Err(CliError::Input(format!("missing trained state {} (run train)", path.display())));
    }
    serde_json::from_str(&read_file(&path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn load_trace(out: &Path, variant: Variant, seed: u64) -> Result<Vec<IterationRecord>, CliError> {
    let path = run_dir(out, variant, seed).join("trace.jsonl");
    read_file(&path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub sd: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, sd, n }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: Variant,
    pub seeds: Vec<SeedMetrics>,
    pub summary: BTreeMap<String, Stat>,
}

impl VariantReport {
    pub fn new(variant: Variant, seeds: Vec<SeedMetrics>) -> Self {
        let mut cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for s in &seeds {
            for (k, v) in s.scalars() {
                cols.entry(k).or_default().push(v);
            }
        }
        let summary = cols.into_iter().map(|(k, v)| (k, Stat::of(&v))).collect();
        VariantReport {
            variant,
            seeds,
            summary,
        }
    }

    pub fn mean(&self, key: &str) -> Option<f64> {
        self.summary.get(key).map(|s| s.mean)
    }
}

pub fn evaluate_one(cfg: &ExperimentConfig, variant: Variant, seed: u64) -> Result<SeedMetrics, CliError> {
    let set = load_set(&cfg.out, seed)?;
    let trained = load_state(&cfg.out, variant, seed)?.trained()?;
    Ok(evaluate(&trained, &set, seed)?)
}

pub fn cmd_eval(cfg: &ExperimentConfig) -> Result<Vec<VariantReport>, CliError> {
    let all = jobs(cfg)?;
    let metrics = par_map(&all, |&(v, s)| evaluate_one(cfg, v, s))?;
    let mut reports = Vec::new();
    for v in cfg.parsed_variants()? {
        let seeds: Vec<SeedMetrics> = all
            .iter()
            .zip(&metrics)
            .filter(|((vv, _), _)| *vv == v)
            .map(|(_, m)| m.clone())
            .collect();
        let report = VariantReport::new(v, seeds);
        write_file(
            &eval_path(&cfg.out, v),
            &serde_json::to_string_pretty(&report).expect("reports serialize"),
        )?;
        reports.push(report);
    }
    Ok(reports)
}

pub fn load_report(out: &Path, variant: Variant) -> Result<VariantReport, CliError> {
    let path = eval_path(out, variant);
    if !path.exists() {
        return Err(CliError::Input(format!("missing evaluation {} (run eval)", path.display())));
    }
    serde_json::from_str(&read_file(&path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
