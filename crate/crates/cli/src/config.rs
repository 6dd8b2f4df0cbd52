use std::path::{Path, PathBuf};

use emergelex_core::agent::ModelHyper;
use emergelex_core::data::{NovelPair, SceneOptions, WorldSpec};
use emergelex_core::game::Variant;
use emergelex_core::h2h::H2hHyper;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldSpec,
    pub scenes: ScenesConfig,
    pub model: ModelHyper,
    pub h2h: H2hHyper,
    /// Naming-game iterations per seed.
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub variants: Vec<String>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            world: WorldSpec::default(),
            scenes: ScenesConfig::default(),
            model: ModelHyper::default(),
            h2h: H2hHyper::default(),
            iterations: 100,
            seeds: (0..10).collect(),
            variants: Variant::ALL.iter().map(|v| v.name().to_string()).collect(),
            out: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenesConfig {
    pub n_scenes: usize,
    pub m_range: (usize, usize),
    pub train_fraction: f64,
    /// Keep `novel` out of the training split and attend it in every test scene.
    pub hold_out_novel: bool,
    pub novel: NovelPair,
}

impl Default for ScenesConfig {
    fn default() -> Self {
        let base = SceneOptions::default();
        ScenesConfig {
            n_scenes: base.n_scenes,
            m_range: base.m_range,
            train_fraction: base.train_fraction,
            hold_out_novel: true,
            novel: NovelPair {
                color_type: 0,
                object_type: 0,
            },
        }
    }
}

impl ScenesConfig {
    pub fn options(&self) -> SceneOptions {
        SceneOptions {
            n_scenes: self.n_scenes,
            m_range: self.m_range,
            train_fraction: self.train_fraction,
            novel: self.hold_out_novel.then_some(self.novel),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Input("seed list is empty".into()));
        }
        if self.iterations == 0 {
            return Err(CliError::Input("iterations must be at least 1".into()));
        }
        self.parsed_variants()?;
        self.world.validate()?;
        self.model.validate()?;
        self.h2h.validate()?;
        Ok(())
    }

    pub fn parsed_variants(&self) -> Result<Vec<Variant>, CliError> {
        if self.variants.is_empty() {
            return Err(CliError::Input("variant list is empty".into()));
        }
        self.variants
            .iter()
            .map(|s| Variant::parse(s).ok_or_else(|| CliError::Input(format!("unknown variant {s:?}"))))
            .collect()
    }
}

/// Parses `3`, `0-9`, `1,4,7` or mixtures like `0-2,8`.
pub fn parse_seed_set(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Input(format!("bad seed set {s:?}"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
                let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
                if hi < lo {
                    return Err(bad());
                }
                out.extend(lo..=hi);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_sets() {
        assert_eq!(parse_seed_set("0-3").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_seed_set("5,1, 2-3").unwrap(), vec![1, 2, 3, 5]);
        assert!(parse_seed_set("3-1").is_err());
        assert!(parse_seed_set("x").is_err());
        assert!(parse_seed_set("").is_err());
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.seeds.len(), 10);
        assert_eq!(cfg.scenes.n_scenes, 40);
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg: ExperimentConfig = toml::from_str("iterations = 5\n[model]\ngamma = 0.5\n").unwrap();
        assert_eq!(cfg.iterations, 5);
        assert_eq!(cfg.model.gamma, 0.5);
        assert_eq!(cfg.model.vocab, 13);
        assert!(toml::from_str::<ExperimentConfig>("bogus = 1").is_err());
    }
}
