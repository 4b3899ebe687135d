use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::gate::{GateConfig, GateKind};
use crate::learner::SacConfig;
use crate::oracle::FeedbackMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleBackend {
    Scripted,
    Human,
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub total_timesteps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub oracle_backend: OracleBackend,
    pub human_timeout_ms: u64,
    pub env: EnvConfig,
    pub gate: GateConfig,
    pub learner: SacConfig,
    pub feedback: FeedbackMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            total_timesteps: 50_000,
            eval_every: 1_000,
            eval_episodes: 100,
            oracle_backend: OracleBackend::Scripted,
            human_timeout_ms: 10_000,
            env: EnvConfig::default(),
            gate: GateConfig::default(),
            learner: SacConfig::default(),
            feedback: FeedbackMode::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_timesteps == 0 {
            return Err(Error::InvalidConfig("total_timesteps must be > 0".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::InvalidConfig("eval_episodes must be > 0".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidConfig("eval_every must be > 0".into()));
        }
        if self.human_timeout_ms == 0 {
            return Err(Error::InvalidConfig("human_timeout_ms must be > 0".into()));
        }
        self.env.validate()?;
        self.gate.validate()?;
        self.learner.validate()
    }

    pub fn with_method(&self, kind: GateKind, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.gate.kind = kind;
        cfg.seed = seed;
        cfg
    }

    /// Short digest of the configuration with the method and the seed
    /// blanked, shared by every run of one comparison.
    pub fn config_hash(&self) -> String {
        let mut shared = self.clone();
        shared.seed = 0;
        shared.gate.kind = GateKind::NoOracle;
        let json = serde_json::to_vec(&shared).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..6])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn shipped_config_is_the_default() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
        assert_eq!(RunConfig::load(&path).unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = RunConfig::from_toml_str("seed = 4\n[gate]\nkind = \"sparq\"\nbudget = 10\n").unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.gate.kind, GateKind::Sparq);
        assert_eq!(cfg.gate.budget, 10);
        assert_eq!(cfg.total_timesteps, 50_000);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(RunConfig::from_toml_str("sed = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[gate]\nbudgett = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[learner]\nlr = 1\n").is_err());
    }

    #[test]
    fn invalid_values_are_errors() {
        assert!(RunConfig::from_toml_str("total_timesteps = 0\n").is_err());
        assert!(RunConfig::from_toml_str("eval_episodes = 0\n").is_err());
    }

    #[test]
    fn hash_ignores_method_and_seed_only() {
        let base = RunConfig::default();
        let a = base.with_method(GateKind::Sparq, 3);
        let b = base.with_method(GateKind::Always, 9);
        assert_eq!(a.config_hash(), b.config_hash());
        let mut c = base.clone();
        c.gate.budget += 1;
        assert_ne!(c.config_hash(), base.config_hash());
    }
}
