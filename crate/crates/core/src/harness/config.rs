use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::agents::{AgentConfig, AgentKind, PolicyRule};
use crate::envs::{CartPole, CartPoleParams, ChainEnv, ChainMdp, Environment};
use crate::error::{Error, Result};

/// Episodes per chain-fixture run when `max_steps` is not given.
pub const CHAIN_DEFAULT_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnvKind {
    #[default]
    CartPole,
    Chain,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::CartPole => "cartpole",
            EnvKind::Chain => "chain",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartpole" => Ok(EnvKind::CartPole),
            "chain" => Ok(EnvKind::Chain),
            other => Err(Error::Config(format!(
                "unknown env `{other}`; valid envs are: cartpole, chain"
            ))),
        }
    }
}

/// Everything one `train` or `compare` invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub agent: AgentKind,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub env: EnvKind,
    pub agent_config: AgentConfig,
    pub output_dir: PathBuf,
    pub emit_svg: bool,
    /// Overrides the environment's episode length.
    pub max_steps: Option<usize>,
    pub threshold: f64,
    pub window: usize,
    /// Write wall-clock update times into the CSV (breaks byte-for-byte reproducibility).
    pub csv_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            agent: AgentKind::EnhancedFql,
            episodes: 500,
            seeds: vec![0, 1, 2, 3, 4],
            env: EnvKind::CartPole,
            agent_config: AgentConfig::default(),
            output_dir: PathBuf::from("runs"),
            emit_svg: false,
            max_steps: None,
            threshold: -200.0,
            window: 10,
            csv_timing: false,
        }
    }
}

// Mirrors the flat file layout; every key is optional and merged over the defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    agent: Option<String>,
    episodes: Option<usize>,
    seeds: Option<Vec<u64>>,
    env: Option<String>,
    output_dir: Option<PathBuf>,
    emit_svg: Option<bool>,
    max_steps: Option<usize>,
    threshold: Option<f64>,
    window: Option<usize>,
    csv_timing: Option<bool>,
    alpha: Option<f64>,
    alpha_decay_tau: Option<f64>,
    gamma: Option<f64>,
    lambda: Option<f64>,
    beta: Option<f64>,
    policy: Option<PolicyRule>,
    epsilon_start: Option<f64>,
    epsilon_end: Option<f64>,
    epsilon_decay_episodes: Option<usize>,
    segment_length: Option<usize>,
    batch_size: Option<usize>,
    buffer_capacity: Option<usize>,
    replay_interval: Option<usize>,
    replay_enabled: Option<bool>,
    n_step: Option<usize>,
}

macro_rules! merge {
    ($dst:expr, $src:expr, $($field:ident),+) => {
        $( if let Some(v) = $src.$field { $dst.$field = v; } )+
    };
}

impl ExperimentConfig {
    /// Parses a flat JSON object. Blank input yields the defaults.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: FileConfig = if text.trim().is_empty() {
            FileConfig::default()
        } else {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        let mut cfg = ExperimentConfig::default();
        if let Some(name) = &file.agent {
            cfg.agent = name.parse().map_err(|e| Error::Config(format!("{e}")))?;
        }
        if let Some(name) = &file.env {
            cfg.env = name.parse()?;
        }
        merge!(cfg, file, episodes, seeds, output_dir, emit_svg, threshold, window, csv_timing);
        cfg.max_steps = file.max_steps.or(cfg.max_steps);
        let a = &mut cfg.agent_config;
        merge!(
            a,
            file,
            alpha,
            gamma,
            lambda,
            beta,
            policy,
            epsilon_start,
            epsilon_end,
            epsilon_decay_episodes,
            segment_length,
            batch_size,
            buffer_capacity,
            replay_interval,
            replay_enabled,
            n_step
        );
        a.alpha_decay_tau = file.alpha_decay_tau.or(a.alpha_decay_tau);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("`episodes` must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must list at least one seed".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("`window` must be at least 1".into()));
        }
        if !self.threshold.is_finite() {
            return Err(Error::Config("`threshold` must be finite".into()));
        }
        self.agent_config.validate().map_err(|e| match e {
            Error::ParameterOutOfRange { name, value } => {
                Error::Config(format!("`{name}` = {value} is out of range"))
            }
            other => other,
        })
    }

    /// Builds the environment instance for one run.
    pub fn make_env(&self, seed: u64) -> Box<dyn Environment + Send> {
        match self.env {
            EnvKind::CartPole => {
                let mut params = CartPoleParams::default();
                if let Some(n) = self.max_steps {
                    params.max_steps = n;
                }
                Box::new(CartPole::new(params, seed))
            }
            EnvKind::Chain => Box::new(ChainEnv::new(
                ChainMdp::fixture(self.agent_config.gamma),
                self.max_steps.unwrap_or(CHAIN_DEFAULT_STEPS),
                seed,
            )),
        }
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_json_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_json_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.agent_config.alpha, 0.005);
        assert_eq!(cfg.agent_config.gamma, 0.99);
        assert_eq!(cfg.agent_config.lambda, 0.8);
        assert_eq!(cfg.agent_config.segment_length, 10);
        assert_eq!(cfg.agent_config.batch_size, 32);
        assert_eq!(cfg.episodes, 500);
        assert_eq!(ExperimentConfig::from_json_str("{}").unwrap(), cfg);
    }

    #[test]
    fn lambda_out_of_range() {
        let err = ExperimentConfig::from_json_str(r#"{"lambda": 1.5}"#).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("lambda")), "{err}");
    }

    #[test]
    fn unknown_agent_lists_valid_ones() {
        let err = ExperimentConfig::from_json_str(r#"{"agent": "ddpg"}"#).unwrap_err();
        let msg = err.to_string();
        for name in ["enhanced-fql", "nstep-fql", "fuzzy-sarsa", "ddpg"] {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn unknown_key_is_rejected_with_position() {
        let err = ExperimentConfig::from_json_str("{\n  \"alpah\": 0.1\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpah") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn every_agent_field_is_settable() {
        let text = r#"{
            "alpha": 0.1, "alpha_decay_tau": 50.0, "gamma": 0.9, "lambda": 0.5, "beta": 2.0,
            "policy": "weighted-softmax", "epsilon_start": 0.3, "epsilon_end": 0.1,
            "epsilon_decay_episodes": 7, "segment_length": 4, "batch_size": 3,
            "buffer_capacity": 9, "replay_interval": 2, "replay_enabled": false, "n_step": 2
        }"#;
        let got = ExperimentConfig::from_json_str(text).unwrap().agent_config;
        let want = AgentConfig {
            alpha: 0.1,
            alpha_decay_tau: Some(50.0),
            gamma: 0.9,
            lambda: 0.5,
            beta: 2.0,
            policy: PolicyRule::WeightedSoftmax,
            epsilon_start: 0.3,
            epsilon_end: 0.1,
            epsilon_decay_episodes: 7,
            segment_length: 4,
            batch_size: 3,
            buffer_capacity: 9,
            replay_interval: 2,
            replay_enabled: false,
            n_step: 2,
        };
        assert_eq!(got, want);
    }

    #[test]
    fn harness_fields() {
        let text = r#"{"agent": "fuzzy-sarsa", "episodes": 3, "seeds": [4, 5], "env": "chain",
            "output_dir": "x", "emit_svg": true, "max_steps": 7, "threshold": -50, "window": 2,
            "csv_timing": true}"#;
        let cfg = ExperimentConfig::from_json_str(text).unwrap();
        assert_eq!(cfg.agent, AgentKind::FuzzySarsa);
        assert_eq!(cfg.seeds, vec![4, 5]);
        assert_eq!(cfg.env, EnvKind::Chain);
        assert_eq!(cfg.max_steps, Some(7));
        assert_eq!(cfg.make_env(0).max_steps(), 7);
        assert!(cfg.emit_svg && cfg.csv_timing);
        assert_eq!((cfg.threshold, cfg.window), (-50.0, 2));
    }

    #[test]
    fn structural_errors() {
        assert!(ExperimentConfig::from_json_str(r#"{"episodes": 0}"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"seeds": []}"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"env": "pendulum"}"#).is_err());
        assert!(ExperimentConfig::from_json_str("[1, 2]").is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"alpha": "fast"}"#).is_err());
    }
}
