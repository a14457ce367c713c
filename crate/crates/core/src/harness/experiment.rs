use crate::agents::{build_agent, run_episode, AgentKind};
use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::metrics::compute_metrics;

/// Salt separating the environment's random stream from the agent's.
const ENV_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn env_seed(seed: u64) -> u64 {
    seed ^ ENV_SEED_SALT
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub agent: AgentKind,
    pub seed: u64,
    pub per_episode_returns: Vec<f64>,
    pub mean_abs_td: Vec<f64>,
    pub update_ms: Vec<f64>,
    pub avg_return_last_10pct: f64,
    pub mean_update_time_ms: f64,
    pub convergence_episode: Option<usize>,
}

/// Trains one agent on one seed for `cfg.episodes` episodes.
pub fn run_seed(cfg: &ExperimentConfig, agent_kind: AgentKind, seed: u64) -> Result<RunSummary> {
    let tag = |e: Error| Error::Seed {
        seed,
        source: Box::new(e),
    };
    let mut env = cfg.make_env(env_seed(seed));
    let rules = env.rule_base().map_err(tag)?;
    let mut agent = build_agent(agent_kind, rules, cfg.agent_config.clone(), seed).map_err(tag)?;
    let steps = env.max_steps();
    let mut returns = Vec::with_capacity(cfg.episodes);
    let mut td = Vec::with_capacity(cfg.episodes);
    let mut update_ms = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        let log = run_episode(agent.as_mut(), env.as_mut(), steps, episode).map_err(tag)?;
        returns.push(log.ret);
        td.push(log.mean_abs_td);
        update_ms.push(log.update_ms);
    }
    let metrics = compute_metrics(&returns, cfg.threshold, cfg.window).map_err(tag)?;
    let mean_update_time_ms = update_ms.iter().sum::<f64>() / update_ms.len() as f64;
    Ok(RunSummary {
        agent: agent_kind,
        seed,
        per_episode_returns: returns,
        mean_abs_td: td,
        update_ms,
        avg_return_last_10pct: metrics.avg_return_last_10pct,
        mean_update_time_ms,
        convergence_episode: metrics.convergence_episode,
    })
}

/// Runs every `(agent, seed)` pair, concurrently when the `parallel` feature is on.
/// Results keep the order of `jobs`.
pub fn run_jobs(cfg: &ExperimentConfig, jobs: &[(AgentKind, u64)]) -> Result<Vec<RunSummary>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(|&(kind, seed)| run_seed(cfg, kind, seed)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(|&(kind, seed)| run_seed(cfg, kind, seed)).collect()
    }
}

/// One summary per seed for the configured agent.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    let jobs: Vec<_> = cfg.seeds.iter().map(|&s| (cfg.agent, s)).collect();
    run_jobs(cfg, &jobs)
}

/// All three agents on the shared seeds, agent-major order.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    let jobs: Vec<_> = AgentKind::ALL
        .iter()
        .flat_map(|&k| cfg.seeds.iter().map(move |&s| (k, s)))
        .collect();
    run_jobs(cfg, &jobs)
}
