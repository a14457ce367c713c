//! wasm-bindgen bindings behind `www/index.html`: membership curves, a short
//! training run, and the Bellman-operator checks.

use wasm_bindgen::prelude::*;

use efql_core::agents::{build_agent, run_episode_untimed, AgentConfig, AgentKind};
use efql_core::envs::{CartPole, CartPoleParams, ChainEnv, ChainMdp, Environment};
use efql_core::fuzzy::{membership_1d, DimensionPartition};
use efql_core::harness::experiment::env_seed;
use efql_core::oracle::verification_suite;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Gaussian memberships of `count` evenly spaced sets over `[lo, hi]`,
/// sampled at `samples` points. Layout: the x grid, then one row per set.
#[wasm_bindgen]
pub fn membership_curves(lo: f64, hi: f64, count: usize, samples: usize) -> Result<Vec<f64>, JsError> {
    let part = DimensionPartition::evenly_spaced(lo, hi, count).map_err(js_err)?;
    let samples = samples.max(2);
    let xs: Vec<f64> = (0..samples)
        .map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64)
        .collect();
    let mut out = xs.clone();
    let rows: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| membership_1d(&part, x))
        .collect::<Result<_, _>>()
        .map_err(js_err)?;
    for set in 0..count {
        out.extend(rows.iter().map(|r| r[set]));
    }
    Ok(out)
}

/// Per-episode returns of `agent` trained for `episodes` episodes on
/// `env` ("cartpole" or "chain").
#[wasm_bindgen]
pub fn train(agent: &str, env: &str, episodes: usize, seed: u64, alpha: f64) -> Result<Vec<f64>, JsError> {
    let kind: AgentKind = agent.parse().map_err(js_err)?;
    let cfg = AgentConfig {
        alpha,
        ..AgentConfig::default()
    };
    let mut env: Box<dyn Environment> = match env {
        "cartpole" => Box::new(CartPole::new(CartPoleParams::default(), env_seed(seed))),
        "chain" => Box::new(ChainEnv::new(ChainMdp::fixture(cfg.gamma), 100, env_seed(seed))),
        other => return Err(JsError::new(&format!("unknown env `{other}`; use cartpole or chain"))),
    };
    let mut learner = build_agent(kind, env.rule_base().map_err(js_err)?, cfg, seed).map_err(js_err)?;
    let steps = env.max_steps();
    (0..episodes)
        .map(|ep| run_episode_untimed(learner.as_mut(), env.as_mut(), steps, ep).map(|log| log.ret))
        .collect::<Result<_, _>>()
        .map_err(js_err)
}

/// Runs the operator property checks; returns a JSON array of
/// `{name, passed, detail}`.
#[wasm_bindgen]
pub fn verify(tol: f64, seed: u64) -> Result<String, JsError> {
    let results = verification_suite(tol, seed).map_err(js_err)?;
    let rows: Vec<serde_json::Value> = results
        .iter()
        .map(|p| serde_json::json!({ "name": p.name, "passed": p.passed, "detail": p.detail }))
        .collect();
    Ok(serde_json::Value::Array(rows).to_string())
}
