//! Learning agents sharing one fuzzy rule base: Enhanced-FQL(λ) and the
//! n-step FQL and fuzzy SARSA(λ) baselines.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::credit::{activation, reset_traces, scaled_add, update_traces, EligibilityMatrix};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::fuzzy::{
    activation_softmax, defuzzify_action, fuzzy_value, greedy_indices, normalize_weights, on_policy_value,
    policy_distribution, td_error_into, FuzzyQTable, RuleBase,
};
use crate::matrix::RuleMatrix;
use crate::replay::{replay_batch, ReplayBuffer, ReplayConfig, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    EnhancedFql,
    NstepFql,
    FuzzySarsa,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::EnhancedFql, AgentKind::NstepFql, AgentKind::FuzzySarsa];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::EnhancedFql => "enhanced-fql",
            AgentKind::NstepFql => "nstep-fql",
            AgentKind::FuzzySarsa => "fuzzy-sarsa",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownAgent(pub String);

impl fmt::Display for UnknownAgent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let valid: Vec<&str> = AgentKind::ALL.iter().map(|k| k.name()).collect();
        write!(f, "unknown agent `{}`; valid agents are: {}", self.0, valid.join(", "))
    }
}

impl std::error::Error for UnknownAgent {}

impl FromStr for AgentKind {
    type Err = UnknownAgent;

    fn from_str(s: &str) -> std::result::Result<Self, UnknownAgent> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownAgent(s.to_string()))
    }
}

/// How the rule distribution behind the defuzzified greedy action is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyRule {
    /// `p_i ∝ exp(w_i * max_j Q[i][j] / beta)`
    WeightedSoftmax,
    /// `p_i ∝ w_i * exp(max_j Q[i][j] / beta)`
    #[default]
    ActivationSoftmax,
}

/// Hyperparameters shared by all agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub alpha: f64,
    /// When set, the step size decays as `alpha / (1 + t / tau)`.
    pub alpha_decay_tau: Option<f64>,
    pub gamma: f64,
    pub lambda: f64,
    pub beta: f64,
    pub policy: PolicyRule,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_episodes: usize,
    pub segment_length: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub replay_interval: usize,
    pub replay_enabled: bool,
    pub n_step: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.005,
            alpha_decay_tau: None,
            gamma: 0.99,
            lambda: 0.8,
            beta: 1.0,
            policy: PolicyRule::default(),
            epsilon_start: 0.2,
            epsilon_end: 0.05,
            epsilon_decay_episodes: 500,
            segment_length: 10,
            batch_size: 32,
            buffer_capacity: 500,
            replay_interval: 10,
            replay_enabled: true,
            n_step: 5,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ];
        for (name, value) in unit {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ParameterOutOfRange { name, value });
            }
        }
        let positive = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("alpha_decay_tau", self.alpha_decay_tau.unwrap_or(1.0)),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::ParameterOutOfRange { name, value });
            }
        }
        let counts = [
            ("segment_length", self.segment_length),
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("replay_interval", self.replay_interval),
            ("n_step", self.n_step),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::ParameterOutOfRange { name, value: 0.0 });
            }
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end`, then constant.
    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.epsilon_decay_episodes == 0 {
            return self.epsilon_end;
        }
        let frac = (episode as f64 / self.epsilon_decay_episodes as f64).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    pub fn step_size(&self, step: u64) -> f64 {
        match self.alpha_decay_tau {
            Some(tau) => self.alpha / (1.0 + step as f64 / tau),
            None => self.alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub value: f64,
    /// The epsilon branch fired.
    pub exploratory: bool,
}

/// Defuzzified greedy action for state `s`.
pub fn greedy_action(
    q: &FuzzyQTable,
    rules: &RuleBase,
    s: &[f64],
    beta: f64,
    policy: PolicyRule,
) -> Result<f64> {
    let w = rules.weights(s)?;
    let p = match policy {
        PolicyRule::WeightedSoftmax => policy_distribution(q, &w, beta)?,
        PolicyRule::ActivationSoftmax => activation_softmax(q, &w, beta)?,
    };
    Ok(defuzzify_action(&p, &rules.action, &greedy_indices(q)))
}

/// State shared by every agent: rule base, table, schedule and random source.
#[derive(Debug, Clone)]
pub struct AgentCore {
    pub rules: RuleBase,
    pub cfg: AgentConfig,
    pub q: FuzzyQTable,
    pub rng: ChaCha8Rng,
    pub epsilon: f64,
    pub episode: usize,
    pub step_count: u64,
}

impl AgentCore {
    pub fn new(rules: RuleBase, cfg: AgentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let (rows, cols) = rules.shape();
        Ok(Self {
            epsilon: cfg.epsilon(0),
            rules,
            cfg,
            q: FuzzyQTable::zeros(rows, cols),
            rng: ChaCha8Rng::seed_from_u64(seed),
            episode: 0,
            step_count: 0,
        })
    }

    fn begin_episode(&mut self, episode: usize) {
        self.episode = episode;
        self.epsilon = self.cfg.epsilon(episode);
    }

    /// Epsilon-greedy: a uniform action over the action range with
    /// probability epsilon, otherwise the defuzzified greedy action.
    pub fn select_action(&mut self, s: &[f64]) -> Result<Action> {
        let explore = self.rng.gen::<f64>() < self.epsilon;
        if explore {
            let (lo, hi) = self.rules.action.range();
            return Ok(Action {
                value: self.rng.gen_range(lo..=hi),
                exploratory: true,
            });
        }
        Ok(Action {
            value: greedy_action(&self.q, &self.rules, s, self.cfg.beta, self.cfg.policy)?,
            exploratory: false,
        })
    }

    fn value(&self, s: &[f64]) -> Result<f64> {
        fuzzy_value(&self.q, &self.rules.weights(s)?)
    }
}

/// Uniform interface over the three learners.
pub trait Agent {
    fn kind(&self) -> AgentKind;
    fn core(&self) -> &AgentCore;
    fn core_mut(&mut self) -> &mut AgentCore;
    fn begin_episode(&mut self, episode: usize);
    fn act(&mut self, s: &[f64]) -> Result<Action>;
    /// Learns from one transition; returns the scalar TD diagnostic.
    fn observe(&mut self, s: &[f64], action: Action, r: f64, s_next: &[f64]) -> Result<f64>;
    fn end_episode(&mut self) -> Result<()>;

    fn q_table(&self) -> &FuzzyQTable {
        &self.core().q
    }
}

/// Fuzzy Q(λ) with Watkins trace resets and segment replay.
#[derive(Debug, Clone)]
pub struct EnhancedFql {
    pub core: AgentCore,
    pub traces: EligibilityMatrix,
    pub buffer: ReplayBuffer,
    delta: RuleMatrix,
}

impl EnhancedFql {
    pub fn new(rules: RuleBase, cfg: AgentConfig, seed: u64) -> Result<Self> {
        let core = AgentCore::new(rules, cfg, seed)?;
        let (rows, cols) = core.q.shape();
        let buffer = ReplayBuffer::new(core.cfg.segment_length, core.cfg.buffer_capacity)?;
        Ok(Self {
            core,
            traces: EligibilityMatrix::zeros(rows, cols),
            buffer,
            delta: RuleMatrix::zeros(rows, cols),
        })
    }

    /// One online learning step: record, bootstrap, trace update, TD update,
    /// Watkins reset on exploration, then replay every `replay_interval` steps.
    pub fn step(&mut self, s: &[f64], a: f64, r: f64, s_next: &[f64], exploratory: bool) -> Result<f64> {
        let cfg = &self.core.cfg;
        let (gamma, lambda) = (cfg.gamma, cfg.lambda);
        let alpha = cfg.step_size(self.core.step_count);
        if cfg.replay_enabled {
            self.buffer
                .record(Transition::new(s.to_vec(), a, r, s_next.to_vec()))?;
        }
        let rules = &self.core.rules;
        let upsilon_here = self.core.value(s)?;
        let upsilon_next = fuzzy_value(&self.core.q, &rules.weights(s_next)?)?;
        let zeta = activation(&rules.state_membership(s)?, &rules.action_membership(a)?)?;
        update_traces(&mut self.traces, &zeta, gamma, lambda)?;
        td_error_into(&self.core.q, r + gamma * upsilon_next, &mut self.delta);
        scaled_add(&mut self.core.q, alpha, self.traces.as_slice(), self.delta.as_slice())?;
        if exploratory {
            reset_traces(&mut self.traces);
        }
        self.core.step_count += 1;
        let cfg = &self.core.cfg;
        if cfg.replay_enabled
            && self.core.step_count % cfg.replay_interval as u64 == 0
            && self.buffer.len() >= cfg.batch_size
        {
            let replay = ReplayConfig {
                alpha,
                gamma,
                lambda,
                batch_size: cfg.batch_size,
            };
            replay_batch(&mut self.core.q, &self.buffer, &replay, &self.core.rules, &mut self.core.rng)?;
        }
        Ok(r + gamma * upsilon_next - upsilon_here)
    }
}

impl Agent for EnhancedFql {
    fn kind(&self) -> AgentKind {
        AgentKind::EnhancedFql
    }

    fn core(&self) -> &AgentCore {
        &self.core
    }

    fn core_mut(&mut self) -> &mut AgentCore {
        &mut self.core
    }

    fn begin_episode(&mut self, episode: usize) {
        self.core.begin_episode(episode);
        reset_traces(&mut self.traces);
        self.buffer.flush_open();
    }

    fn act(&mut self, s: &[f64]) -> Result<Action> {
        self.core.select_action(s)
    }

    fn observe(&mut self, s: &[f64], action: Action, r: f64, s_next: &[f64]) -> Result<f64> {
        self.step(s, action.value, r, s_next, action.exploratory)
    }

    fn end_episode(&mut self) -> Result<()> {
        self.buffer.flush_open();
        Ok(())
    }
}

/// n-step fuzzy Q-learning: bootstrapped n-step returns pushed through the
/// activation of the oldest transition in the window.
#[derive(Debug, Clone)]
pub struct NStepFql {
    pub core: AgentCore,
    window: VecDeque<Transition>,
}

impl NStepFql {
    pub fn new(rules: RuleBase, cfg: AgentConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            core: AgentCore::new(rules, cfg, seed)?,
            window: VecDeque::new(),
        })
    }

    /// `G = sum_k gamma^k r_k + gamma^m * upsilon(s_m)` over the first `m` window entries.
    pub fn window_return(&self, m: usize) -> Result<f64> {
        let gamma = self.core.cfg.gamma;
        let bootstrap = self.core.value(&self.window[m - 1].s_next)?;
        Ok(self
            .window
            .iter()
            .take(m)
            .rev()
            .fold(bootstrap, |g, t| t.r + gamma * g))
    }

    fn update_oldest(&mut self, m: usize) -> Result<()> {
        let target = self.window_return(m)?;
        let oldest = self.window.pop_front().expect("window holds m transitions");
        let rules = &self.core.rules;
        let zeta = activation(&rules.state_membership(&oldest.s)?, &rules.action_membership(oldest.a)?)?;
        let mut delta = RuleMatrix::zeros(self.core.q.rows(), self.core.q.cols());
        td_error_into(&self.core.q, target, &mut delta);
        let alpha = self.core.cfg.step_size(self.core.step_count);
        scaled_add(&mut self.core.q, alpha, zeta.as_slice(), delta.as_slice())
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }
}

impl Agent for NStepFql {
    fn kind(&self) -> AgentKind {
        AgentKind::NstepFql
    }

    fn core(&self) -> &AgentCore {
        &self.core
    }

    fn core_mut(&mut self) -> &mut AgentCore {
        &mut self.core
    }

    fn begin_episode(&mut self, episode: usize) {
        self.core.begin_episode(episode);
        self.window.clear();
    }

    fn act(&mut self, s: &[f64]) -> Result<Action> {
        self.core.select_action(s)
    }

    fn observe(&mut self, s: &[f64], action: Action, r: f64, s_next: &[f64]) -> Result<f64> {
        let gamma = self.core.cfg.gamma;
        let diagnostic = r + gamma * self.core.value(s_next)? - self.core.value(s)?;
        self.window
            .push_back(Transition::new(s.to_vec(), action.value, r, s_next.to_vec()));
        let n = self.core.cfg.n_step;
        if self.window.len() >= n {
            self.update_oldest(n)?;
        }
        self.core.step_count += 1;
        Ok(diagnostic)
    }

    fn end_episode(&mut self) -> Result<()> {
        while !self.window.is_empty() {
            let m = self.window.len();
            self.update_oldest(m)?;
        }
        Ok(())
    }
}

/// On-policy fuzzy SARSA(λ); traces persist through exploratory actions.
#[derive(Debug, Clone)]
pub struct FuzzySarsa {
    pub core: AgentCore,
    pub traces: EligibilityMatrix,
    pending: Option<Action>,
    delta: RuleMatrix,
}

impl FuzzySarsa {
    pub fn new(rules: RuleBase, cfg: AgentConfig, seed: u64) -> Result<Self> {
        let core = AgentCore::new(rules, cfg, seed)?;
        let (rows, cols) = core.q.shape();
        Ok(Self {
            core,
            traces: EligibilityMatrix::zeros(rows, cols),
            pending: None,
            delta: RuleMatrix::zeros(rows, cols),
        })
    }

    /// `sum_i w_i(s) sum_j v_j(a) Q[i][j]` with normalized action memberships `v`.
    pub fn on_policy_value(&self, s: &[f64], a: f64) -> Result<f64> {
        let rules = &self.core.rules;
        let v = normalize_weights(&rules.action_membership(a)?)?;
        on_policy_value(&self.core.q, &rules.weights(s)?, &v)
    }

    /// Update given the already-selected next action.
    pub fn step(&mut self, s: &[f64], a: f64, r: f64, s_next: &[f64], a_next: f64) -> Result<f64> {
        let (gamma, lambda) = (self.core.cfg.gamma, self.core.cfg.lambda);
        let alpha = self.core.cfg.step_size(self.core.step_count);
        let here = self.on_policy_value(s, a)?;
        let next = self.on_policy_value(s_next, a_next)?;
        let rules = &self.core.rules;
        let zeta = activation(&rules.state_membership(s)?, &rules.action_membership(a)?)?;
        update_traces(&mut self.traces, &zeta, gamma, lambda)?;
        td_error_into(&self.core.q, r + gamma * next, &mut self.delta);
        scaled_add(&mut self.core.q, alpha, self.traces.as_slice(), self.delta.as_slice())?;
        self.core.step_count += 1;
        Ok(r + gamma * next - here)
    }
}

impl Agent for FuzzySarsa {
    fn kind(&self) -> AgentKind {
        AgentKind::FuzzySarsa
    }

    fn core(&self) -> &AgentCore {
        &self.core
    }

    fn core_mut(&mut self) -> &mut AgentCore {
        &mut self.core
    }

    fn begin_episode(&mut self, episode: usize) {
        self.core.begin_episode(episode);
        reset_traces(&mut self.traces);
        self.pending = None;
    }

    fn act(&mut self, s: &[f64]) -> Result<Action> {
        match self.pending.take() {
            Some(a) => Ok(a),
            None => self.core.select_action(s),
        }
    }

    fn observe(&mut self, s: &[f64], action: Action, r: f64, s_next: &[f64]) -> Result<f64> {
        let next = self.core.select_action(s_next)?;
        self.pending = Some(next);
        self.step(s, action.value, r, s_next, next.value)
    }

    fn end_episode(&mut self) -> Result<()> {
        self.pending = None;
        Ok(())
    }
}

pub fn build_agent(
    kind: AgentKind,
    rules: RuleBase,
    cfg: AgentConfig,
    seed: u64,
) -> Result<Box<dyn Agent + Send>> {
    Ok(match kind {
        AgentKind::EnhancedFql => Box::new(EnhancedFql::new(rules, cfg, seed)?),
        AgentKind::NstepFql => Box::new(NStepFql::new(rules, cfg, seed)?),
        AgentKind::FuzzySarsa => Box::new(FuzzySarsa::new(rules, cfg, seed)?),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    /// Undiscounted reward sum.
    pub ret: f64,
    pub steps: usize,
    pub mean_abs_td: f64,
    /// Mean wall-clock time of one learning update, in milliseconds.
    pub update_ms: f64,
}

fn run_episode_inner<A, E>(
    agent: &mut A,
    env: &mut E,
    max_steps: usize,
    episode: usize,
    timed: bool,
) -> Result<EpisodeLog>
where
    A: Agent + ?Sized,
    E: Environment + ?Sized,
{
    agent.begin_episode(episode);
    let mut s = env.reset();
    let mut ret = 0.0;
    let mut td_sum = 0.0;
    let mut update_secs = 0.0;
    for _ in 0..max_steps {
        let action = agent.act(&s)?;
        let (s_next, r) = env.step(action.value)?;
        let started = timed.then(Instant::now);
        let td = agent.observe(&s, action, r, &s_next)?;
        if let Some(t0) = started {
            update_secs += t0.elapsed().as_secs_f64();
        }
        ret += r;
        td_sum += td.abs();
        s = s_next;
    }
    agent.end_episode()?;
    let per_step = |x: f64| if max_steps == 0 { 0.0 } else { x / max_steps as f64 };
    Ok(EpisodeLog {
        ret,
        steps: max_steps,
        mean_abs_td: per_step(td_sum),
        update_ms: per_step(update_secs * 1e3),
    })
}

/// Runs one episode of at most `max_steps` steps, timing each learning update.
pub fn run_episode<A, E>(agent: &mut A, env: &mut E, max_steps: usize, episode: usize) -> Result<EpisodeLog>
where
    A: Agent + ?Sized,
    E: Environment + ?Sized,
{
    run_episode_inner(agent, env, max_steps, episode, true)
}

/// [`run_episode`] without wall-clock timing (for targets without a clock).
pub fn run_episode_untimed<A, E>(
    agent: &mut A,
    env: &mut E,
    max_steps: usize,
    episode: usize,
) -> Result<EpisodeLog>
where
    A: Agent + ?Sized,
    E: Environment + ?Sized,
{
    run_episode_inner(agent, env, max_steps, episode, false)
}
