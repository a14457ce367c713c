//! Cart-pole stabilization task and the deterministic chain used by the
//! Bellman-operator checks.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fuzzy::{build_state_partition, ActionPartition, RuleBase};

/// An episodic control task with a continuous scalar action.
pub trait Environment {
    fn state_dim(&self) -> usize;
    fn reset(&mut self) -> Vec<f64>;
    /// Applies `action` and returns `(next_state, reward)`.
    fn step(&mut self, action: f64) -> Result<(Vec<f64>, f64)>;
    fn max_steps(&self) -> usize;
    fn action_range(&self) -> (f64, f64);
    /// Default fuzzy rule base for this task.
    fn rule_base(&self) -> Result<RuleBase>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub const UPRIGHT: Self = Self {
        x: 0.0,
        x_dot: 0.0,
        theta: 0.0,
        theta_dot: 0.0,
    };

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        match *s {
            [x, x_dot, theta, theta_dot] => Ok(Self {
                x,
                x_dot,
                theta,
                theta_dot,
            }),
            _ => Err(Error::DimensionMismatch {
                expected: 4,
                got: s.len(),
            }),
        }
    }

    fn is_finite(&self) -> bool {
        [self.x, self.x_dot, self.theta, self.theta_dot]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartPoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_half_length: f64,
    pub gravity: f64,
    pub dt: f64,
    pub force_lo: f64,
    pub force_hi: f64,
    pub max_steps: usize,
    pub init_perturbation: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_half_length: 0.5,
            gravity: 9.8,
            dt: 0.02,
            force_lo: -2.0,
            force_hi: 2.0,
            max_steps: 500,
            init_perturbation: 0.05,
        }
    }
}

/// Quadratic penalty on state deviation and control effort.
pub fn cartpole_reward(state: &CartPoleState, force: f64) -> f64 {
    -(state.theta * state.theta
        + 0.1 * state.theta_dot * state.theta_dot
        + 0.001 * state.x * state.x
        + 0.0001 * state.x_dot * state.x_dot
        + 0.001 * force * force)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    } else if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

pub fn cartpole_reset<R: Rng + ?Sized>(params: &CartPoleParams, rng: &mut R) -> CartPoleState {
    let p = params.init_perturbation;
    let theta = if p > 0.0 { rng.gen_range(-p..=p) } else { 0.0 };
    CartPoleState {
        theta,
        ..CartPoleState::UPRIGHT
    }
}

/// Cart and pole accelerations `(x_ddot, theta_ddot)`.
pub fn cartpole_accelerations(state: &CartPoleState, force: f64, params: &CartPoleParams) -> (f64, f64) {
    let total_mass = params.cart_mass + params.pole_mass;
    let pole_ml = params.pole_mass * params.pole_half_length;
    let (sin, cos) = state.theta.sin_cos();
    let temp = (-force - pole_ml * state.theta_dot * state.theta_dot * sin) / total_mass;
    let theta_acc = (params.gravity * sin + cos * temp)
        / (params.pole_half_length * (4.0 / 3.0 - params.pole_mass * cos * cos / total_mass));
    let x_acc =
        (force + pole_ml * (state.theta_dot * state.theta_dot * sin - theta_acc * cos)) / total_mass;
    (x_acc, theta_acc)
}

/// One semi-implicit Euler step. The reward is evaluated on the pre-step
/// state and the clamped force.
pub fn cartpole_step(
    state: &CartPoleState,
    force: f64,
    params: &CartPoleParams,
) -> Result<(CartPoleState, f64)> {
    let force = if force.is_nan() {
        return Err(Error::NonFiniteInput(force));
    } else {
        force.clamp(params.force_lo, params.force_hi)
    };
    let reward = cartpole_reward(state, force);
    let (x_acc, theta_acc) = cartpole_accelerations(state, force, params);
    let x_dot = state.x_dot + params.dt * x_acc;
    let theta_dot = state.theta_dot + params.dt * theta_acc;
    let next = CartPoleState {
        x: state.x + params.dt * x_dot,
        x_dot,
        theta: wrap_angle(state.theta + params.dt * theta_dot),
        theta_dot,
    };
    if !next.is_finite() {
        return Err(Error::NonFiniteState);
    }
    Ok((next, reward))
}

/// Total mechanical energy of the cart and a uniform pole.
pub fn cartpole_energy(state: &CartPoleState, params: &CartPoleParams) -> f64 {
    let (m, mp, l) = (params.cart_mass, params.pole_mass, params.pole_half_length);
    let kinetic = 0.5 * (m + mp) * state.x_dot * state.x_dot
        + mp * l * state.x_dot * state.theta_dot * state.theta.cos()
        + 0.5 * (4.0 / 3.0) * mp * l * l * state.theta_dot * state.theta_dot;
    kinetic + mp * params.gravity * l * state.theta.cos()
}

/// Fuzzy partition ranges for `[x, x_dot, theta, theta_dot]`.
pub const CARTPOLE_STATE_RANGES: [(f64, f64); 4] = [(-2.4, 2.4), (-3.0, 3.0), (-0.26, 0.26), (-2.0, 2.0)];
pub const CARTPOLE_STATE_COUNTS: [usize; 4] = [3, 3, 7, 5];
pub const CARTPOLE_ACTION_COUNT: usize = 5;

#[derive(Debug, Clone)]
pub struct CartPole {
    pub params: CartPoleParams,
    state: CartPoleState,
    rng: ChaCha8Rng,
}

impl CartPole {
    pub fn new(params: CartPoleParams, seed: u64) -> Self {
        Self {
            params,
            state: CartPoleState::UPRIGHT,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }
}

impl Environment for CartPole {
    fn state_dim(&self) -> usize {
        4
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = cartpole_reset(&self.params, &mut self.rng);
        self.state.to_vec()
    }

    fn step(&mut self, action: f64) -> Result<(Vec<f64>, f64)> {
        let (next, reward) = cartpole_step(&self.state, action, &self.params)?;
        self.state = next;
        Ok((next.to_vec(), reward))
    }

    fn max_steps(&self) -> usize {
        self.params.max_steps
    }

    fn action_range(&self) -> (f64, f64) {
        (self.params.force_lo, self.params.force_hi)
    }

    fn rule_base(&self) -> Result<RuleBase> {
        Ok(RuleBase::new(
            build_state_partition(&CARTPOLE_STATE_RANGES, &CARTPOLE_STATE_COUNTS)?,
            ActionPartition::evenly_spaced(self.params.force_lo, self.params.force_hi, CARTPOLE_ACTION_COUNT)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainReward {
    /// `r = -s'^2`
    NegSquare,
    Constant(f64),
}

/// One-dimensional deterministic chain: `s' = clamp(s + step_scale * a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMdp {
    pub state_lo: f64,
    pub state_hi: f64,
    pub step_scale: f64,
    pub reward: ChainReward,
    pub gamma: f64,
    pub state_sets: usize,
    pub action_centers: Vec<f64>,
}

impl ChainMdp {
    /// States in `[-1, 1]` with 5 rules, actions `{-2, -1, 0, 1, 2}`, `r = -s'^2`.
    pub fn fixture(gamma: f64) -> Self {
        Self {
            state_lo: -1.0,
            state_hi: 1.0,
            step_scale: 0.1,
            reward: ChainReward::NegSquare,
            gamma,
            state_sets: 5,
            action_centers: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
        }
    }

    pub fn with_reward(mut self, reward: ChainReward) -> Self {
        self.reward = reward;
        self
    }

    pub fn rule_base(&self) -> Result<RuleBase> {
        let lo = self.action_centers[0];
        let hi = *self.action_centers.last().unwrap_or(&lo);
        let spacing = (hi - lo) / (self.action_centers.len().max(2) - 1) as f64;
        Ok(RuleBase::new(
            build_state_partition(&[(self.state_lo, self.state_hi)], &[self.state_sets])?,
            ActionPartition::new(self.action_centers.clone(), spacing / 2.0, lo, hi)?,
        ))
    }

    /// Largest reward magnitude reachable on the chain.
    pub fn reward_bound(&self) -> f64 {
        match self.reward {
            ChainReward::NegSquare => self.state_lo.abs().max(self.state_hi.abs()).powi(2),
            ChainReward::Constant(r) => r.abs(),
        }
    }
}

pub fn chain_step(mdp: &ChainMdp, s: f64, a: f64) -> (f64, f64) {
    let next = (s + mdp.step_scale * a).clamp(mdp.state_lo, mdp.state_hi);
    let reward = match mdp.reward {
        ChainReward::NegSquare => -next * next,
        ChainReward::Constant(r) => r,
    };
    (next, reward)
}

/// Episodic wrapper around [`ChainMdp`] with random starts.
#[derive(Debug, Clone)]
pub struct ChainEnv {
    pub mdp: ChainMdp,
    max_steps: usize,
    state: f64,
    rng: ChaCha8Rng,
}

impl ChainEnv {
    pub fn new(mdp: ChainMdp, max_steps: usize, seed: u64) -> Self {
        Self {
            mdp,
            max_steps,
            state: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Environment for ChainEnv {
    fn state_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = self.rng.gen_range(self.mdp.state_lo..=self.mdp.state_hi);
        vec![self.state]
    }

    fn step(&mut self, action: f64) -> Result<(Vec<f64>, f64)> {
        if !action.is_finite() {
            return Err(Error::NonFiniteInput(action));
        }
        let (lo, hi) = self.action_range();
        let (next, reward) = chain_step(&self.mdp, self.state, action.clamp(lo, hi));
        self.state = next;
        Ok((vec![next], reward))
    }

    fn max_steps(&self) -> usize {
        self.max_steps
    }

    fn action_range(&self) -> (f64, f64) {
        let c = &self.mdp.action_centers;
        (c[0], c[c.len() - 1])
    }

    fn rule_base(&self) -> Result<RuleBase> {
        self.mdp.rule_base()
    }
}
