//! Brute-force fuzzified Bellman optimality operator on the deterministic
//! chain, used to check contraction, the Banach fixed point and agent
//! convergence numerically.
//!
//! `(T Q)[i][j] = E[r | i, j] + gamma * E[upsilon_Q(s') | i, j]`. On a
//! deterministic MDP the conditional expectations are defined by an
//! [`EvaluationRule`] over rule-centre samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{AgentConfig, EnhancedFql};
use crate::envs::{chain_step, ChainMdp, ChainReward};
use crate::error::{Error, Result};
use crate::fuzzy::{fuzzy_value, FuzzyQTable, RuleBase, WeightVector};
use crate::matrix::RuleMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvaluationRule {
    /// Evaluate each rule pair at its own centres `(c_i, c_j)`.
    #[default]
    CenterSample,
    /// Average over every centre pair `(c_k, c_l)` weighted by the rule
    /// pair's activation `mu_i(c_k) * mu_j(c_l)`. This is the fixed point an
    /// agent reaches when its behaviour cycles through the centre grid.
    ActivationWeighted,
}

#[derive(Debug, Clone)]
struct Sample {
    weight: f64,
    reward: f64,
    next_weights: WeightVector,
}

/// Exactly computable fuzzified optimality operator for a chain MDP.
#[derive(Debug, Clone)]
pub struct FuzzifiedOperator {
    pub mdp: ChainMdp,
    pub rules: RuleBase,
    pub gamma: f64,
    pub evaluation_rule: EvaluationRule,
    samples: Vec<Vec<Sample>>,
}

impl FuzzifiedOperator {
    pub fn new(mdp: ChainMdp, evaluation_rule: EvaluationRule) -> Result<Self> {
        let gamma = mdp.gamma;
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::ParameterOutOfRange { name: "gamma", value: gamma });
        }
        let rules = mdp.rule_base()?;
        let state_centers = rules.state.dims()[0].centers().to_vec();
        let action_centers = rules.action.centers().to_vec();
        let sample_at = |s: f64, a: f64, weight: f64| -> Result<Sample> {
            let (next, reward) = chain_step(&mdp, s, a);
            Ok(Sample {
                weight,
                reward,
                next_weights: rules.weights(&[next])?,
            })
        };
        let mut samples = Vec::with_capacity(state_centers.len() * action_centers.len());
        for &si in &state_centers {
            for &aj in &action_centers {
                let pair = match evaluation_rule {
                    EvaluationRule::CenterSample => vec![sample_at(si, aj, 1.0)?],
                    EvaluationRule::ActivationWeighted => {
                        let mu_s = rules.state_membership(&[si])?;
                        let mu_a = rules.action_membership(aj)?;
                        // activation of rule pair (i, j) at centre (k, l) is mu_i(c_k) mu_j(c_l),
                        // which by symmetry of the Gaussian equals mu_k(c_i) mu_l(c_j)
                        let mut pair = Vec::with_capacity(state_centers.len() * action_centers.len());
                        let mut total = 0.0;
                        for (k, &sk) in state_centers.iter().enumerate() {
                            for (l, &al) in action_centers.iter().enumerate() {
                                let w = mu_s[k] * mu_a[l];
                                total += w;
                                pair.push(sample_at(sk, al, w)?);
                            }
                        }
                        pair.iter_mut().for_each(|p| p.weight /= total);
                        pair
                    }
                };
                samples.push(pair);
            }
        }
        Ok(Self {
            mdp,
            rules,
            gamma,
            evaluation_rule,
            samples,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.rules.shape()
    }

    /// `T q`, as a fresh table.
    pub fn apply(&self, q: &FuzzyQTable) -> Result<FuzzyQTable> {
        q.ensure_shape(self.shape())?;
        let (rows, cols) = self.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for pair in &self.samples {
            let mut value = 0.0;
            for smp in pair {
                value += smp.weight * (smp.reward + self.gamma * fuzzy_value(q, &smp.next_weights)?);
            }
            data.push(value);
        }
        Ok(FuzzyQTable::from_matrix(RuleMatrix::from_vec(rows, cols, data)?))
    }

    /// Bound `r_max / (1 - gamma)` on the fixed point's sup-norm.
    pub fn value_bound(&self) -> f64 {
        self.mdp.reward_bound() / (1.0 - self.gamma)
    }
}

pub fn apply_operator(op: &FuzzifiedOperator, q: &FuzzyQTable) -> Result<FuzzyQTable> {
    op.apply(q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionCheck {
    /// `||T q1 - T q2||_inf`
    pub lhs: f64,
    /// `gamma * ||q1 - q2||_inf`
    pub rhs: f64,
    pub holds: bool,
}

pub fn contraction_check(op: &FuzzifiedOperator, q1: &FuzzyQTable, q2: &FuzzyQTable) -> Result<ContractionCheck> {
    let lhs = op.apply(q1)?.max_abs_diff(&op.apply(q2)?);
    let rhs = op.gamma * q1.max_abs_diff(q2);
    Ok(ContractionCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
    })
}

/// Iterates `q <- T q` from zero until successive iterates differ by less
/// than `tol` in sup-norm. Returns the last iterate and the iteration count.
pub fn fixed_point(op: &FuzzifiedOperator, tol: f64, max_iters: usize) -> Result<(FuzzyQTable, usize)> {
    if !(tol > 0.0) {
        return Err(Error::ParameterOutOfRange { name: "tol", value: tol });
    }
    let (rows, cols) = op.shape();
    let mut q = FuzzyQTable::zeros(rows, cols);
    for iter in 1..=max_iters {
        let next = op.apply(&q)?;
        let residual = next.max_abs_diff(&q);
        q = next;
        if residual < tol {
            return Ok((q, iter));
        }
    }
    Err(Error::NoConvergence(max_iters))
}

/// Upper bound on [`fixed_point`] iterations given the first residual.
pub fn iteration_bound(gamma: f64, tol: f64, initial_residual: f64) -> usize {
    if initial_residual < tol {
        return 1;
    }
    ((tol / initial_residual).ln() / gamma.ln()).ceil() as usize + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    /// `||Q_agent - q*||_inf` after the final step.
    pub gap: f64,
    /// Gap sampled every `sample_every` steps.
    pub gaps: Vec<f64>,
    pub q_star_norm: f64,
}

/// Drives Enhanced-FQL on the chain with a behaviour policy cycling through
/// every rule-centre (state, action) pair, λ = 0 and replay off, and tracks the
/// sup-norm gap to the operator's fixed point.
pub fn agent_vs_oracle(
    cfg: &AgentConfig,
    op: &FuzzifiedOperator,
    steps: usize,
    sample_every: usize,
) -> Result<OracleRun> {
    let (q_star, _) = fixed_point(op, 1e-13, 100_000)?;
    let cfg = AgentConfig {
        gamma: op.gamma,
        lambda: 0.0,
        replay_enabled: false,
        ..cfg.clone()
    };
    let mut agent = EnhancedFql::new(op.rules.clone(), cfg, 0)?;
    let state_centers = op.rules.state.dims()[0].centers().to_vec();
    let action_centers = op.rules.action.centers().to_vec();
    let pairs: Vec<(f64, f64)> = state_centers
        .iter()
        .flat_map(|&s| action_centers.iter().map(move |&a| (s, a)))
        .collect();
    let mut gaps = Vec::new();
    for t in 0..steps {
        let (s, a) = pairs[t % pairs.len()];
        let (next, r) = chain_step(&op.mdp, s, a);
        agent.step(&[s], a, r, &[next], false)?;
        if sample_every > 0 && (t + 1) % sample_every == 0 {
            gaps.push(agent.core.q.max_abs_diff(&q_star));
        }
    }
    Ok(OracleRun {
        gap: agent.core.q.max_abs_diff(&q_star),
        gaps,
        q_star_norm: q_star.max_abs(),
    })
}

/// Outcome of one property in [`verification_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_table<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> FuzzyQTable {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..=scale)).collect();
    FuzzyQTable::from_matrix(RuleMatrix::from_vec(rows, cols, data).expect("sizes agree"))
}

/// Step-size schedule used for the agent convergence property.
pub const AGENT_ALPHA0: f64 = 0.5;
pub const AGENT_TAU: f64 = 5_000.0;
pub const AGENT_STEPS: usize = 100_000;

/// Numerical checks of the operator's contraction and fixed-point
/// properties on the chain fixtures, plus agent convergence toward `q*`.
/// `tol` is the fixed-point stopping tolerance.
pub fn verification_suite(tol: f64, seed: u64) -> Result<Vec<PropertyResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let chain = FuzzifiedOperator::new(ChainMdp::fixture(0.9), EvaluationRule::CenterSample)?;
    let (rows, cols) = chain.shape();

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let q1 = random_table(&mut rng, rows, cols, 10.0);
        let q2 = random_table(&mut rng, rows, cols, 10.0);
        let c = contraction_check(&chain, &q1, &q2)?;
        worst = worst.max(c.lhs - c.rhs);
    }
    out.push(PropertyResult {
        name: "contraction over 100 random pairs",
        passed: worst <= 1e-12,
        detail: format!("max(lhs - rhs) = {worst:.3e}"),
    });

    let q1 = random_table(&mut rng, rows, cols, 10.0);
    let shift = 2.5;
    let q2 = FuzzyQTable::from_matrix(RuleMatrix::from_vec(
        rows,
        cols,
        q1.as_slice().iter().map(|x| x + shift).collect(),
    )?);
    let (t1, t2) = (chain.apply(&q1)?, chain.apply(&q2)?);
    let shift_err = t1
        .as_slice()
        .iter()
        .zip(t2.as_slice())
        .map(|(a, b)| (b - a - chain.gamma * shift).abs())
        .fold(0.0, f64::max);
    out.push(PropertyResult {
        name: "constant shift moves T Q by exactly gamma * c",
        passed: shift_err <= 1e-12,
        detail: format!("max deviation {shift_err:.3e}"),
    });

    let mut monotone = true;
    for _ in 0..100 {
        let lo = random_table(&mut rng, rows, cols, 10.0);
        let bump = random_table(&mut rng, rows, cols, 1.0);
        let hi_data = lo.as_slice().iter().zip(bump.as_slice()).map(|(a, b)| a + b.abs()).collect();
        let hi = FuzzyQTable::from_matrix(RuleMatrix::from_vec(rows, cols, hi_data)?);
        let (tl, th) = (chain.apply(&lo)?, chain.apply(&hi)?);
        monotone &= tl.as_slice().iter().zip(th.as_slice()).all(|(a, b)| a <= b);
    }
    out.push(PropertyResult {
        name: "operator is monotone",
        passed: monotone,
        detail: "100 ordered pairs".into(),
    });

    // Unit first residual and gamma = 1/2: stopping at residual < tol leaves
    // the iterate within tol of r / (1 - gamma).
    let half = FuzzifiedOperator::new(
        ChainMdp::fixture(0.5).with_reward(ChainReward::Constant(-1.0)),
        EvaluationRule::CenterSample,
    )?;
    let r0 = half.apply(&FuzzyQTable::zeros(rows, cols))?.max_abs();
    let bound = iteration_bound(0.5, tol, r0);
    let (q, iters) = fixed_point(&half, tol, 10 * bound)?;
    let err = q.as_slice().iter().map(|x| (x + 2.0).abs()).fold(0.0, f64::max);
    out.push(PropertyResult {
        name: "Banach iteration reaches r/(1-gamma) within the log bound",
        passed: err < tol && iters <= bound,
        detail: format!("error {err:.3e}, {iters} iterations (bound {bound})"),
    });

    let constant = FuzzifiedOperator::new(
        ChainMdp::fixture(0.9).with_reward(ChainReward::Constant(-1.0)),
        EvaluationRule::CenterSample,
    )?;
    let bound = iteration_bound(0.9, tol, 1.0);
    let (q, iters) = fixed_point(&constant, tol, 10 * bound)?;
    let err = q.as_slice().iter().map(|x| (x + 10.0).abs()).fold(0.0, f64::max);
    let posterior = 0.9 / 0.1 * tol;
    out.push(PropertyResult {
        name: "gamma = 0.9 iterate within gamma/(1-gamma) * tol of r/(1-gamma)",
        passed: err < posterior && iters <= bound,
        detail: format!("error {err:.3e} (bound {posterior:.1e}), {iters} iterations (bound {bound})"),
    });

    let (q_star, _) = fixed_point(&chain, tol, 100_000)?;
    let residual = chain.apply(&q_star)?.max_abs_diff(&q_star);
    out.push(PropertyResult {
        name: "fixed-point residual below tol",
        passed: residual < tol,
        detail: format!("residual {residual:.3e}"),
    });
    let norm = q_star.max_abs();
    out.push(PropertyResult {
        name: "fixed point bounded by r_max/(1-gamma)",
        passed: norm <= chain.value_bound() + tol,
        detail: format!("|q*| = {norm:.6}, bound {:.6}", chain.value_bound()),
    });

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let q1 = random_table(&mut rng, rows, cols, 10.0);
        let q2 = random_table(&mut rng, rows, cols, 10.0);
        let w = chain.rules.weights(&[rng.gen_range(-1.0..=1.0)])?;
        let gap = (fuzzy_value(&q1, &w)? - fuzzy_value(&q2, &w)?).abs();
        worst = worst.max(gap - q1.max_abs_diff(&q2));
    }
    out.push(PropertyResult {
        name: "fuzzy state value is non-expansive",
        passed: worst <= 1e-12,
        detail: format!("max(|dV| - |dQ|) = {worst:.3e}"),
    });

    let cfg = AgentConfig {
        alpha: AGENT_ALPHA0,
        alpha_decay_tau: Some(AGENT_TAU),
        ..AgentConfig::default()
    };
    let run = agent_vs_oracle(&cfg, &constant, AGENT_STEPS, 1_000)?;
    out.push(PropertyResult {
        name: "agent reaches 5% of |q*| in 1e5 steps",
        passed: run.gap < 0.05 * run.q_star_norm,
        detail: format!("gap {:.4e}, |q*| = {:.4}", run.gap, run.q_star_norm),
    });
    let pairs = run.gaps.len().saturating_sub(1);
    let down = run.gaps.windows(2).filter(|w| w[1] <= w[0]).count();
    out.push(PropertyResult {
        name: "agent gap non-increasing in 90% of samples",
        passed: pairs > 0 && down as f64 >= 0.9 * pairs as f64,
        detail: format!("{down}/{pairs} non-increasing"),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(reward: ChainReward, gamma: f64) -> FuzzifiedOperator {
        FuzzifiedOperator::new(ChainMdp::fixture(gamma).with_reward(reward), EvaluationRule::CenterSample).unwrap()
    }

    #[test]
    fn zero_reward_fixed_point_is_zero() {
        let op = op(ChainReward::Constant(0.0), 0.9);
        let q = FuzzyQTable::zeros(5, 5);
        assert_eq!(op.apply(&q).unwrap(), q);
    }

    #[test]
    fn constant_reward_one_application() {
        let op = op(ChainReward::Constant(-1.5), 0.9);
        let tq = op.apply(&FuzzyQTable::zeros(5, 5)).unwrap();
        assert!(tq.as_slice().iter().all(|x| *x == -1.5));
    }

    #[test]
    fn constant_reward_fixed_point_closed_form() {
        let op = op(ChainReward::Constant(-1.0), 0.9);
        let (q, iters) = fixed_point(&op, 1e-10, 10_000).unwrap();
        assert!(q.as_slice().iter().all(|x| (x + 10.0).abs() < 1e-8));
        assert!(iters <= iteration_bound(0.9, 1e-10, 1.0));
    }

    #[test]
    fn huge_tolerance_returns_after_one_iteration() {
        let op = op(ChainReward::NegSquare, 0.9);
        assert_eq!(fixed_point(&op, 1e6, 10).unwrap().1, 1);
    }

    #[test]
    fn half_discount_iteration_bound() {
        assert_eq!(iteration_bound(0.5, 1e-8, 1.0), 28);
        let op = op(ChainReward::Constant(1.0), 0.5);
        let (_, iters) = fixed_point(&op, 1e-8, 1000).unwrap();
        assert!(iters <= 28, "{iters}");
    }

    #[test]
    fn rejects_non_contracting_discount() {
        assert!(FuzzifiedOperator::new(ChainMdp::fixture(1.0), EvaluationRule::CenterSample).is_err());
        assert!(FuzzifiedOperator::new(ChainMdp::fixture(0.0), EvaluationRule::CenterSample).is_err());
    }

    #[test]
    fn no_convergence_is_reported() {
        let op = op(ChainReward::NegSquare, 0.99);
        assert_eq!(fixed_point(&op, 1e-12, 3).unwrap_err(), Error::NoConvergence(3));
    }

    #[test]
    fn constant_shift_is_the_tight_case() {
        let op = op(ChainReward::NegSquare, 0.9);
        let q1 = FuzzyQTable::from_matrix(
            RuleMatrix::from_vec(5, 5, (0..25).map(|k| (k as f64 * 0.37).sin()).collect()).unwrap(),
        );
        let shifted: Vec<f64> = q1.as_slice().iter().map(|x| x + 2.0).collect();
        let q2 = FuzzyQTable::from_matrix(RuleMatrix::from_vec(5, 5, shifted).unwrap());
        let check = contraction_check(&op, &q1, &q2).unwrap();
        assert!((check.lhs - 1.8).abs() < 1e-12);
        assert!((check.rhs - 1.8).abs() < 1e-12);
        assert!(check.holds);
        let same = contraction_check(&op, &q1, &q1).unwrap();
        assert_eq!((same.lhs, same.rhs), (0.0, 0.0));
    }

    #[test]
    fn activation_weighted_fixed_point_within_reward_bound() {
        let op = FuzzifiedOperator::new(ChainMdp::fixture(0.9), EvaluationRule::ActivationWeighted).unwrap();
        let (q, _) = fixed_point(&op, 1e-10, 10_000).unwrap();
        assert!(q.max_abs() <= op.value_bound());
        assert!(q.as_slice().iter().all(|x| *x <= 0.0));
    }

    #[test]
    fn zero_reward_agent_gap_stays_zero() {
        let op = op(ChainReward::Constant(0.0), 0.9);
        let cfg = AgentConfig {
            alpha: 0.5,
            alpha_decay_tau: Some(1000.0),
            ..Default::default()
        };
        let run = agent_vs_oracle(&cfg, &op, 500, 25).unwrap();
        assert_eq!(run.gap, 0.0);
        assert!(run.gaps.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn suite_passes() {
        for p in verification_suite(1e-8, 7).unwrap() {
            assert!(p.passed, "{}: {}", p.name, p.detail);
        }
    }
}
