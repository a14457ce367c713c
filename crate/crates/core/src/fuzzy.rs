//! Gaussian fuzzy partitions, the fuzzy Q-table and the fuzzified value
//! computations shared by every agent.
//!
//! State rules are formed by the product t-norm over per-dimension Gaussian
//! sets. Joint rule indices are row-major over the per-dimension multi-index,
//! so the last dimension varies fastest.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::matrix::RuleMatrix;

/// Gaussian fuzzy sets covering one continuous dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionPartition {
    centers: Vec<f64>,
    sigma: f64,
    range_lo: f64,
    range_hi: f64,
}

impl DimensionPartition {
    pub fn new(centers: Vec<f64>, sigma: f64, range_lo: f64, range_hi: f64) -> Result<Self> {
        if centers.len() < 2 {
            return Err(Error::InvalidPartition(format!(
                "need at least 2 centers, got {}",
                centers.len()
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidPartition(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !(range_lo < range_hi) {
            return Err(Error::InvalidPartition(format!(
                "empty range [{range_lo}, {range_hi}]"
            )));
        }
        if centers.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidPartition(
                "centers must be strictly increasing".into(),
            ));
        }
        if centers.iter().any(|c| *c < range_lo || *c > range_hi) {
            return Err(Error::InvalidPartition(
                "centers must lie inside the range".into(),
            ));
        }
        Ok(Self {
            centers,
            sigma,
            range_lo,
            range_hi,
        })
    }

    /// `count` centers evenly spaced over `[lo, hi]`, endpoints included, with
    /// sigma equal to half the spacing.
    pub fn evenly_spaced(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidPartition(format!(
                "need at least 2 sets per dimension, got {count}"
            )));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidPartition(format!("empty range [{lo}, {hi}]")));
        }
        let spacing = (hi - lo) / (count - 1) as f64;
        let centers = (0..count)
            .map(|k| if k == count - 1 { hi } else { lo + spacing * k as f64 })
            .collect();
        Self::new(centers, spacing / 2.0, lo, hi)
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn range(&self) -> (f64, f64) {
        (self.range_lo, self.range_hi)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.range_lo, self.range_hi)
    }

    fn membership_into(&self, x: f64, out: &mut Vec<f64>) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFiniteInput(x));
        }
        let x = self.clamp(x);
        let denom = 2.0 * self.sigma * self.sigma;
        out.clear();
        out.extend(self.centers.iter().map(|c| {
            let d = x - c;
            (-(d * d) / denom).exp()
        }));
        Ok(())
    }
}

/// Gaussian membership degrees of `x` (clamped to the partition range).
pub fn membership_1d(part: &DimensionPartition, x: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(part.len());
    part.membership_into(x, &mut out)?;
    Ok(out)
}

/// Product-t-norm partition of a multi-dimensional state space.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePartition {
    dims: Vec<DimensionPartition>,
    rule_count: usize,
}

impl StatePartition {
    pub fn new(dims: Vec<DimensionPartition>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidPartition("no state dimensions".into()));
        }
        let rule_count = dims.iter().map(DimensionPartition::len).product();
        Ok(Self { dims, rule_count })
    }

    pub fn dims(&self) -> &[DimensionPartition] {
        &self.dims
    }

    pub fn dimension_count(&self) -> usize {
        self.dims.len()
    }

    pub fn rule_count(&self) -> usize {
        self.rule_count
    }

    /// Per-dimension set index of a joint rule.
    pub fn multi_index(&self, rule: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        let mut r = rule;
        for (d, part) in self.dims.iter().enumerate().rev() {
            idx[d] = r % part.len();
            r /= part.len();
        }
        idx
    }

    /// Center of a joint rule, one coordinate per dimension.
    pub fn rule_center(&self, rule: usize) -> Vec<f64> {
        self.multi_index(rule)
            .into_iter()
            .zip(&self.dims)
            .map(|(k, part)| part.centers[k])
            .collect()
    }
}

/// Evenly spaced state partition, one `(lo, hi)` range and set count per dimension.
pub fn build_state_partition(ranges: &[(f64, f64)], counts: &[usize]) -> Result<StatePartition> {
    if ranges.len() != counts.len() {
        return Err(Error::InvalidPartition(format!(
            "{} ranges but {} counts",
            ranges.len(),
            counts.len()
        )));
    }
    let dims = ranges
        .iter()
        .zip(counts)
        .map(|(&(lo, hi), &n)| DimensionPartition::evenly_spaced(lo, hi, n))
        .collect::<Result<Vec<_>>>()?;
    StatePartition::new(dims)
}

/// Joint rule memberships, `mu[i] = prod_d mu_d(s[d])[i_d]` in row-major order.
pub fn joint_state_membership(sp: &StatePartition, s: &[f64]) -> Result<Vec<f64>> {
    if s.len() != sp.dims.len() {
        return Err(Error::DimensionMismatch {
            expected: sp.dims.len(),
            got: s.len(),
        });
    }
    let mut joint = Vec::with_capacity(sp.rule_count);
    joint.push(1.0);
    let mut per_dim = Vec::new();
    let mut next = Vec::with_capacity(sp.rule_count);
    for (part, &x) in sp.dims.iter().zip(s) {
        part.membership_into(x, &mut per_dim)?;
        next.clear();
        for &prefix in &joint {
            next.extend(per_dim.iter().map(|m| prefix * m));
        }
        std::mem::swap(&mut joint, &mut next);
    }
    Ok(joint)
}

/// Normalized rule weights: non-negative and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn normalize_weights(mu: &[f64]) -> Result<WeightVector> {
    if let Some(&bad) = mu.iter().find(|m| !m.is_finite() || **m < 0.0) {
        return Err(Error::NonFiniteInput(bad));
    }
    let total: f64 = mu.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateMembership);
    }
    Ok(WeightVector(mu.iter().map(|m| m / total).collect()))
}

/// One-dimensional Gaussian partition of the action space.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionPartition(DimensionPartition);

impl ActionPartition {
    pub fn new(centers: Vec<f64>, sigma: f64, range_lo: f64, range_hi: f64) -> Result<Self> {
        DimensionPartition::new(centers, sigma, range_lo, range_hi).map(Self)
    }

    pub fn evenly_spaced(lo: f64, hi: f64, count: usize) -> Result<Self> {
        DimensionPartition::evenly_spaced(lo, hi, count).map(Self)
    }

    pub fn action_count(&self) -> usize {
        self.0.len()
    }
}

impl Deref for ActionPartition {
    type Target = DimensionPartition;

    fn deref(&self) -> &DimensionPartition {
        &self.0
    }
}

pub fn action_membership(ap: &ActionPartition, a: f64) -> Result<Vec<f64>> {
    membership_1d(&ap.0, a)
}

/// State and action partitions of one rule base.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleBase {
    pub state: StatePartition,
    pub action: ActionPartition,
}

impl RuleBase {
    pub fn new(state: StatePartition, action: ActionPartition) -> Self {
        Self { state, action }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.state.rule_count(), self.action.action_count())
    }

    pub fn state_membership(&self, s: &[f64]) -> Result<Vec<f64>> {
        joint_state_membership(&self.state, s)
    }

    pub fn weights(&self, s: &[f64]) -> Result<WeightVector> {
        normalize_weights(&self.state_membership(s)?)
    }

    pub fn action_membership(&self, a: f64) -> Result<Vec<f64>> {
        action_membership(&self.action, a)
    }
}

/// Rule-pair value table, one row per joint state rule and one column per action set.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyQTable(RuleMatrix);

impl FuzzyQTable {
    pub fn zeros(rules: usize, actions: usize) -> Self {
        Self(RuleMatrix::zeros(rules, actions))
    }

    pub fn filled(rules: usize, actions: usize, value: f64) -> Self {
        Self(RuleMatrix::filled(rules, actions, value))
    }

    pub fn from_matrix(m: RuleMatrix) -> Self {
        Self(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        RuleMatrix::from_rows(rows).map(Self)
    }

    pub fn matrix(&self) -> &RuleMatrix {
        &self.0
    }

    pub fn matrix_mut(&mut self) -> &mut RuleMatrix {
        &mut self.0
    }

    pub fn into_matrix(self) -> RuleMatrix {
        self.0
    }

    pub fn row_max(&self, rule: usize) -> f64 {
        self.0
            .row(rule)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn row_maxima(&self) -> Vec<f64> {
        (0..self.0.rows()).map(|i| self.row_max(i)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.0.as_slice().iter().all(|x| x.is_finite())
    }

    /// Sup-norm distance between two tables.
    pub fn max_abs_diff(&self, other: &FuzzyQTable) -> f64 {
        self.0.max_abs_diff(&other.0)
    }
}

impl Deref for FuzzyQTable {
    type Target = RuleMatrix;

    fn deref(&self) -> &RuleMatrix {
        &self.0
    }
}

fn check_rules(q: &FuzzyQTable, len: usize) -> Result<()> {
    if q.rows() != len {
        return Err(Error::DimensionMismatch {
            expected: q.rows(),
            got: len,
        });
    }
    Ok(())
}

/// Fuzzified state value: `sum_i w_i * max_j Q[i][j]`.
pub fn fuzzy_value(q: &FuzzyQTable, w: &WeightVector) -> Result<f64> {
    check_rules(q, w.len())?;
    Ok(w.iter()
        .enumerate()
        .map(|(i, wi)| wi * q.row_max(i))
        .sum())
}

/// On-policy value `sum_i w_i sum_j v_j Q[i][j]` with normalized action weights `v`.
pub fn on_policy_value(q: &FuzzyQTable, w: &WeightVector, v: &WeightVector) -> Result<f64> {
    check_rules(q, w.len())?;
    if v.len() != q.cols() {
        return Err(Error::DimensionMismatch {
            expected: q.cols(),
            got: v.len(),
        });
    }
    Ok(w.iter()
        .enumerate()
        .map(|(i, wi)| {
            let row: f64 = q.row(i).iter().zip(v.iter()).map(|(qij, vj)| qij * vj).sum();
            wi * row
        })
        .sum())
}

/// TD error for every rule pair: `r + gamma * upsilon_next - Q[i][j]`.
pub fn td_error_matrix(q: &FuzzyQTable, r: f64, upsilon_next: f64, gamma: f64) -> RuleMatrix {
    let mut out = RuleMatrix::zeros(q.rows(), q.cols());
    td_error_into(q, r + gamma * upsilon_next, &mut out);
    out
}

/// Writes `target - Q[i][j]` into `out`, which must share the table's shape.
pub(crate) fn td_error_into(q: &FuzzyQTable, target: f64, out: &mut RuleMatrix) {
    debug_assert_eq!(q.shape(), out.shape());
    for (d, qij) in out.as_mut_slice().iter_mut().zip(q.as_slice()) {
        *d = target - qij;
    }
}

/// Greedy action set per rule; ties go to the lowest index.
pub fn greedy_indices(q: &FuzzyQTable) -> Vec<usize> {
    (0..q.rows())
        .map(|i| {
            let row = q.row(i);
            let mut best = 0;
            for (j, v) in row.iter().enumerate().skip(1) {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// SoftMax distribution over rules.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution {
    probs: Vec<f64>,
    temperature: f64,
}

impl PolicyDistribution {
    pub fn from_probs(probs: Vec<f64>, temperature: f64) -> Self {
        Self { probs, temperature }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
}

/// SoftMax of arbitrary arguments at temperature `beta`, with max-subtraction.
pub fn softmax(args: &[f64], beta: f64) -> Result<PolicyDistribution> {
    if !(beta > 0.0) {
        return Err(Error::InvalidTemperature(beta));
    }
    let peak = args.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = args.iter().map(|x| ((x - peak) / beta).exp()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(PolicyDistribution {
        probs,
        temperature: beta,
    })
}

/// `p_i ∝ exp(w_i * max_j Q[i][j] / beta)`.
pub fn policy_distribution(
    q: &FuzzyQTable,
    w: &WeightVector,
    beta: f64,
) -> Result<PolicyDistribution> {
    check_rules(q, w.len())?;
    let args: Vec<f64> = w
        .iter()
        .enumerate()
        .map(|(i, wi)| wi * q.row_max(i))
        .collect();
    softmax(&args, beta)
}

/// `p_i ∝ w_i * exp(max_j Q[i][j] / beta)`: SoftMax over rule maxima restricted
/// to the rules active in the current state.
pub fn activation_softmax(
    q: &FuzzyQTable,
    w: &WeightVector,
    beta: f64,
) -> Result<PolicyDistribution> {
    check_rules(q, w.len())?;
    if !(beta > 0.0) {
        return Err(Error::InvalidTemperature(beta));
    }
    let maxima = q.row_maxima();
    let peak = w
        .iter()
        .zip(&maxima)
        .filter(|(wi, _)| **wi > 0.0)
        .map(|(_, m)| *m)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = w
        .iter()
        .zip(&maxima)
        .map(|(wi, m)| if *wi > 0.0 { wi * ((m - peak) / beta).exp() } else { 0.0 })
        .collect();
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateMembership);
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(PolicyDistribution::from_probs(probs, beta))
}

/// Crisp action `sum_i p_i * c[jstar[i]]`.
pub fn defuzzify_action(p: &PolicyDistribution, ap: &ActionPartition, jstar: &[usize]) -> f64 {
    debug_assert_eq!(p.probs.len(), jstar.len());
    let centers = ap.centers();
    p.probs
        .iter()
        .zip(jstar)
        .map(|(pi, &j)| pi * centers[j])
        .sum()
}
