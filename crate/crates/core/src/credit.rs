//! Fuzzified eligibility traces and the trace-weighted Q-table update.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::fuzzy::FuzzyQTable;
use crate::matrix::RuleMatrix;

/// Outer product of a state membership vector and an action membership vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix(RuleMatrix);

impl ActivationMatrix {
    pub fn matrix(&self) -> &RuleMatrix {
        &self.0
    }
}

impl Deref for ActivationMatrix {
    type Target = RuleMatrix;

    fn deref(&self) -> &RuleMatrix {
        &self.0
    }
}

fn check_unit(v: &[f64]) -> Result<()> {
    match v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        Some(&bad) => Err(Error::ParameterOutOfRange {
            name: "membership",
            value: bad,
        }),
        None => Ok(()),
    }
}

/// `zeta[i][j] = mu_s[i] * mu_a[j]`.
pub fn activation(mu_s: &[f64], mu_a: &[f64]) -> Result<ActivationMatrix> {
    check_unit(mu_s)?;
    check_unit(mu_a)?;
    let mut data = Vec::with_capacity(mu_s.len() * mu_a.len());
    for s in mu_s {
        data.extend(mu_a.iter().map(|a| s * a));
    }
    RuleMatrix::from_vec(mu_s.len(), mu_a.len(), data).map(ActivationMatrix)
}

/// Per rule-pair eligibility, kept inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EligibilityMatrix(RuleMatrix);

impl EligibilityMatrix {
    pub fn zeros(rules: usize, actions: usize) -> Self {
        Self(RuleMatrix::zeros(rules, actions))
    }

    pub fn matrix(&self) -> &RuleMatrix {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.as_slice().iter().all(|e| *e == 0.0)
    }
}

impl Deref for EligibilityMatrix {
    type Target = RuleMatrix;

    fn deref(&self) -> &RuleMatrix {
        &self.0
    }
}

pub(crate) fn check_rate(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange { name, value })
    }
}

/// `E[i][j] <- min(gamma * lambda * E[i][j] + zeta[i][j], 1)`, in place.
pub fn update_traces(
    e: &mut EligibilityMatrix,
    zeta: &ActivationMatrix,
    gamma: f64,
    lambda: f64,
) -> Result<()> {
    check_rate("gamma", gamma)?;
    check_rate("lambda", lambda)?;
    zeta.ensure_shape(e.shape())?;
    let decay = gamma * lambda;
    for (eij, zij) in e.0.as_mut_slice().iter_mut().zip(zeta.as_slice()) {
        *eij = f64::min(decay * *eij + zij, 1.0);
    }
    Ok(())
}

/// Watkins reset: zero every trace.
pub fn reset_traces(e: &mut EligibilityMatrix) {
    e.0.fill(0.0);
}

/// `Q[i][j] += alpha * E[i][j] * delta[i][j]`, in place.
pub fn apply_update(
    q: &mut FuzzyQTable,
    alpha: f64,
    e: &EligibilityMatrix,
    delta: &RuleMatrix,
) -> Result<()> {
    if !(alpha > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "alpha",
            value: alpha,
        });
    }
    e.ensure_shape(q.shape())?;
    delta.ensure_shape(q.shape())?;
    scaled_add(q, alpha, e.as_slice(), delta.as_slice())
}

/// `Q += scale * weights ⊙ delta`, failing on the first non-finite entry.
pub(crate) fn scaled_add(
    q: &mut FuzzyQTable,
    scale: f64,
    weights: &[f64],
    delta: &[f64],
) -> Result<()> {
    let cols = q.cols();
    let data = q.matrix_mut().as_mut_slice();
    for (k, ((qij, wij), dij)) in data.iter_mut().zip(weights).zip(delta).enumerate() {
        *qij += scale * wij * dij;
        if !qij.is_finite() {
            return Err(Error::NonFiniteUpdate {
                rule: k / cols,
                action: k % cols,
            });
        }
    }
    Ok(())
}
