//! Reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use efql_core::envs::{cartpole_step, CartPoleParams, CartPoleState};

pub const RANGES: [(f64, f64); 4] = [(-2.4, 2.4), (-3.0, 3.0), (-0.26, 0.26), (-2.0, 2.0)];
pub const COUNTS: [usize; 4] = [3, 3, 7, 5];

/// Gaussian memberships over evenly spaced centres, written out longhand.
pub fn gauss(lo: f64, hi: f64, count: usize, x: f64) -> Vec<f64> {
    let spacing = (hi - lo) / (count - 1) as f64;
    let sigma = spacing / 2.0;
    let x = x.clamp(lo, hi);
    (0..count)
        .map(|k| {
            let c = lo + spacing * k as f64;
            (-(x - c).powi(2) / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

pub fn state_mu(s: &[f64]) -> Vec<f64> {
    let per: Vec<Vec<f64>> = (0..4).map(|d| gauss(RANGES[d].0, RANGES[d].1, COUNTS[d], s[d])).collect();
    let mut out = Vec::with_capacity(315);
    for a in &per[0] {
        for b in &per[1] {
            for c in &per[2] {
                for d in &per[3] {
                    out.push(a * b * c * d);
                }
            }
        }
    }
    out
}

/// Direct one-step FQL with the fuzzified Bellman target.
pub struct PlainFql {
    pub q: Vec<[f64; 5]>,
    pub alpha: f64,
    pub gamma: f64,
}

impl PlainFql {
    pub fn update(&mut self, s: &[f64], a: f64, r: f64, s_next: &[f64]) {
        let mu_next = state_mu(s_next);
        let total: f64 = mu_next.iter().sum();
        let upsilon: f64 = mu_next
            .iter()
            .zip(&self.q)
            .map(|(m, row)| m / total * row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .sum();
        let mu_s = state_mu(s);
        let mu_a = gauss(-2.0, 2.0, 5, a);
        for (i, row) in self.q.iter_mut().enumerate() {
            for (j, qij) in row.iter_mut().enumerate() {
                let delta = r + self.gamma * upsilon - *qij;
                *qij += self.alpha * mu_s[i] * mu_a[j] * delta;
            }
        }
    }
}

/// A seeded cart-pole transition stream with random forces and random
/// exploration flags, restarting whenever the pole passes 0.5 rad.
pub fn transition_stream(steps: usize, seed: u64) -> Vec<(Vec<f64>, f64, f64, Vec<f64>, bool)> {
    let p = CartPoleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = CartPoleState { theta: 0.03, ..CartPoleState::UPRIGHT };
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let a = rng.gen_range(-2.0..=2.0);
        let (next, r) = cartpole_step(&s, a, &p).unwrap();
        out.push((s.to_vec(), a, r, next.to_vec(), rng.gen_bool(0.2)));
        s = if next.theta.abs() > 0.5 { CartPoleState { theta: -0.02, ..CartPoleState::UPRIGHT } } else { next };
    }
    out
}
