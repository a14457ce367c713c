//! Fuzzy Q(λ)-learning for continuous control.
//!
//! Gaussian fuzzy partitions turn a continuous state/action space into a rule
//! table. The main learner, [`agents::EnhancedFql`], combines fuzzified
//! Bellman backups with clamped eligibility traces and replay of fixed-length
//! transition segments with per-segment trace reconstruction. Two baselines
//! (n-step fuzzy Q-learning and fuzzy SARSA(λ)) share the same rule base.
//!
//! [`oracle`] builds the fuzzified Bellman optimality operator exactly on a
//! small deterministic chain to check contraction and convergence, and
//! [`harness`] runs seeded cart-pole experiments and writes CSV, JSON and
//! SVG artifacts.

pub mod agents;
pub mod credit;
pub mod envs;
pub mod error;
pub mod fuzzy;
pub mod harness;
pub mod matrix;
pub mod oracle;
pub mod replay;

pub use error::{Error, Result};
