//! Segment replay buffer and batch replay with per-segment trace reconstruction.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;

use crate::credit::check_rate;
use crate::error::{Error, Result};
use crate::fuzzy::{FuzzyQTable, RuleBase};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: f64,
    pub r: f64,
    pub s_next: Vec<f64>,
}

impl Transition {
    pub fn new(s: Vec<f64>, a: f64, r: f64, s_next: Vec<f64>) -> Self {
        Self { s, a, r, s_next }
    }

    fn check_finite(&self) -> Result<()> {
        let bad = self
            .s
            .iter()
            .chain(&self.s_next)
            .chain([&self.a, &self.r])
            .find(|x| !x.is_finite());
        match bad {
            Some(&x) => Err(Error::NonFiniteInput(x)),
            None => Ok(()),
        }
    }
}

/// Exactly `L` temporally contiguous transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    transitions: Vec<Transition>,
}

impl Segment {
    /// Checks contiguity: each transition starts where the previous one ended.
    pub fn new(transitions: Vec<Transition>) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::InsufficientData {
                needed: 1,
                available: 0,
            });
        }
        if transitions.windows(2).any(|w| w[0].s_next != w[1].s) {
            return Err(Error::ContiguityViolation);
        }
        Ok(Self { transitions })
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Bounded FIFO of sealed segments plus the segment currently being filled.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    segment_length: usize,
    capacity: usize,
    segments: VecDeque<Segment>,
    open: Vec<Transition>,
}

impl ReplayBuffer {
    pub fn new(segment_length: usize, capacity: usize) -> Result<Self> {
        if segment_length == 0 || capacity == 0 {
            return Err(Error::ParameterOutOfRange {
                name: if segment_length == 0 {
                    "segment_length"
                } else {
                    "buffer_capacity"
                },
                value: 0.0,
            });
        }
        Ok(Self {
            segment_length,
            capacity,
            segments: VecDeque::with_capacity(capacity),
            open: Vec::with_capacity(segment_length),
        })
    }

    pub fn segment_length(&self) -> usize {
        self.segment_length
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of sealed segments.
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn open_len(&self) -> usize {
        self.open.len()
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter()
    }

    pub fn record(&mut self, t: Transition) -> Result<()> {
        t.check_finite()?;
        if let Some(last) = self.open.last() {
            if last.s_next != t.s {
                return Err(Error::ContiguityViolation);
            }
        }
        self.open.push(t);
        if self.open.len() == self.segment_length {
            let sealed = std::mem::replace(&mut self.open, Vec::with_capacity(self.segment_length));
            self.push_segment(Segment { transitions: sealed });
        }
        Ok(())
    }

    fn push_segment(&mut self, segment: Segment) {
        debug_assert!(segment.transitions.windows(2).all(|w| w[0].s_next == w[1].s));
        if self.segments.len() == self.capacity {
            self.segments.pop_front();
        }
        self.segments.push_back(segment);
    }

    /// Drops the partially filled segment (episode boundary).
    pub fn flush_open(&mut self) {
        self.open.clear();
    }

    /// `count` distinct segments drawn uniformly at random.
    pub fn sample_segments<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<&Segment>> {
        if count == 0 || self.segments.len() < count {
            return Err(Error::InsufficientData {
                needed: count.max(1),
                available: self.segments.len(),
            });
        }
        Ok(index::sample(rng, self.segments.len(), count)
            .into_iter()
            .map(|k| &self.segments[k])
            .collect())
    }

    /// One transition per line: state components, action, reward, next-state
    /// components, space separated. Sealed segments only, oldest first.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in self.segments.iter().flat_map(|seg| &seg.transitions) {
            let fields: Vec<String> = t
                .s
                .iter()
                .chain([&t.a, &t.r])
                .chain(&t.s_next)
                .map(|x| format!("{x:e}"))
                .collect();
            let _ = writeln!(out, "{}", fields.join(" "));
        }
        out
    }

    /// Rebuilds a buffer from [`ReplayBuffer::to_text`] output.
    pub fn from_text(text: &str, segment_length: usize, capacity: usize) -> Result<Self> {
        let mut buf = Self::new(segment_length, capacity)?;
        let mut pending = Vec::with_capacity(segment_length);
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let values = line
                .split_whitespace()
                .map(|f| f.parse::<f64>().map_err(|_| Error::NonFiniteInput(f64::NAN)))
                .collect::<Result<Vec<f64>>>()?;
            if values.len() < 4 || values.len() % 2 != 0 {
                return Err(Error::DimensionMismatch {
                    expected: 4,
                    got: values.len(),
                });
            }
            let dim = (values.len() - 2) / 2;
            let t = Transition::new(
                values[..dim].to_vec(),
                values[dim],
                values[dim + 1],
                values[dim + 2..].to_vec(),
            );
            t.check_finite()?;
            pending.push(t);
            if pending.len() == segment_length {
                let seg = Segment::new(std::mem::take(&mut pending))?;
                buf.push_segment(seg);
            }
        }
        Ok(buf)
    }
}

/// Learning rates used by a replay batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub batch_size: usize,
}

/// Adds `sum_l delta_l ⊙ E_l` for one segment into `acc`, reading values from
/// the frozen table. Returns the summed `|delta|` over every entry and step.
fn accumulate_segment(
    frozen: &FuzzyQTable,
    row_max: &[f64],
    segment: &Segment,
    rules: &RuleBase,
    gamma: f64,
    lambda: f64,
    acc: &mut [f64],
) -> Result<f64> {
    // Fused form of trace update, TD error and accumulation; the frozen
    // table's row maxima are shared across the whole batch.
    let cols = frozen.cols();
    let q = frozen.as_slice();
    let decay = gamma * lambda;
    let mut traces = vec![0.0; q.len()];
    let mut abs_sum = 0.0;
    for t in &segment.transitions {
        let mu_s = rules.state_membership(&t.s)?;
        let mu_a = rules.action_membership(t.a)?;
        let w = rules.weights(&t.s_next)?;
        let upsilon: f64 = w.iter().zip(row_max).map(|(wi, m)| wi * m).sum();
        let target = t.r + gamma * upsilon;
        for (i, ms) in mu_s.iter().enumerate() {
            let k0 = i * cols;
            for (j, ma) in mu_a.iter().enumerate() {
                let k = k0 + j;
                let e = f64::min(decay * traces[k] + ms * ma, 1.0);
                traces[k] = e;
                let d = target - q[k];
                acc[k] += d * e;
                abs_sum += d.abs();
            }
        }
    }
    Ok(abs_sum)
}

/// Replays `batch_size` sampled segments against the table frozen at batch
/// start, then applies `Q += (alpha / B) * sum_b sum_l delta ⊙ E` once.
///
/// Returns the mean `|delta|` over all entries, steps and segments.
pub fn replay_batch<R: Rng + ?Sized>(
    q: &mut FuzzyQTable,
    buf: &ReplayBuffer,
    cfg: &ReplayConfig,
    rules: &RuleBase,
    rng: &mut R,
) -> Result<f64> {
    let batch = buf.sample_segments(cfg.batch_size, rng)?;
    replay_segments(q, &batch, cfg, rules)
}

/// [`replay_batch`] on an explicit list of segments.
pub fn replay_segments(
    q: &mut FuzzyQTable,
    batch: &[&Segment],
    cfg: &ReplayConfig,
    rules: &RuleBase,
) -> Result<f64> {
    check_rate("gamma", cfg.gamma)?;
    check_rate("lambda", cfg.lambda)?;
    if !(cfg.alpha > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "alpha",
            value: cfg.alpha,
        });
    }
    if batch.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    q.ensure_shape(rules.shape())?;
    let frozen = q.clone();
    let mut acc = vec![0.0; frozen.rows() * frozen.cols()];
    let mut abs_sum = 0.0;
    let mut steps = 0usize;
    let row_max: Vec<f64> = (0..frozen.rows()).map(|i| frozen.row_max(i)).collect();
    for segment in batch {
        abs_sum += accumulate_segment(&frozen, &row_max, segment, rules, cfg.gamma, cfg.lambda, &mut acc)?;
        steps += segment.len();
    }
    let ones = vec![1.0; acc.len()];
    crate::credit::scaled_add(q, cfg.alpha / batch.len() as f64, &ones, &acc)?;
    Ok(abs_sum / (steps * acc.len()) as f64)
}
