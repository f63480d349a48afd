//! Multi-source polling uplink.
//!
//! Each source keeps only its freshest sample (an LCFS queue of size one)
//! and generates it at will, so a sample taken at the start of a frame is
//! the freshest available. Every frame the access point polls one source;
//! the poll succeeds with that source's probability and delivers the sample
//! by the end of the frame.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::{stream, SimError};
use crate::age::{average_age, AgeTrace, PacketRecord};
use crate::time::{from_secs, Nanos};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchedulingPolicy {
    /// Fixed rotation, skipping no one.
    RoundRobin,
    /// Largest current age, ignoring channel quality.
    Greedy,
    /// Largest `p_i · Δ_i^exponent`, the success-weighted age.
    MaxWeight { exponent: f64 },
}

impl SchedulingPolicy {
    pub fn max_weight() -> Self {
        Self::MaxWeight { exponent: 1.0 }
    }
}

impl FromStr for SchedulingPolicy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "round-robin" | "rr" => Ok(Self::RoundRobin),
            "greedy" | "greedy-max-age" => Ok(Self::Greedy),
            "max-weight" | "mw" => Ok(Self::max_weight()),
            other => Err(SimError::Config(format!(
                "unknown scheduling policy `{other}`"
            ))),
        }
    }
}

impl fmt::Display for SchedulingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RoundRobin => f.write_str("round-robin"),
            Self::Greedy => f.write_str("greedy"),
            Self::MaxWeight { exponent } => write!(f, "max-weight(exp={exponent})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    pub success_prob: Vec<f64>,
    pub frame_s: f64,
    pub policy: SchedulingPolicy,
}

impl SchedulerConfig {
    pub fn new(success_prob: Vec<f64>, frame_s: f64, policy: SchedulingPolicy) -> Self {
        Self {
            success_prob,
            frame_s,
            policy,
        }
    }

    pub fn n_sources(&self) -> usize {
        self.success_prob.len()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.success_prob.is_empty() {
            return Err(SimError::Config("need at least one source".into()));
        }
        if let Some(p) = self
            .success_prob
            .iter()
            .find(|p| !(**p > 0.0 && **p <= 1.0))
        {
            return Err(SimError::Config(format!(
                "success probability {p} not in (0, 1]"
            )));
        }
        if !(self.frame_s > 0.0 && self.frame_s.is_finite()) {
            return Err(SimError::Config(format!(
                "frame must be positive, got {}",
                self.frame_s
            )));
        }
        if let SchedulingPolicy::MaxWeight { exponent } = self.policy {
            if !(exponent > 0.0 && exponent.is_finite()) {
                return Err(SimError::Config(format!(
                    "weight exponent must be positive, got {exponent}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SchedulerOutcome {
    pub traces: Vec<AgeTrace>,
    /// Per-source average age in seconds; NaN when a source saw fewer than
    /// two deliveries.
    pub avg_ages: Vec<f64>,
    pub polls: Vec<u64>,
    pub successes: Vec<u64>,
}

impl SchedulerOutcome {
    /// Sum of the per-source average ages.
    pub fn total_avg_age(&self) -> f64 {
        self.avg_ages.iter().sum()
    }
}

fn pick(policy: SchedulingPolicy, frame: u64, ages: &[Nanos], probs: &[f64]) -> usize {
    let argmax = |score: &dyn Fn(usize) -> f64| {
        let mut best = 0;
        for i in 1..ages.len() {
            if score(i) > score(best) {
                best = i;
            }
        }
        best
    };
    match policy {
        SchedulingPolicy::RoundRobin => (frame % ages.len() as u64) as usize,
        SchedulingPolicy::Greedy => argmax(&|i| ages[i] as f64),
        SchedulingPolicy::MaxWeight { exponent } => {
            argmax(&|i| probs[i] * (ages[i] as f64).powf(exponent))
        }
    }
}

/// Runs `frames` poll slots. Ties go to the lowest source index.
pub fn simulate_scheduler(
    cfg: &SchedulerConfig,
    frames: u64,
    seed: u64,
) -> Result<SchedulerOutcome, SimError> {
    cfg.validate()?;
    let n = cfg.n_sources();
    let frame_ns = from_secs(cfg.frame_s);
    if frame_ns == 0 {
        return Err(SimError::Config("frame shorter than a nanosecond".into()));
    }
    let mut rng = stream(seed, 4);
    // newest delivered generation stamp per source; a source that has never
    // delivered is treated as one frame old at t = 0
    let mut newest: Vec<i128> = vec![-(frame_ns as i128); n];
    let mut records: Vec<Vec<PacketRecord>> = vec![Vec::new(); n];
    let mut polls = vec![0u64; n];
    let mut successes = vec![0u64; n];
    let mut ages = vec![0; n];
    for k in 0..frames {
        let start = k * frame_ns;
        for i in 0..n {
            ages[i] = (start as i128 - newest[i]) as Nanos;
        }
        let i = pick(cfg.policy, k, &ages, &cfg.success_prob);
        polls[i] += 1;
        let ok = cfg.success_prob[i] >= 1.0 || rng.random::<f64>() < cfg.success_prob[i];
        if ok {
            successes[i] += 1;
            let id = records[i].len() as u64;
            records[i].push(PacketRecord::delivered(id, start, start + frame_ns));
            newest[i] = start as i128;
        }
    }
    let t_end = frames * frame_ns;
    let traces = records
        .into_iter()
        .map(|r| AgeTrace::new(r, 0, t_end, 0))
        .collect::<Result<Vec<_>, _>>()?;
    let avg_ages = traces
        .iter()
        .map(|t| average_age(t).unwrap_or(f64::NAN))
        .collect();
    Ok(SchedulerOutcome {
        traces,
        avg_ages,
        polls,
        successes,
    })
}
