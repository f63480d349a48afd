use super::PolicyError;
use crate::time::Nanos;

/// Exponentially weighted moving average, seeded by its first sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ewma {
    alpha: f64,
    value: Option<f64>,
}

impl Ewma {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, value: None }
    }

    pub fn update(&mut self, x: f64) -> f64 {
        let v = match self.value {
            Some(v) => v + self.alpha * (x - v),
            None => x,
        };
        self.value = Some(v);
        v
    }

    pub fn get(&self) -> Option<f64> {
        self.value
    }
}

/// What a policy sees of the path, as maintained by the sender.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolicyObservation {
    pub now: Nanos,
    /// Round trip of the most recent acknowledged packet, seconds.
    pub last_ack_rtt: Option<f64>,
    pub ewma_rtt: Option<f64>,
    pub ewma_inter_ack: Option<f64>,
    /// Packets in flight; a time average when the observation summarizes
    /// an epoch.
    pub backlog: f64,
    /// Sender-side average age over the last epoch, seconds.
    pub avg_age_epoch: f64,
    /// ACKs received during the last epoch.
    pub acks_in_epoch: u64,
}

/// Zero-wait: send exactly when nothing is outstanding.
pub fn zero_wait_next(obs: &PolicyObservation) -> bool {
    obs.backlog == 0.0
}

/// Lazy: one packet per smoothed round trip.
pub fn lazy_rate(obs: &PolicyObservation) -> Result<f64, PolicyError> {
    match obs.ewma_rtt {
        Some(rtt) if rtt > 0.0 => Ok(1.0 / rtt),
        _ => Err(PolicyError::NotReady("no round-trip estimate yet")),
    }
}
