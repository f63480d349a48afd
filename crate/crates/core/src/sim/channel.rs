use std::fmt;

use super::SimError;

/// Bottleneck path whose behavior depends on offered load.
///
/// Three regimes, by load `ρ = λ/μ` offered to the bottleneck:
///
/// * relaxed, `ρ ≤ loss_onset`: everything is accepted;
/// * busy, `loss_onset < ρ ≤ delay_onset`: the excess over `loss_onset` is
///   dropped at ingress, so the accepted load stays flat and queueing delay
///   does not grow yet;
/// * panicked, `ρ > delay_onset`: load beyond `delay_onset` is accepted
///   again and builds queue.
///
/// Loss therefore always starts rising before delay does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub base_rtt_s: f64,
    pub bandwidth_bps: f64,
    pub packet_bytes: u32,
    pub loss_onset: f64,
    pub delay_onset: f64,
}

impl ChannelModel {
    /// A bottleneck that never drops at ingress; loss and delay only come
    /// from the queue itself.
    pub fn bottleneck(bandwidth_bps: f64, packet_bytes: u32, base_rtt_s: f64) -> Self {
        Self {
            base_rtt_s,
            bandwidth_bps,
            packet_bytes,
            loss_onset: 1.0,
            delay_onset: 1.0,
        }
    }

    /// UDP-like path with loss onset at 60% and queue growth past 95% of
    /// capacity. The thresholds are free parameters; only their order
    /// matters.
    pub fn udp_regimes(bandwidth_bps: f64, packet_bytes: u32, base_rtt_s: f64) -> Self {
        Self {
            loss_onset: 0.6,
            delay_onset: 0.95,
            ..Self::bottleneck(bandwidth_bps, packet_bytes, base_rtt_s)
        }
    }

    /// Packets per second the bottleneck can carry.
    pub fn service_rate(&self) -> f64 {
        self.bandwidth_bps / (8.0 * self.packet_bytes as f64)
    }

    /// Load that passes ingress for an offered load `rho`.
    pub fn accepted_load(&self, rho: f64) -> f64 {
        if rho <= self.loss_onset {
            rho
        } else if rho <= self.delay_onset {
            self.loss_onset
        } else {
            self.loss_onset + (rho - self.delay_onset)
        }
    }

    pub fn ingress_drop(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            0.0
        } else {
            (1.0 - self.accepted_load(rho) / rho).clamp(0.0, 1.0)
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.base_rtt_s >= 0.0
            && self.bandwidth_bps > 0.0
            && self.packet_bytes > 0
            && self.loss_onset > 0.0
            && self.loss_onset <= self.delay_onset
            && self.delay_onset <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::Config(format!("invalid channel model: {self}")))
        }
    }
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "base_rtt_s={} bandwidth_bps={} packet_bytes={} loss_onset={} delay_onset={}",
            self.base_rtt_s,
            self.bandwidth_bps,
            self.packet_bytes,
            self.loss_onset,
            self.delay_onset
        )
    }
}
