use super::HarnessError;
use crate::time::{from_secs, Nanos, NANOS_PER_SEC};

/// Piecewise-constant sending rate: a list of `(rate_hz, duration)`
/// segments played back to back.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSchedule {
    segments: Vec<(f64, Nanos)>,
}

impl RateSchedule {
    pub fn new(segments: Vec<(f64, Nanos)>) -> Result<Self, HarnessError> {
        if segments.is_empty() {
            return Err(HarnessError::Config("empty rate schedule".into()));
        }
        if let Some((r, _)) = segments.iter().find(|(r, _)| !(*r > 0.0 && r.is_finite())) {
            return Err(HarnessError::Config(format!(
                "rate must be positive, got {r}"
            )));
        }
        Ok(Self { segments })
    }

    pub fn constant(rate_hz: f64, duration_s: f64) -> Result<Self, HarnessError> {
        Self::new(vec![(rate_hz, from_secs(duration_s))])
    }

    /// `steps` segments with rates rising linearly from `from_hz` to `to_hz`.
    pub fn linear_sweep(
        from_hz: f64,
        to_hz: f64,
        steps: usize,
        segment_s: f64,
    ) -> Result<Self, HarnessError> {
        if steps < 2 {
            return Self::constant(from_hz, segment_s);
        }
        let seg = from_secs(segment_s);
        Self::new(
            (0..steps)
                .map(|k| {
                    (
                        from_hz + (to_hz - from_hz) * k as f64 / (steps - 1) as f64,
                        seg,
                    )
                })
                .collect(),
        )
    }

    pub fn segments(&self) -> &[(f64, Nanos)] {
        &self.segments
    }

    pub fn duration_ns(&self) -> Nanos {
        self.segments.iter().map(|s| s.1).sum()
    }

    /// Send instants relative to the schedule start. Each segment starts
    /// with a send and spaces the rest `1/rate` apart, computed from the
    /// segment start so rounding does not accumulate.
    pub fn send_times(&self) -> Vec<Nanos> {
        let mut out = Vec::new();
        let mut start = 0;
        for &(rate, dur) in &self.segments {
            let period = NANOS_PER_SEC as f64 / rate;
            let mut k = 0u64;
            loop {
                let t = (k as f64 * period).round() as Nanos;
                if t >= dur {
                    break;
                }
                out.push(start + t);
                k += 1;
            }
            start += dur;
        }
        out
    }
}
