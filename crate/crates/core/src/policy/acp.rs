use std::fmt;

use super::{PolicyError, PolicyObservation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcpAction {
    Inc,
    Dec,
    Mdec,
}

impl fmt::Display for AcpAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AcpAction::Inc => "INC",
            AcpAction::Dec => "DEC",
            AcpAction::Mdec => "MDEC",
        })
    }
}

/// Backlog-target controller. Each epoch compares the average age and
/// backlog with the previous epoch's and moves the target:
///
/// | age change | backlog change | action |
/// |------------|----------------|--------|
/// | up         | up             | MDEC   |
/// | up         | flat or down   | INC    |
/// | flat/down  | up             | DEC    |
/// | flat/down  | flat or down   | INC    |
///
/// INC and DEC move the target by `kappa`. Consecutive MDECs escalate:
/// the k-th in a row divides the target by `2^k`. The target stays within
/// `[kappa, cap]` and the sending rate is `target / ewma_rtt`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcpState {
    pub target_backlog: f64,
    pub kappa: f64,
    pub cap: f64,
    pub mdec_streak: u32,
    pub prev_age: Option<f64>,
    pub prev_backlog: Option<f64>,
    /// Seconds; the controller runs once per epoch.
    pub epoch_len: f64,
    pub min_epoch: f64,
}

impl AcpState {
    pub fn new(kappa: f64, cap: f64, min_epoch: f64) -> Result<Self, PolicyError> {
        if !(kappa > 0.0 && kappa.is_finite() && cap >= kappa && cap.is_finite()) {
            return Err(PolicyError::Config(format!(
                "need 0 < kappa <= cap, got kappa={kappa} cap={cap}"
            )));
        }
        Ok(Self {
            target_backlog: kappa,
            kappa,
            cap,
            mdec_streak: 0,
            prev_age: None,
            prev_backlog: None,
            epoch_len: min_epoch,
            min_epoch,
        })
    }

    pub fn rate(&self, ewma_rtt: f64) -> f64 {
        self.target_backlog / ewma_rtt
    }
}

/// Runs one epoch of the controller and returns the action and new rate.
pub fn acp_epoch_update(
    state: &mut AcpState,
    obs: &PolicyObservation,
) -> Result<(AcpAction, f64), PolicyError> {
    let rtt = match obs.ewma_rtt {
        Some(r) if r > 0.0 => r,
        _ => return Err(PolicyError::NotReady("no round-trip estimate yet")),
    };
    let age_known = obs.avg_age_epoch.is_finite();
    let d_age = match state.prev_age {
        Some(p) if age_known => obs.avg_age_epoch - p,
        _ => 0.0,
    };
    let d_backlog = state.prev_backlog.map_or(0.0, |p| obs.backlog - p);
    let action = if obs.acks_in_epoch == 0 {
        AcpAction::Mdec
    } else {
        match (d_age > 0.0, d_backlog > 0.0) {
            (true, true) => AcpAction::Mdec,
            (true, false) | (false, false) => AcpAction::Inc,
            (false, true) => AcpAction::Dec,
        }
    };
    match action {
        AcpAction::Inc => {
            state.mdec_streak = 0;
            state.target_backlog += state.kappa;
        }
        AcpAction::Dec => {
            state.mdec_streak = 0;
            state.target_backlog -= state.kappa;
        }
        AcpAction::Mdec => {
            state.mdec_streak += 1;
            state.target_backlog /= 2f64.powi(state.mdec_streak as i32);
        }
    }
    state.target_backlog = state.target_backlog.clamp(state.kappa, state.cap);
    if obs.acks_in_epoch > 0 {
        if age_known {
            state.prev_age = Some(obs.avg_age_epoch);
        }
        state.prev_backlog = Some(obs.backlog);
    }
    state.epoch_len = rtt.max(state.min_epoch);
    Ok((action, state.rate(rtt)))
}
