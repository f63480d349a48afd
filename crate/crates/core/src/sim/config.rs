use std::fmt;

use super::ChannelModel;
use crate::age::AgeError;
use crate::time::Nanos;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("outside model domain: {0}")]
    Domain(String),
    #[error(transparent)]
    Age(#[from] AgeError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrivalProcess {
    /// Exogenous Poisson arrivals with rate `rate` per second.
    Poisson { rate: f64 },
    /// One arrival every `1/rate` seconds, the first at time zero.
    Deterministic { rate: f64 },
    /// The source generates a fresh update `wait_s` seconds after the
    /// previous one leaves the server; `wait_s = 0` is zero-wait.
    GenerateAtWill { wait_s: f64 },
}

impl ArrivalProcess {
    pub fn rate(&self) -> Option<f64> {
        match *self {
            Self::Poisson { rate } | Self::Deterministic { rate } => Some(rate),
            Self::GenerateAtWill { .. } => None,
        }
    }

    pub fn with_rate(self, rate: f64) -> Option<Self> {
        match self {
            Self::Poisson { .. } => Some(Self::Poisson { rate }),
            Self::Deterministic { .. } => Some(Self::Deterministic { rate }),
            Self::GenerateAtWill { .. } => None,
        }
    }
}

impl fmt::Display for ArrivalProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Poisson { rate } => write!(f, "poisson({rate})"),
            Self::Deterministic { rate } => write!(f, "deterministic({rate})"),
            Self::GenerateAtWill { wait_s } => write!(f, "generate-at-will(wait={wait_s})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServiceProcess {
    Exponential { rate: f64 },
    Deterministic { rate: f64 },
}

impl ServiceProcess {
    pub fn rate(&self) -> f64 {
        match *self {
            Self::Exponential { rate } | Self::Deterministic { rate } => rate,
        }
    }
}

impl fmt::Display for ServiceProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { rate } => write!(f, "exponential({rate})"),
            Self::Deterministic { rate } => write!(f, "deterministic({rate})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discipline {
    Fcfs,
    /// Last-come-first-served with a single waiting slot: a new arrival
    /// replaces whatever is waiting. Service is not preempted.
    Lcfs1,
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fcfs => "fcfs",
            Self::Lcfs1 => "lcfs1",
        })
    }
}

impl std::str::FromStr for Discipline {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fcfs" | "fifo" => Ok(Self::Fcfs),
            "lcfs1" | "lcfs-1" | "lcfs" => Ok(Self::Lcfs1),
            other => Err(SimError::Config(format!("unknown discipline `{other}`"))),
        }
    }
}

/// Independent drop probabilities at the two stages of the path: before
/// the queue (`ingress`) and after service (`egress`). With
/// `retransmit_ns` set, an egress loss is repaired by resending the packet
/// after that timeout, holding the server meanwhile.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageLoss {
    pub ingress: f64,
    pub egress: f64,
    pub retransmit_ns: Option<Nanos>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub arrival: ArrivalProcess,
    pub service: ServiceProcess,
    pub discipline: Discipline,
    /// Waiting slots excluding the one in service; `None` is unbounded.
    pub buffer: Option<usize>,
    pub loss: StageLoss,
    /// Fixed delay added to every delivery after service.
    pub propagation_ns: Nanos,
    /// Number of generated updates.
    pub horizon: u64,
    /// Keep serving after the last arrival until the system empties.
    pub drain: bool,
    pub packet_bytes: u32,
    pub channel: Option<ChannelModel>,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(arrival: ArrivalProcess, service: ServiceProcess, horizon: u64, seed: u64) -> Self {
        Self {
            arrival,
            service,
            discipline: Discipline::Fcfs,
            buffer: None,
            loss: StageLoss::default(),
            propagation_ns: 0,
            horizon,
            drain: true,
            packet_bytes: 0,
            channel: None,
            seed,
        }
    }

    /// Poisson arrivals into an exponential server at load `rho`.
    pub fn mm1(rho: f64, mu: f64, horizon: u64, seed: u64) -> Self {
        Self::new(
            ArrivalProcess::Poisson { rate: rho * mu },
            ServiceProcess::Exponential { rate: mu },
            horizon,
            seed,
        )
    }

    /// Arrivals through a bandwidth-limited channel; the service time is
    /// the packet's transmission time and the base RTT is added to every
    /// delivery.
    pub fn through_channel(
        arrival: ArrivalProcess,
        channel: ChannelModel,
        horizon: u64,
        seed: u64,
    ) -> Self {
        let mut cfg = Self::new(
            arrival,
            ServiceProcess::Deterministic {
                rate: channel.service_rate(),
            },
            horizon,
            seed,
        );
        cfg.propagation_ns = crate::time::from_secs(channel.base_rtt_s);
        cfg.packet_bytes = channel.packet_bytes;
        cfg.channel = Some(channel);
        cfg
    }

    pub fn with_discipline(mut self, d: Discipline) -> Self {
        self.discipline = d;
        self
    }

    pub fn with_buffer(mut self, slots: Option<usize>) -> Self {
        self.buffer = slots;
        self
    }

    /// Offered load `λ/μ`; undefined for generate-at-will sources.
    pub fn load(&self) -> Option<f64> {
        self.arrival.rate().map(|l| l / self.service.rate())
    }

    /// Ingress drop probability in effect: the channel regime's when a
    /// channel is attached, else the configured one.
    pub fn effective_ingress_loss(&self) -> f64 {
        match (&self.channel, self.load()) {
            (Some(ch), Some(rho)) => 1.0 - (1.0 - ch.ingress_drop(rho)) * (1.0 - self.loss.ingress),
            _ => self.loss.ingress,
        }
    }

    /// FCFS with no buffer bound at or beyond capacity.
    pub fn is_unstable(&self) -> bool {
        self.discipline == Discipline::Fcfs
            && self.buffer.is_none()
            && self
                .load()
                .is_some_and(|rho| rho * (1.0 - self.effective_ingress_loss()) >= 1.0)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SimError::Config(format!(
                    "{what} must be positive, got {v}"
                )))
            }
        };
        match self.arrival {
            ArrivalProcess::Poisson { rate } | ArrivalProcess::Deterministic { rate } => {
                positive(rate, "arrival rate")?
            }
            ArrivalProcess::GenerateAtWill { wait_s } => {
                if !(wait_s >= 0.0 && wait_s.is_finite()) {
                    return Err(SimError::Config(format!("wait must be >= 0, got {wait_s}")));
                }
            }
        }
        positive(self.service.rate(), "service rate")?;
        for (p, what) in [
            (self.loss.ingress, "ingress loss"),
            (self.loss.egress, "egress loss"),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Config(format!(
                    "{what} must be in [0, 1], got {p}"
                )));
            }
        }
        if self.loss.retransmit_ns.is_some() && self.loss.egress >= 1.0 {
            return Err(SimError::Config(
                "retransmission with certain loss never completes".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(SimError::Config(
                "horizon must be at least one arrival".into(),
            ));
        }
        if let Some(ch) = &self.channel {
            ch.validate()?;
        }
        Ok(())
    }
}

impl fmt::Display for SimConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "arrival={} service={} discipline={} buffer={} ingress_loss={} egress_loss={} propagation_ns={} horizon={} drain={}",
            self.arrival,
            self.service,
            self.discipline,
            self.buffer.map_or("inf".to_string(), |b| b.to_string()),
            self.loss.ingress,
            self.loss.egress,
            self.propagation_ns,
            self.horizon,
            self.drain
        )?;
        if let Some(rto) = self.loss.retransmit_ns {
            write!(f, " retransmit_ns={rto}")?;
        }
        if let Some(ch) = &self.channel {
            write!(f, " channel=[{ch}]")?;
        }
        Ok(())
    }
}
