use clap::{Args, ValueEnum};

use aoi_core::harness::parse_bandwidth;
use aoi_core::sim::{
    ArrivalProcess, ChannelModel, Discipline, ServiceProcess, SimConfig, StageLoss,
};
use aoi_core::time::secs;
use aoi_core::Nanos;

use crate::{parse_dur, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    /// Poisson arrivals, exponential service.
    Mm1,
    /// Poisson arrivals, deterministic service.
    Md1,
    /// Periodic arrivals, exponential service.
    Dm1,
    /// Periodic arrivals, deterministic service.
    Dd1,
    /// Generate-at-will source with exponential service.
    Gaw,
    /// Periodic or Poisson arrivals into a bandwidth-limited link.
    Channel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Process {
    Poisson,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Regimes {
    /// Losses come only from a full buffer.
    Bottleneck,
    /// Ingress loss sets in before the queue grows.
    Udp,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "mm1")]
    pub model: Model,
    /// Offered load; the arrival rate is rho times the service rate.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Service rate, per second.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Arrival rate, per second; overrides --rho.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Wait after each service completion for the generate-at-will model.
    #[arg(long, value_parser = parse_dur, default_value = "0")]
    pub wait: Nanos,
    /// Number of arrivals to generate.
    #[arg(long, default_value_t = 100_000)]
    pub arrivals: u64,
    #[arg(long, value_enum, default_value = "fcfs")]
    pub discipline: DisciplineArg,
    /// Waiting-room size; unbounded when absent.
    #[arg(long)]
    pub buffer: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub ingress_loss: f64,
    #[arg(long, default_value_t = 0.0)]
    pub egress_loss: f64,
    /// Resend a packet lost after service once this much time has passed.
    #[arg(long, value_parser = parse_dur)]
    pub retransmit: Option<Nanos>,
    /// Fixed delay added after service.
    #[arg(long, value_parser = parse_dur, default_value = "0")]
    pub propagation: Nanos,
    /// Link rate for the channel model, e.g. 130kbps.
    #[arg(long)]
    pub bandwidth: Option<String>,
    #[arg(long, default_value_t = 1058)]
    pub packet_bytes: u32,
    /// Base round trip for the channel model.
    #[arg(long, value_parser = parse_dur, default_value = "0")]
    pub rtt: Nanos,
    #[arg(long, value_enum, default_value = "bottleneck")]
    pub regimes: Regimes,
    /// Arrival process for the channel model.
    #[arg(long, value_enum, default_value = "periodic")]
    pub process: Process,
    /// Stop at the last arrival instead of serving out the queue.
    #[arg(long)]
    pub no_drain: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DisciplineArg {
    Fcfs,
    Lcfs1,
}

impl ModelArgs {
    fn channel(&self) -> Result<ChannelModel, CliError> {
        let text = self
            .bandwidth
            .as_deref()
            .ok_or_else(|| CliError::config("the channel model needs --bandwidth"))?;
        let bw = parse_bandwidth(text)
            .ok_or_else(|| CliError::config(format!("bad bandwidth `{text}`")))?;
        let rtt = secs(self.rtt);
        Ok(match self.regimes {
            Regimes::Bottleneck => ChannelModel::bottleneck(bw, self.packet_bytes, rtt),
            Regimes::Udp => ChannelModel::udp_regimes(bw, self.packet_bytes, rtt),
        })
    }

    /// Service rate of the configured server, per second.
    pub fn service_rate(&self) -> Result<f64, CliError> {
        Ok(match self.model {
            Model::Channel => self.channel()?.service_rate(),
            _ => self.mu,
        })
    }

    fn arrival_rate(&self) -> Result<f64, CliError> {
        match (self.rate, self.rho) {
            (Some(r), _) => Ok(r),
            (None, Some(rho)) => Ok(rho * self.service_rate()?),
            (None, None) => Err(CliError::config("give --rate or --rho")),
        }
    }

    /// Simulation config for this model at arrival rate `rate` (or the
    /// flags' rate when `None`).
    pub fn config(&self, rate: Option<f64>, seed: u64) -> Result<SimConfig, CliError> {
        let mu = self.mu;
        let mut cfg = if self.model == Model::Gaw {
            SimConfig::new(
                ArrivalProcess::GenerateAtWill {
                    wait_s: secs(self.wait),
                },
                ServiceProcess::Exponential { rate: mu },
                self.arrivals,
                seed,
            )
        } else {
            let lambda = match rate {
                Some(r) => r,
                None => self.arrival_rate()?,
            };
            let poisson = ArrivalProcess::Poisson { rate: lambda };
            let periodic = ArrivalProcess::Deterministic { rate: lambda };
            match self.model {
                Model::Mm1 => SimConfig::new(
                    poisson,
                    ServiceProcess::Exponential { rate: mu },
                    self.arrivals,
                    seed,
                ),
                Model::Md1 => SimConfig::new(
                    poisson,
                    ServiceProcess::Deterministic { rate: mu },
                    self.arrivals,
                    seed,
                ),
                Model::Dm1 => SimConfig::new(
                    periodic,
                    ServiceProcess::Exponential { rate: mu },
                    self.arrivals,
                    seed,
                ),
                Model::Dd1 => SimConfig::new(
                    periodic,
                    ServiceProcess::Deterministic { rate: mu },
                    self.arrivals,
                    seed,
                ),
                Model::Channel => {
                    let arrival = match self.process {
                        Process::Poisson => poisson,
                        Process::Periodic => periodic,
                    };
                    SimConfig::through_channel(arrival, self.channel()?, self.arrivals, seed)
                }
                Model::Gaw => unreachable!("handled above"),
            }
        };
        cfg.discipline = match self.discipline {
            DisciplineArg::Fcfs => Discipline::Fcfs,
            DisciplineArg::Lcfs1 => Discipline::Lcfs1,
        };
        cfg.buffer = self.buffer;
        cfg.loss = StageLoss {
            ingress: self.ingress_loss,
            egress: self.egress_loss,
            retransmit_ns: self.retransmit,
        };
        if self.model != Model::Channel {
            cfg.propagation_ns = self.propagation;
        } else {
            cfg.propagation_ns += self.propagation;
        }
        cfg.drain = !self.no_drain;
        cfg.validate()?;
        Ok(cfg)
    }
}
