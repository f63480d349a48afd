use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{
    stream, ArrivalProcess, Discipline, EventQueue, RunMetadata, ServiceProcess, SimConfig,
    SimError,
};
use crate::age::{AgeTrace, PacketRecord};
use crate::time::{from_secs, secs, Nanos};

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trace: AgeTrace,
    pub meta: RunMetadata,
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    Arrival,
    Departure,
}

struct Sampler {
    rng: ChaCha8Rng,
    exp: Option<Exp<f64>>,
    fixed_ns: Nanos,
}

impl Sampler {
    fn new(rng: ChaCha8Rng, exponential: bool, rate: f64) -> Self {
        Self {
            rng,
            exp: exponential.then(|| Exp::new(rate).expect("validated rate")),
            fixed_ns: from_secs(1.0 / rate),
        }
    }

    fn next(&mut self) -> Nanos {
        match &self.exp {
            Some(e) => from_secs(e.sample(&mut self.rng)),
            None => self.fixed_ns,
        }
    }
}

struct Server {
    queue: VecDeque<u64>,
    in_service: Option<u64>,
}

impl Server {
    fn in_system(&self) -> u64 {
        self.queue.len() as u64 + u64::from(self.in_service.is_some())
    }
}

/// Runs one simulation and returns its trace and counters.
///
/// Packet ids are generation order. FCFS keeps reception order equal to
/// generation order; LCFS-1 always serves the newest waiting update.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutcome, SimError> {
    cfg.validate()?;
    let mut arrivals = match cfg.arrival {
        ArrivalProcess::Poisson { rate } => Some(Sampler::new(stream(cfg.seed, 1), true, rate)),
        ArrivalProcess::Deterministic { rate } => {
            Some(Sampler::new(stream(cfg.seed, 1), false, rate))
        }
        ArrivalProcess::GenerateAtWill { .. } => None,
    };
    let mut service = match cfg.service {
        ServiceProcess::Exponential { rate } => Sampler::new(stream(cfg.seed, 2), true, rate),
        ServiceProcess::Deterministic { rate } => Sampler::new(stream(cfg.seed, 2), false, rate),
    };
    let mut loss_rng = stream(cfg.seed, 3);
    let wait_ns = match cfg.arrival {
        ArrivalProcess::GenerateAtWill { wait_s } => from_secs(wait_s),
        _ => 0,
    };
    let ingress_loss = cfg.effective_ingress_loss();

    let mut meta = RunMetadata {
        seed: cfg.seed,
        config: cfg.to_string(),
        unstable: cfg.is_unstable(),
        ..RunMetadata::default()
    };
    let mut records: Vec<PacketRecord> = Vec::with_capacity(cfg.horizon as usize);
    let mut events = EventQueue::new();
    let mut server = Server {
        queue: VecDeque::new(),
        in_service: None,
    };
    let mut delay_total: u128 = 0;
    let mut area: u128 = 0;
    let mut last_t: Nanos = 0;
    let mut now: Nanos = 0;

    events.schedule(0, Ev::Arrival);

    let start_service = |server: &mut Server,
                         events: &mut EventQueue<Ev>,
                         service: &mut Sampler,
                         now: Nanos,
                         id: u64| {
        server.in_service = Some(id);
        events.schedule(now + service.next(), Ev::Departure);
    };

    while let Some((t, ev)) = events.pop() {
        area += server.in_system() as u128 * (t - last_t) as u128;
        last_t = t;
        now = t;
        match ev {
            Ev::Arrival => {
                let id = records.len() as u64;
                records.push(PacketRecord::lost(id, now).with_size(cfg.packet_bytes));
                meta.arrivals += 1;
                let more = meta.arrivals < cfg.horizon;
                if let Some(a) = arrivals.as_mut() {
                    if more {
                        events.schedule(now + a.next(), Ev::Arrival);
                    }
                }
                if ingress_loss > 0.0 && loss_rng.random::<f64>() < ingress_loss {
                    meta.ingress_dropped += 1;
                    if arrivals.is_none() && more {
                        events.schedule(now + wait_ns, Ev::Arrival);
                    }
                } else if server.in_service.is_none() {
                    start_service(&mut server, &mut events, &mut service, now, id);
                } else {
                    match cfg.discipline {
                        Discipline::Fcfs => {
                            if cfg.buffer.is_some_and(|cap| server.queue.len() >= cap) {
                                meta.buffer_dropped += 1;
                            } else {
                                server.queue.push_back(id);
                            }
                        }
                        Discipline::Lcfs1 => {
                            if cfg.buffer == Some(0) {
                                meta.buffer_dropped += 1;
                            } else if server.queue.pop_back().is_some() {
                                meta.superseded += 1;
                                server.queue.push_back(id);
                            } else {
                                server.queue.push_back(id);
                            }
                        }
                    }
                }
                if !more && !cfg.drain {
                    break;
                }
            }
            Ev::Departure => {
                let id = server.in_service.take().expect("departure without service");
                let lost = cfg.loss.egress > 0.0 && loss_rng.random::<f64>() < cfg.loss.egress;
                match (lost, cfg.loss.retransmit_ns) {
                    (true, Some(rto)) => {
                        // the same packet holds the server through timeout and resend
                        meta.retransmissions += 1;
                        server.in_service = Some(id);
                        events.schedule(now + rto + service.next(), Ev::Departure);
                        continue;
                    }
                    (true, None) => meta.channel_lost += 1,
                    (false, _) => {
                        let rec = &mut records[id as usize];
                        let recv = now + cfg.propagation_ns;
                        rec.recv_ns = Some(recv);
                        delay_total += (recv - rec.gen_ns) as u128;
                        meta.delivered += 1;
                    }
                }
                if let Some(next) = server.queue.pop_front() {
                    start_service(&mut server, &mut events, &mut service, now, next);
                } else if arrivals.is_none() && meta.arrivals < cfg.horizon {
                    events.schedule(now + wait_ns, Ev::Arrival);
                }
            }
        }
    }

    meta.still_queued = server.in_system();
    meta.avg_delay_s = if meta.delivered > 0 {
        secs((delay_total / meta.delivered as u128) as u64)
    } else {
        f64::NAN
    };
    meta.mean_in_system = if now > 0 {
        area as f64 / now as f64
    } else {
        0.0
    };
    meta.end_time_s = secs(now);

    let t_end = records
        .iter()
        .filter_map(|r| r.recv_ns)
        .max()
        .unwrap_or(0)
        .max(now);
    let trace = AgeTrace::new(records, 0, t_end, 0)?;
    Ok(SimOutcome { trace, meta })
}
