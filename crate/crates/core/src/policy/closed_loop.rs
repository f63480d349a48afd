use std::fmt;

use super::{
    acp_epoch_update, lazy_rate, zero_wait_next, AcpState, Ewma, PolicyConfig, PolicyError,
    PolicyObservation,
};
use crate::age::{AgeTrace, PacketRecord};
use crate::harness::{Direction, EchoCore, EmulatedChannel, EmulatedSpec, MsgType, WirePacket};
use crate::sim::EventQueue;
use crate::time::{from_secs, secs, Nanos, NANOS_PER_SEC};

pub const DECISION_HEADER: &str = "epoch,action,target_backlog,rate_hz,avg_age_s,backlog";

/// Rate policies the closed loop can drive.
#[derive(Debug, Clone, PartialEq)]
pub enum RatePolicy {
    Fixed(f64),
    ZeroWait,
    Lazy,
    Acp(AcpState),
}

impl RatePolicy {
    pub fn acp(cfg: &PolicyConfig) -> Result<Self, PolicyError> {
        Ok(RatePolicy::Acp(AcpState::new(
            cfg.kappa,
            cfg.backlog_cap,
            cfg.epoch_ms / 1e3,
        )?))
    }

    pub fn name(&self) -> &'static str {
        match self {
            RatePolicy::Fixed(_) => "fixed",
            RatePolicy::ZeroWait => "zero-wait",
            RatePolicy::Lazy => "lazy",
            RatePolicy::Acp(_) => "acp",
        }
    }

    /// Sending rate in force, if the policy sends at a rate at all.
    fn rate(&self, obs: &PolicyObservation) -> Option<f64> {
        match self {
            RatePolicy::Fixed(r) => Some(*r),
            RatePolicy::ZeroWait => None,
            RatePolicy::Lazy => lazy_rate(obs).ok(),
            RatePolicy::Acp(s) => obs.ewma_rtt.map(|rtt| s.rate(rtt)),
        }
    }
}

/// One line of the per-epoch decision log.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRow {
    pub epoch: u64,
    /// Virtual time at the end of the epoch; not part of the CSV.
    pub end_ns: Nanos,
    pub action: String,
    pub target_backlog: f64,
    pub rate_hz: f64,
    pub avg_age_s: f64,
    pub backlog: f64,
}

impl fmt::Display for DecisionRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{}",
            self.epoch,
            self.action,
            self.target_backlog,
            self.rate_hz,
            self.avg_age_s,
            self.backlog
        )
    }
}

#[derive(Debug, Clone)]
pub struct ClosedLoopReport {
    /// Sender-side trace: generation and ACK stamps.
    pub ack_trace: AgeTrace,
    /// Arrivals at the responder on the sender's time base.
    pub server_trace: AgeTrace,
    pub decisions: Vec<DecisionRow>,
    /// Time-average number of unacknowledged packets while sending.
    pub mean_in_flight: f64,
    pub sent: u64,
    pub acked: u64,
    /// Packets given up on after the loss timeout.
    pub expired: u64,
    pub duration_ns: Nanos,
}

impl ClosedLoopReport {
    /// Packets sent per second over `[from_s, to_s)`.
    pub fn send_rate(&self, from_s: f64, to_s: f64) -> f64 {
        let (a, b) = (from_secs(from_s), from_secs(to_s));
        let n = self
            .ack_trace
            .records()
            .iter()
            .filter(|r| r.gen_ns >= a && r.gen_ns < b)
            .count();
        n as f64 / (to_s - from_s)
    }

    pub fn decision_csv(&self) -> String {
        let mut out = String::from(DECISION_HEADER);
        out.push('\n');
        for row in &self.decisions {
            out.push_str(&row.to_string());
            out.push('\n');
        }
        out
    }
}

enum Ev {
    Send(u64),
    AtServer(Vec<u8>),
    AtSender(Vec<u8>),
    Epoch,
    Expire(u64),
}

/// Time integrals of the age estimate and the in-flight count.
#[derive(Debug, Default)]
struct Areas {
    age: f64,
    age_time: f64,
    backlog: f64,
    time: f64,
}

struct Loop<'a> {
    policy: RatePolicy,
    cfg: &'a PolicyConfig,
    size: usize,
    end: Nanos,
    ch: EmulatedChannel,
    echo: EchoCore,
    events: EventQueue<Ev>,
    gens: Vec<Nanos>,
    acks: Vec<Option<Nanos>>,
    arrivals: Vec<Option<Nanos>>,
    outstanding: Vec<bool>,
    in_flight: u64,
    expired: u64,
    ewma_rtt: Ewma,
    ewma_inter_ack: Ewma,
    last_rtt: Option<f64>,
    last_ack_at: Option<Nanos>,
    newest_acked: Option<Nanos>,
    send_token: u64,
    send_pending: bool,
    last_send: Option<Nanos>,
    clock: Nanos,
    epoch: Areas,
    total: Areas,
    epoch_acks: u64,
    epoch_sends: u64,
    epoch_start: Nanos,
    decisions: Vec<DecisionRow>,
}

impl Loop<'_> {
    fn obs(&self, now: Nanos) -> PolicyObservation {
        PolicyObservation {
            now,
            last_ack_rtt: self.last_rtt,
            ewma_rtt: self.ewma_rtt.get(),
            ewma_inter_ack: self.ewma_inter_ack.get(),
            backlog: self.in_flight as f64,
            avg_age_epoch: 0.0,
            acks_in_epoch: self.epoch_acks,
        }
    }

    fn advance(&mut self, t: Nanos) {
        let t_eff = t.min(self.end);
        if t_eff > self.clock {
            let dt = secs(t_eff - self.clock);
            for acc in [&mut self.epoch, &mut self.total] {
                acc.backlog += self.in_flight as f64 * dt;
                acc.time += dt;
                if let Some(g) = self.newest_acked {
                    let (x, y) = (secs(self.clock - g), secs(t_eff - g));
                    acc.age += (y * y - x * x) / 2.0;
                    acc.age_time += dt;
                }
            }
        }
        self.clock = self.clock.max(t_eff);
    }

    fn schedule_send(&mut self, at: Nanos) {
        if at >= self.end {
            return;
        }
        self.send_token += 1;
        self.send_pending = true;
        self.events.schedule(at, Ev::Send(self.send_token));
    }

    fn loss_timeout(&self) -> Nanos {
        let rtt = self.ewma_rtt.get().unwrap_or(0.0);
        from_secs((4.0 * rtt).max(2.0))
    }

    /// Lets an idle-driven or not-yet-paced sender go again.
    fn kick(&mut self, now: Nanos) {
        if self.send_pending || now >= self.end {
            return;
        }
        let obs = self.obs(now);
        let go = match self.policy {
            RatePolicy::ZeroWait => zero_wait_next(&obs),
            _ => true,
        };
        if go {
            self.schedule_send(now);
        }
    }

    fn send(&mut self, now: Nanos) {
        self.send_pending = false;
        let id = self.gens.len() as u64;
        self.gens.push(now);
        self.acks.push(None);
        self.arrivals.push(None);
        self.outstanding.push(true);
        self.in_flight += 1;
        self.epoch_sends += 1;
        self.last_send = Some(now);
        let bytes = WirePacket::data(id, now, self.size)
            .expect("size checked")
            .encode();
        if let Some(at) = self.ch.transit(Direction::Forward, now, self.size) {
            self.events.schedule(at, Ev::AtServer(bytes));
        }
        self.events
            .schedule(now + self.loss_timeout(), Ev::Expire(id));
        if let Some(rate) = self.policy.rate(&self.obs(now)) {
            self.schedule_send(now + (NANOS_PER_SEC as f64 / rate).round() as Nanos);
        }
    }

    fn at_sender(&mut self, now: Nanos, bytes: &[u8]) {
        let Ok(p) = WirePacket::decode(bytes) else {
            return;
        };
        let idx = p.id as usize;
        if p.msg_type != MsgType::EchoReply || idx >= self.gens.len() || self.acks[idx].is_some() {
            return;
        }
        self.acks[idx] = Some(now);
        if self.outstanding[idx] {
            self.outstanding[idx] = false;
            self.in_flight -= 1;
        }
        let rtt = secs(now - self.gens[idx]);
        self.last_rtt = Some(rtt);
        self.ewma_rtt.update(rtt);
        if let Some(prev) = self.last_ack_at {
            self.ewma_inter_ack.update(secs(now - prev));
        }
        self.last_ack_at = Some(now);
        self.epoch_acks += 1;
        if self.newest_acked.is_none_or(|g| self.gens[idx] > g) {
            self.newest_acked = Some(self.gens[idx]);
        }
        self.kick(now);
    }

    fn epoch_end(&mut self, now: Nanos) -> Result<(), PolicyError> {
        let span = self.epoch.time.max(f64::MIN_POSITIVE);
        let mut obs = self.obs(now);
        obs.backlog = self.epoch.backlog / span;
        obs.avg_age_epoch = if self.epoch.age_time > 0.0 {
            self.epoch.age / self.epoch.age_time
        } else {
            f64::NAN
        };
        let min_epoch = self.cfg.epoch_ms / 1e3;
        let mut next_len = obs.ewma_rtt.unwrap_or(0.0).max(min_epoch);
        let row = match &mut self.policy {
            RatePolicy::Acp(state) => match acp_epoch_update(state, &obs) {
                Ok((action, rate)) => {
                    next_len = state.epoch_len;
                    let target = state.target_backlog;
                    // a new rate applies from now rather than after the
                    // send that is already queued
                    let wait = (NANOS_PER_SEC as f64 / rate).round() as Nanos;
                    let at = self.last_send.map_or(now, |l| (l + wait).max(now));
                    self.schedule_send(at);
                    Some((action.to_string(), target, rate))
                }
                Err(PolicyError::NotReady(_)) => None,
                Err(e) => return Err(e),
            },
            other => {
                let rate = match other {
                    RatePolicy::ZeroWait => self.epoch_sends as f64 / span,
                    p => p.rate(&obs).unwrap_or(0.0),
                };
                Some(("-".to_string(), rate * obs.ewma_rtt.unwrap_or(0.0), rate))
            }
        };
        if let Some((action, target_backlog, rate_hz)) = row {
            self.decisions.push(DecisionRow {
                epoch: self.decisions.len() as u64,
                end_ns: now,
                action,
                target_backlog,
                rate_hz,
                avg_age_s: obs.avg_age_epoch,
                backlog: obs.backlog,
            });
        }
        self.epoch = Areas::default();
        self.epoch_acks = 0;
        self.epoch_sends = 0;
        self.epoch_start = now;
        let next = now + from_secs(next_len);
        if next <= self.end {
            self.events.schedule(next, Ev::Epoch);
        }
        Ok(())
    }
}

/// Drives `policy` over an emulated echo path for `duration_s` of virtual
/// time. Rate policies send their first packet at time zero and pace from
/// the first ACK on; zero-wait sends whenever nothing is outstanding.
/// Packets unanswered after `max(2 s, 4 RTT)` are written off.
pub fn run_closed_loop(
    policy: RatePolicy,
    spec: &EmulatedSpec,
    cfg: &PolicyConfig,
    duration_s: f64,
    packet_size: usize,
) -> Result<ClosedLoopReport, PolicyError> {
    cfg.validate()?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(PolicyError::Config(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    if let RatePolicy::Fixed(r) = policy {
        if !(r > 0.0 && r.is_finite()) {
            return Err(PolicyError::Config(format!(
                "rate must be positive, got {r}"
            )));
        }
    }
    WirePacket::data(0, 0, packet_size)
        .map_err(|e| PolicyError::Config(format!("packet size: {e}")))?;
    let end = from_secs(duration_s);
    let mut lp = Loop {
        policy,
        cfg,
        size: packet_size,
        end,
        ch: EmulatedChannel::new(spec)?,
        echo: EchoCore::default(),
        events: EventQueue::new(),
        gens: Vec::new(),
        acks: Vec::new(),
        arrivals: Vec::new(),
        outstanding: Vec::new(),
        in_flight: 0,
        expired: 0,
        ewma_rtt: Ewma::new(cfg.ewma_alpha),
        ewma_inter_ack: Ewma::new(cfg.ewma_alpha),
        last_rtt: None,
        last_ack_at: None,
        newest_acked: None,
        send_token: 0,
        send_pending: false,
        last_send: None,
        clock: 0,
        epoch: Areas::default(),
        total: Areas::default(),
        epoch_acks: 0,
        epoch_sends: 0,
        epoch_start: 0,
        decisions: Vec::new(),
    };
    lp.schedule_send(0);
    lp.events.schedule(from_secs(cfg.epoch_ms / 1e3), Ev::Epoch);

    while let Some((now, ev)) = lp.events.pop() {
        lp.advance(now);
        match ev {
            Ev::Send(token) => {
                if token == lp.send_token && lp.send_pending {
                    lp.send(now);
                }
            }
            Ev::AtServer(bytes) => {
                if let Ok(p) = WirePacket::decode(&bytes) {
                    lp.arrivals[p.id as usize].get_or_insert(now);
                }
                let clock = lp.ch.server_clock(now).unwrap_or(0);
                if let Some(reply) = lp.echo.handle(&bytes, clock) {
                    if let Some(at) = lp.ch.transit(Direction::Backward, now, reply.len()) {
                        lp.events.schedule(at, Ev::AtSender(reply));
                    }
                }
            }
            Ev::AtSender(bytes) => lp.at_sender(now, &bytes),
            Ev::Epoch => lp.epoch_end(now)?,
            Ev::Expire(id) => {
                let idx = id as usize;
                if lp.outstanding[idx] {
                    lp.outstanding[idx] = false;
                    lp.in_flight -= 1;
                    lp.expired += 1;
                    lp.kick(now);
                }
            }
        }
    }
    lp.advance(end);

    let records = |stamps: &[Option<Nanos>]| -> Vec<PacketRecord> {
        lp.gens
            .iter()
            .zip(stamps)
            .enumerate()
            .map(|(id, (&g, &r))| PacketRecord {
                id: id as u64,
                gen_ns: g,
                recv_ns: r,
                size_bytes: packet_size as u32,
            })
            .collect()
    };
    let ack_trace = AgeTrace::from_records(records(&lp.acks))?;
    let server_trace = AgeTrace::from_records(records(&lp.arrivals))?;
    Ok(ClosedLoopReport {
        ack_trace,
        server_trace,
        mean_in_flight: lp.total.backlog / lp.total.time.max(f64::MIN_POSITIVE),
        sent: lp.gens.len() as u64,
        acked: lp.acks.iter().flatten().count() as u64,
        expired: lp.expired,
        decisions: lp.decisions,
        duration_ns: end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::age::{average_age, average_age_h};
    use crate::harness::DEFAULT_DATA_SIZE;

    fn run(policy: RatePolicy, spec: &str, secs: f64) -> ClosedLoopReport {
        run_closed_loop(
            policy,
            &spec.parse().unwrap(),
            &PolicyConfig::default(),
            secs,
            DEFAULT_DATA_SIZE,
        )
        .unwrap()
    }

    #[test]
    fn zero_wait_on_fixed_delay() {
        let r = run(RatePolicy::ZeroWait, "fixed_rtt=50ms", 10.0);
        // one packet per round trip, age seen at the sender is 1.5 RTT
        assert_eq!(r.sent, 200);
        let age = average_age(&r.ack_trace).unwrap();
        assert!((age - 0.075).abs() < 1e-9, "{age}");
        assert!((r.mean_in_flight - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lazy_holds_one_in_flight() {
        let r = run(RatePolicy::Lazy, "fixed_rtt=100ms", 60.0);
        assert!((r.mean_in_flight - 1.0).abs() < 0.2, "{}", r.mean_in_flight);
        let rate = r.send_rate(30.0, 60.0);
        assert!((rate - 10.0).abs() / 10.0 < 0.05, "{rate}");
        let last = r.decisions.last().unwrap();
        assert!((last.rate_hz - 10.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_rate_matches_min_age() {
        let r = run(RatePolicy::Fixed(50.0), "fixed_rtt=20ms", 5.0);
        let age = average_age_h(&r.ack_trace).unwrap();
        assert!((age - 0.03).abs() < 1e-9, "{age}");
        assert_eq!(r.expired, 0);
    }

    #[test]
    fn acp_follows_capacity_step() {
        let cfg = PolicyConfig::default();
        let r = run(RatePolicy::acp(&cfg).unwrap(), "capacity_step", 40.0);
        let step = 20 * NANOS_PER_SEC;
        for d in &r.decisions {
            assert!(d.target_backlog >= cfg.kappa && d.target_backlog <= cfg.backlog_cap);
            assert!(d.rate_hz.is_finite() && d.rate_hz > 0.0);
        }
        let after: Vec<_> = r.decisions.iter().filter(|d| d.end_ns > step).collect();
        let first_below = after.iter().position(|d| d.rate_hz < 25.0).unwrap();
        assert!(first_below < 10, "{first_below}");
        let csv = r.decision_csv();
        assert!(csv.starts_with(DECISION_HEADER));
        assert!(csv.lines().nth(1).unwrap().starts_with("0,"));
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = "forward=lognormal:30ms:0.6,backward=10ms,seed=4";
        let cfg = PolicyConfig::default();
        let a = run(RatePolicy::acp(&cfg).unwrap(), spec, 10.0);
        let b = run(RatePolicy::acp(&cfg).unwrap(), spec, 10.0);
        assert_eq!(a.ack_trace, b.ack_trace);
        assert_eq!(a.decisions, b.decisions);
    }
}
