use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use super::HarnessError;
use crate::sim::stream;
use crate::time::{from_secs, parse_duration, parse_signed_duration, secs, Nanos, NANOS_PER_SEC};

/// Per-packet propagation delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayDist {
    Fixed(Nanos),
    Uniform {
        lo: Nanos,
        hi: Nanos,
    },
    /// Gaussian, truncated at zero by resampling.
    Normal {
        mean: Nanos,
        sd: Nanos,
    },
    /// Log-normal given by its median and the standard deviation of the
    /// underlying normal.
    LogNormal {
        median: Nanos,
        sigma: f64,
    },
}

impl DelayDist {
    pub fn mean_ns(&self) -> f64 {
        match *self {
            DelayDist::Fixed(d) => d as f64,
            DelayDist::Uniform { lo, hi } => (lo as f64 + hi as f64) / 2.0,
            DelayDist::Normal { mean, .. } => mean as f64,
            DelayDist::LogNormal { median, sigma } => median as f64 * (sigma * sigma / 2.0).exp(),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Nanos {
        match *self {
            DelayDist::Fixed(d) => d,
            DelayDist::Uniform { lo, hi } => rng.random_range(lo..=hi),
            DelayDist::Normal { mean, sd } => {
                if sd == 0 {
                    return mean;
                }
                let n = Normal::new(mean as f64, sd as f64).expect("checked sd");
                loop {
                    let v = n.sample(rng);
                    if v >= 0.0 {
                        return v.round() as Nanos;
                    }
                }
            }
            DelayDist::LogNormal { median, sigma } => {
                let d = LogNormal::new((median as f64).ln(), sigma).expect("checked sigma");
                d.sample(rng).round() as Nanos
            }
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let ok = match *self {
            DelayDist::Fixed(_) | DelayDist::Normal { .. } => true,
            DelayDist::Uniform { lo, hi } => lo <= hi,
            DelayDist::LogNormal { median, sigma } => {
                median > 0 && sigma.is_finite() && sigma >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config(format!(
                "invalid delay distribution {self}"
            )))
        }
    }
}

impl fmt::Display for DelayDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DelayDist::Fixed(d) => write!(f, "{}s", secs(d)),
            DelayDist::Uniform { lo, hi } => write!(f, "uniform:{}s:{}s", secs(lo), secs(hi)),
            DelayDist::Normal { mean, sd } => write!(f, "normal:{}s:{}s", secs(mean), secs(sd)),
            DelayDist::LogNormal { median, sigma } => {
                write!(f, "lognormal:{}s:{sigma}", secs(median))
            }
        }
    }
}

impl FromStr for DelayDist {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HarnessError::Config(format!("bad delay `{s}`"));
        let dur = |v: &str| parse_duration(v).ok_or_else(bad);
        let parts: Vec<&str> = s.split(':').collect();
        let d = match parts.as_slice() {
            [v] => DelayDist::Fixed(dur(v)?),
            ["fixed", v] => DelayDist::Fixed(dur(v)?),
            ["uniform", lo, hi] => DelayDist::Uniform {
                lo: dur(lo)?,
                hi: dur(hi)?,
            },
            ["normal", m, sd] => DelayDist::Normal {
                mean: dur(m)?,
                sd: dur(sd)?,
            },
            ["lognormal", m, sigma] => DelayDist::LogNormal {
                median: dur(m)?,
                sigma: sigma.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        d.validate()?;
        Ok(d)
    }
}

/// Random drops on a path.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LossSchedule {
    #[default]
    None,
    Bernoulli(f64),
    /// `(load, p)` steps sorted by load: once the offered load on the path
    /// (smoothed arrival rate over the link's packet capacity) reaches a
    /// threshold, packets are dropped with that step's probability.
    LoadSteps(Vec<(f64, f64)>),
}

impl LossSchedule {
    fn probability(&self, load: f64) -> f64 {
        match self {
            LossSchedule::None => 0.0,
            LossSchedule::Bernoulli(p) => *p,
            LossSchedule::LoadSteps(steps) => steps
                .iter()
                .take_while(|(l, _)| load >= *l)
                .last()
                .map_or(0.0, |s| s.1),
        }
    }
}

/// One direction of the emulated channel: an FCFS bottleneck queue in
/// front of a propagation delay.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub delay: DelayDist,
    /// Link rate; `None` means serialization takes no time.
    pub bandwidth_bps: Option<f64>,
    /// Optional `(time, factor)`: from `time` on the link rate is
    /// multiplied by `factor`.
    pub bandwidth_step: Option<(Nanos, f64)>,
    /// Packets that may wait for the link, excluding the one in
    /// transmission. `None` is unbounded.
    pub buffer: Option<usize>,
    pub loss: LossSchedule,
    /// Keep delivery order equal to send order even when delays vary.
    pub fifo: bool,
}

impl Default for PathSpec {
    fn default() -> Self {
        Self {
            delay: DelayDist::Fixed(0),
            bandwidth_bps: None,
            bandwidth_step: None,
            buffer: None,
            loss: LossSchedule::None,
            fifo: true,
        }
    }
}

impl PathSpec {
    pub fn fixed(delay_ns: Nanos) -> Self {
        Self {
            delay: DelayDist::Fixed(delay_ns),
            ..Self::default()
        }
    }

    /// Link rate in force at `now`.
    pub fn bandwidth_at(&self, now: Nanos) -> Option<f64> {
        let bw = self.bandwidth_bps?;
        Some(match self.bandwidth_step {
            Some((at, factor)) if now >= at => bw * factor,
            _ => bw,
        })
    }

    fn validate(&self) -> Result<(), HarnessError> {
        self.delay.validate()?;
        if let Some(bw) = self.bandwidth_bps {
            if !(bw > 0.0 && bw.is_finite()) {
                return Err(HarnessError::Config(format!(
                    "bandwidth must be positive, got {bw}"
                )));
            }
        }
        if let Some((_, factor)) = self.bandwidth_step {
            if !(factor > 0.0 && factor.is_finite()) {
                return Err(HarnessError::Config(format!(
                    "bandwidth factor must be positive, got {factor}"
                )));
            }
        }
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        match &self.loss {
            LossSchedule::None => {}
            LossSchedule::Bernoulli(p) if prob_ok(*p) => {}
            LossSchedule::LoadSteps(steps)
                if self.bandwidth_bps.is_some()
                    && steps.iter().all(|(l, p)| *l >= 0.0 && prob_ok(*p))
                    && steps.windows(2).all(|w| w[0].0 <= w[1].0) => {}
            other => {
                return Err(HarnessError::Config(format!(
                    "invalid loss schedule {other:?}"
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Sender to responder.
    Forward,
    /// Responder back to sender.
    Backward,
}

/// Both directions of an emulated echo path plus the responder's clock
/// offset relative to the sender.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmulatedSpec {
    pub forward: PathSpec,
    pub backward: PathSpec,
    pub server_offset_ns: i64,
    pub seed: u64,
}

impl EmulatedSpec {
    /// Lossless path with a fixed round trip split evenly.
    pub fn fixed_rtt(rtt_ns: Nanos) -> Self {
        Self {
            forward: PathSpec::fixed(rtt_ns / 2),
            backward: PathSpec::fixed(rtt_ns - rtt_ns / 2),
            ..Self::default()
        }
    }

    /// Fixed forward delay with an instant return path.
    pub fn fixed_delay(delay_ns: Nanos) -> Self {
        Self {
            forward: PathSpec::fixed(delay_ns),
            ..Self::default()
        }
    }

    /// 50 ms round trip behind a link that carries 100 default-size
    /// packets per second for 20 s and a quarter of that afterwards.
    pub fn capacity_step() -> Self {
        let mut spec = Self::fixed_rtt(50_000_000);
        spec.forward.bandwidth_bps = Some(100.0 * super::DEFAULT_DATA_SIZE as f64 * 8.0);
        spec.forward.bandwidth_step = Some((20 * NANOS_PER_SEC, 0.25));
        spec.forward.buffer = Some(1000);
        spec
    }

    pub fn path(&self, dir: Direction) -> &PathSpec {
        match dir {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.forward.validate()?;
        self.backward.validate()
    }

    /// Mean round-trip propagation delay, ignoring queueing.
    pub fn mean_rtt_ns(&self) -> f64 {
        self.forward.delay.mean_ns() + self.backward.delay.mean_ns()
    }
}

/// Link rate such as `130kbps`, `1.5Mbps` or a bare number of bits per second.
pub fn parse_bandwidth(v: &str) -> Option<f64> {
    let v = v.trim();
    let lower = v.to_ascii_lowercase();
    let (num, scale) = [("gbps", 1e9), ("mbps", 1e6), ("kbps", 1e3), ("bps", 1.0)]
        .iter()
        .find_map(|(suffix, scale)| lower.strip_suffix(suffix).map(|n| (n.to_string(), *scale)))
        .unwrap_or((lower.clone(), 1.0));
    num.trim().parse::<f64>().ok().map(|x| x * scale)
}

/// Comma-separated `key=value` settings, e.g.
/// `fixed_rtt=12.5ms`, `offset=5ms,rtt=20ms`,
/// `forward=lognormal:40ms:0.5,backward=10ms,bandwidth=130kbps,buffer=20`.
/// `capacity_step` on its own names the preset of the same name.
impl FromStr for EmulatedSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut spec = EmulatedSpec::default();
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (key, value) = item.split_once('=').unwrap_or((item, ""));
            let bad = || HarnessError::Config(format!("bad emulated setting `{item}`"));
            let dur = |v: &str| parse_duration(v).ok_or_else(bad);
            match key.trim() {
                "capacity_step" if value.is_empty() => {
                    let seed = spec.seed;
                    spec = EmulatedSpec::capacity_step().with_seed(seed);
                }
                "fixed_rtt" | "rtt" => {
                    let rtt = dur(value)?;
                    spec.forward.delay = DelayDist::Fixed(rtt / 2);
                    spec.backward.delay = DelayDist::Fixed(rtt - rtt / 2);
                }
                "fixed_delay" | "delay" => {
                    spec.forward.delay = DelayDist::Fixed(dur(value)?);
                    spec.backward.delay = DelayDist::Fixed(0);
                }
                "forward" => spec.forward.delay = value.parse()?,
                "backward" => spec.backward.delay = value.parse()?,
                "offset" => spec.server_offset_ns = parse_signed_duration(value).ok_or_else(bad)?,
                "bandwidth" => {
                    spec.forward.bandwidth_bps = Some(parse_bandwidth(value).ok_or_else(bad)?)
                }
                "buffer" => spec.forward.buffer = Some(value.parse().map_err(|_| bad())?),
                "loss" => {
                    spec.forward.loss = LossSchedule::Bernoulli(value.parse().map_err(|_| bad())?)
                }
                "loss_steps" => {
                    let steps = value
                        .split('/')
                        .map(|step| {
                            let (l, p) = step.split_once(':').ok_or_else(bad)?;
                            Ok((l.parse().map_err(|_| bad())?, p.parse().map_err(|_| bad())?))
                        })
                        .collect::<Result<Vec<(f64, f64)>, HarnessError>>()?;
                    spec.forward.loss = LossSchedule::LoadSteps(steps);
                }
                "step_at" => {
                    let factor = spec.forward.bandwidth_step.map_or(1.0, |s| s.1);
                    spec.forward.bandwidth_step = Some((dur(value)?, factor));
                }
                "step_factor" => {
                    let at = spec.forward.bandwidth_step.map_or(0, |s| s.0);
                    spec.forward.bandwidth_step = Some((at, value.parse().map_err(|_| bad())?));
                }
                "reorder" => {
                    let on = matches!(value, "" | "1" | "true" | "yes");
                    spec.forward.fifo = !on;
                    spec.backward.fifo = !on;
                }
                "seed" => spec.seed = value.parse().map_err(|_| bad())?,
                _ => return Err(bad()),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for EmulatedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "forward={},backward={}",
            self.forward.delay, self.backward.delay
        )?;
        if let Some(bw) = self.forward.bandwidth_bps {
            write!(f, ",bandwidth={bw}bps")?;
        }
        if let Some((at, factor)) = self.forward.bandwidth_step {
            write!(f, ",step_at={}s,step_factor={factor}", secs(at))?;
        }
        if let Some(b) = self.forward.buffer {
            write!(f, ",buffer={b}")?;
        }
        match &self.forward.loss {
            LossSchedule::None => {}
            LossSchedule::Bernoulli(p) => write!(f, ",loss={p}")?,
            LossSchedule::LoadSteps(steps) => {
                let s: Vec<String> = steps.iter().map(|(l, p)| format!("{l}:{p}")).collect();
                write!(f, ",loss_steps={}", s.join("/"))?;
            }
        }
        if !self.forward.fifo {
            write!(f, ",reorder=1")?;
        }
        if self.server_offset_ns != 0 {
            write!(f, ",offset={}s", self.server_offset_ns as f64 / 1e9)?;
        }
        write!(f, ",seed={}", self.seed)
    }
}

#[derive(Debug)]
struct PathState {
    spec: PathSpec,
    rng: ChaCha8Rng,
    /// Departure times of packets queued or in transmission.
    queue: VecDeque<Nanos>,
    link_free: Nanos,
    last_arrival: Option<Nanos>,
    last_delivery: Nanos,
    ewma_gap_ns: Option<f64>,
}

impl PathState {
    fn new(spec: PathSpec, rng: ChaCha8Rng) -> Self {
        Self {
            spec,
            rng,
            queue: VecDeque::new(),
            link_free: 0,
            last_arrival: None,
            last_delivery: 0,
            ewma_gap_ns: None,
        }
    }

    fn offered_load(&self, now: Nanos, size: usize) -> f64 {
        let (Some(bw), Some(gap)) = (self.spec.bandwidth_at(now), self.ewma_gap_ns) else {
            return 0.0;
        };
        let capacity_pps = bw / (size as f64 * 8.0);
        (NANOS_PER_SEC as f64 / gap.max(1.0)) / capacity_pps
    }

    fn transit(&mut self, now: Nanos, size: usize) -> Option<Nanos> {
        if let Some(prev) = self.last_arrival {
            let gap = now.saturating_sub(prev) as f64;
            self.ewma_gap_ns = Some(match self.ewma_gap_ns {
                Some(g) => g + 0.125 * (gap - g),
                None => gap,
            });
        }
        self.last_arrival = Some(now);

        let p = self.spec.loss.probability(self.offered_load(now, size));
        if p > 0.0 && self.rng.random::<f64>() < p {
            return None;
        }

        let departure = match self.spec.bandwidth_at(now) {
            None => now,
            Some(bw) => {
                while self.queue.front().is_some_and(|&d| d <= now) {
                    self.queue.pop_front();
                }
                // one packet is on the wire, the rest wait in the buffer
                let waiting = self.queue.len().saturating_sub(1);
                if self.spec.buffer.is_some_and(|cap| waiting >= cap) {
                    return None;
                }
                let tx = from_secs(size as f64 * 8.0 / bw);
                let departure = self.link_free.max(now) + tx;
                self.link_free = departure;
                self.queue.push_back(departure);
                departure
            }
        };
        let mut arrival = departure + self.spec.delay.sample(&mut self.rng);
        if self.spec.fifo {
            arrival = arrival.max(self.last_delivery);
        }
        self.last_delivery = self.last_delivery.max(arrival);
        Some(arrival)
    }
}

/// Stateful emulated channel. Each direction must be fed packets in
/// nondecreasing time order; the returned instant is the delivery time,
/// or `None` when the packet is dropped.
#[derive(Debug)]
pub struct EmulatedChannel {
    forward: PathState,
    backward: PathState,
    server_offset_ns: i64,
}

impl EmulatedChannel {
    pub fn new(spec: &EmulatedSpec) -> Result<Self, HarnessError> {
        spec.validate()?;
        Ok(Self {
            forward: PathState::new(spec.forward.clone(), stream(spec.seed, 10)),
            backward: PathState::new(spec.backward.clone(), stream(spec.seed, 11)),
            server_offset_ns: spec.server_offset_ns,
        })
    }

    pub fn transit(&mut self, dir: Direction, now: Nanos, size: usize) -> Option<Nanos> {
        match dir {
            Direction::Forward => self.forward.transit(now, size),
            Direction::Backward => self.backward.transit(now, size),
        }
    }

    /// The responder's clock reading at sender time `now`.
    pub fn server_clock(&self, now: Nanos) -> Result<Nanos, HarnessError> {
        let t = now as i128 + self.server_offset_ns as i128;
        u64::try_from(t).map_err(|_| {
            HarnessError::Config(format!(
                "server clock would be negative at {}s with offset {}ns",
                secs(now),
                self.server_offset_ns
            ))
        })
    }

    /// Link rate currently in force on the forward path.
    pub fn forward_bandwidth(&self, now: Nanos) -> Option<f64> {
        self.forward.spec.bandwidth_at(now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_impairment_is_transparent() {
        let mut ch = EmulatedChannel::new(&EmulatedSpec::default()).unwrap();
        for t in [0, 5, 5, 9, 100] {
            assert_eq!(ch.transit(Direction::Forward, t, 1058), Some(t));
            assert_eq!(ch.transit(Direction::Backward, t, 1058), Some(t));
        }
    }

    #[test]
    fn bandwidth_serializes_back_to_back() {
        let mut spec = EmulatedSpec::default();
        // 8 kbit/s: one 1000-byte packet per second
        spec.forward.bandwidth_bps = Some(8000.0);
        spec.forward.buffer = Some(1);
        let mut ch = EmulatedChannel::new(&spec).unwrap();
        let s = NANOS_PER_SEC;
        assert_eq!(ch.transit(Direction::Forward, 0, 1000), Some(s));
        assert_eq!(ch.transit(Direction::Forward, 0, 1000), Some(2 * s));
        // one on the wire, one waiting: the buffer is full
        assert_eq!(ch.transit(Direction::Forward, 0, 1000), None);
        assert_eq!(ch.transit(Direction::Forward, s, 1000), Some(3 * s));
    }

    #[test]
    fn bandwidth_step_takes_effect() {
        let mut spec = EmulatedSpec::default();
        spec.forward.bandwidth_bps = Some(8000.0);
        spec.forward.bandwidth_step = Some((10 * NANOS_PER_SEC, 0.5));
        let mut ch = EmulatedChannel::new(&spec).unwrap();
        assert_eq!(ch.transit(Direction::Forward, 0, 1000), Some(NANOS_PER_SEC));
        let t = 10 * NANOS_PER_SEC;
        assert_eq!(
            ch.transit(Direction::Forward, t, 1000),
            Some(t + 2 * NANOS_PER_SEC)
        );
    }

    #[test]
    fn fifo_prevents_reordering() {
        let mut spec = EmulatedSpec::default();
        spec.forward.delay = DelayDist::Uniform {
            lo: 0,
            hi: 100_000_000,
        };
        let mut ch = EmulatedChannel::new(&spec).unwrap();
        let mut last = 0;
        for k in 0..1000 {
            let a = ch.transit(Direction::Forward, k * 1_000_000, 100).unwrap();
            assert!(a >= last && a >= k * 1_000_000);
            last = a;
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let spec: EmulatedSpec = "forward=lognormal:20ms:0.5,loss=0.1,seed=9"
            .parse()
            .unwrap();
        let run = || {
            let mut ch = EmulatedChannel::new(&spec).unwrap();
            (0..500)
                .map(|k| ch.transit(Direction::Forward, k * 1_000_000, 100))
                .collect::<Vec<_>>()
        };
        let a = run();
        assert_eq!(a, run());
        let lost = a.iter().filter(|x| x.is_none()).count();
        assert!((20..=80).contains(&lost), "{lost}");
    }

    #[test]
    fn load_steps_drop_by_offered_load() {
        let steps = LossSchedule::LoadSteps(vec![(0.6, 0.1), (0.95, 0.5)]);
        assert_eq!(steps.probability(0.3), 0.0);
        assert_eq!(steps.probability(0.7), 0.1);
        assert_eq!(steps.probability(2.0), 0.5);
    }

    #[test]
    fn spec_strings() {
        let s: EmulatedSpec = "fixed_rtt=12.5ms".parse().unwrap();
        assert_eq!(s.forward.delay, DelayDist::Fixed(6_250_000));
        assert_eq!(s.backward.delay, DelayDist::Fixed(6_250_000));
        let s: EmulatedSpec = "offset=-5ms,rtt=20ms,seed=3".parse().unwrap();
        assert_eq!(s.server_offset_ns, -5_000_000);
        assert_eq!(s.seed, 3);
        let s: EmulatedSpec = "fixed_delay=1s".parse().unwrap();
        assert_eq!(s.forward.delay, DelayDist::Fixed(NANOS_PER_SEC));
        assert_eq!(s.backward.delay, DelayDist::Fixed(0));
        let s: EmulatedSpec = "bandwidth=130kbps,buffer=20,loss_steps=0.6:0.05/0.95:0.3"
            .parse()
            .unwrap();
        assert_eq!(s.forward.bandwidth_bps, Some(130_000.0));
        assert_eq!(s.forward.buffer, Some(20));
        let c: EmulatedSpec = "capacity_step".parse().unwrap();
        assert_eq!(c, EmulatedSpec::capacity_step());
        for bad in [
            "rtt",
            "bogus=1",
            "loss=2",
            "forward=uniform:5ms:1ms",
            "loss_steps=0.5:0.1",
        ] {
            assert!(bad.parse::<EmulatedSpec>().is_err(), "{bad}");
        }
        let round: EmulatedSpec = c.to_string().parse().unwrap();
        assert_eq!(round, c);
    }
}
