use std::io::ErrorKind;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::{
    Direction, EchoCore, EmulatedChannel, EmulatedSpec, HarnessError, MsgType, RateSchedule,
    WirePacket, DEFAULT_DATA_SIZE, HEADER_LEN,
};
use crate::age::{average_age, average_age_over, AgeError, AgeTrace, PacketRecord};
use crate::sim::EventQueue;
use crate::time::Nanos;

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub schedule: RateSchedule,
    /// Datagram size in bytes, header included.
    pub packet_size: usize,
    /// How long to keep listening for echoes after the last send.
    pub drain: Duration,
}

impl SamplerConfig {
    pub fn new(schedule: RateSchedule) -> Self {
        Self {
            schedule,
            packet_size: DEFAULT_DATA_SIZE,
            drain: Duration::from_secs(1),
        }
    }

    pub fn with_packet_size(mut self, size: usize) -> Self {
        self.packet_size = size;
        self
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.packet_size < HEADER_LEN || self.packet_size > u16::MAX as usize {
            return Err(HarnessError::Config(format!(
                "packet size must be in [{HEADER_LEN}, {}], got {}",
                u16::MAX,
                self.packet_size
            )));
        }
        Ok(())
    }
}

/// Result of one sampler run. Both stamps in `trace` are taken on the
/// sender's clock: generation at send, reception when the echo returns.
#[derive(Debug, Clone)]
pub struct SamplerReport {
    pub trace: AgeTrace,
    /// Arrival stamps at the responder on the sender's time base, known
    /// only when the channel is emulated.
    pub server_trace: Option<AgeTrace>,
    pub sent: u64,
    pub received: u64,
    pub unmatched: u64,
    pub duplicates: u64,
    pub malformed: u64,
    /// Set when a socket error cut the run short; `trace` then holds
    /// everything recorded up to that point.
    pub aborted: Option<String>,
}

impl SamplerReport {
    pub fn echo_rate(&self) -> f64 {
        if self.sent == 0 {
            0.0
        } else {
            self.received as f64 / self.sent as f64
        }
    }

    /// Age at the responder averaged over the same window the echo-based
    /// estimate uses.
    pub fn true_age(&self) -> Option<Result<f64, AgeError>> {
        let server = self.server_trace.as_ref()?;
        let (d, _) = self.trace.deliveries();
        let (Some(first), Some(last)) = (d.first(), d.last()) else {
            return Some(Err(AgeError::InsufficientData {
                deliveries: d.len(),
            }));
        };
        Some(average_age_over(server, first.recv_ns, last.recv_ns))
    }
}

/// Age estimate from echo stamps, treating each packet's round trip as
/// its delivery delay. Every echo returns no earlier than the packet
/// reached the responder, so this never falls below the responder-side age
/// over the same window.
pub fn rtt_age_bound(ack_trace: &AgeTrace) -> Result<f64, AgeError> {
    average_age(ack_trace)
}

/// Per-id bookkeeping shared by the live and emulated samplers.
#[derive(Debug, Default)]
struct Ledger {
    gen: Vec<Nanos>,
    ack: Vec<Option<Nanos>>,
    unmatched: u64,
    duplicates: u64,
    malformed: u64,
}

impl Ledger {
    fn sent(&mut self, id: u64, gen: Nanos) {
        debug_assert_eq!(id as usize, self.gen.len());
        self.gen.push(gen);
        self.ack.push(None);
    }

    fn reply(&mut self, datagram: &[u8], at: Nanos) {
        let pkt = match WirePacket::decode(datagram) {
            Ok(p) if p.msg_type == MsgType::EchoReply => p,
            _ => {
                self.malformed += 1;
                return;
            }
        };
        let idx = pkt.id as usize;
        match self.gen.get(idx) {
            Some(&g) if g == pkt.gen_ts => match self.ack[idx] {
                Some(_) => self.duplicates += 1,
                None => self.ack[idx] = Some(at),
            },
            _ => self.unmatched += 1,
        }
    }

    fn into_report(
        self,
        size: usize,
        server_trace: Option<AgeTrace>,
        aborted: Option<String>,
    ) -> Result<SamplerReport, HarnessError> {
        let received = self.ack.iter().flatten().count() as u64;
        let records: Vec<PacketRecord> = self
            .gen
            .iter()
            .zip(&self.ack)
            .enumerate()
            .map(|(id, (&g, &a))| PacketRecord {
                id: id as u64,
                gen_ns: g,
                recv_ns: a,
                size_bytes: size as u32,
            })
            .collect();
        Ok(SamplerReport {
            sent: records.len() as u64,
            trace: AgeTrace::from_records(records)?,
            server_trace,
            received,
            unmatched: self.unmatched,
            duplicates: self.duplicates,
            malformed: self.malformed,
            aborted,
        })
    }
}

enum SinkEvent {
    Sent { id: u64, gen: Nanos },
    Reply { bytes: Vec<u8>, at: Nanos },
    SenderDone(Option<String>),
    ReceiverFailed(String),
}

/// Runs the sampler against a live echo server. The send path and the
/// receive path run on their own threads and report to a single sink, so
/// a slow reply never delays a send.
pub fn run_sampler(dest: SocketAddr, cfg: &SamplerConfig) -> Result<SamplerReport, HarnessError> {
    cfg.validate()?;
    let bind: SocketAddr = if dest.is_ipv4() {
        "0.0.0.0:0".parse().expect("literal")
    } else {
        "[::]:0".parse().expect("literal")
    };
    let socket = UdpSocket::bind(bind)?;
    socket.connect(dest)?;
    socket.set_read_timeout(Some(Duration::from_millis(20)))?;
    let rx_socket = socket.try_clone()?;

    let base = Instant::now();
    let stamp = move || base.elapsed().as_nanos() as Nanos;
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, sink) = mpsc::channel::<SinkEvent>();

    let receiver = {
        let tx = tx.clone();
        let stop = Arc::clone(&stop);
        thread::spawn(move || {
            let mut buf = vec![0u8; 65_536];
            while !stop.load(Ordering::Relaxed) {
                match rx_socket.recv(&mut buf) {
                    Ok(n) => {
                        let at = stamp();
                        let _ = tx.send(SinkEvent::Reply {
                            bytes: buf[..n].to_vec(),
                            at,
                        });
                    }
                    Err(e)
                        if matches!(
                            e.kind(),
                            ErrorKind::WouldBlock
                                | ErrorKind::TimedOut
                                | ErrorKind::ConnectionRefused
                        ) => {}
                    Err(e) => {
                        let _ = tx.send(SinkEvent::ReceiverFailed(e.to_string()));
                        return;
                    }
                }
            }
        })
    };

    let sender = {
        let times = cfg.schedule.send_times();
        let size = cfg.packet_size;
        let stop = Arc::clone(&stop);
        thread::spawn(move || {
            let mut buf = Vec::with_capacity(size);
            for (id, t) in times.into_iter().enumerate() {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let due = base + Duration::from_nanos(t);
                let now = Instant::now();
                if due > now {
                    thread::sleep(due - now);
                }
                let gen = stamp();
                let pkt = WirePacket::data(id as u64, gen, size).expect("size validated");
                pkt.encode_into(&mut buf);
                let _ = tx.send(SinkEvent::Sent { id: id as u64, gen });
                if let Err(e) = socket.send(&buf) {
                    if e.kind() != ErrorKind::ConnectionRefused {
                        let _ = tx.send(SinkEvent::SenderDone(Some(e.to_string())));
                        return;
                    }
                }
            }
            let _ = tx.send(SinkEvent::SenderDone(None));
        })
    };

    let mut ledger = Ledger::default();
    let mut aborted = None;
    let mut deadline: Option<Instant> = None;
    loop {
        let wait = match deadline {
            Some(d) => match d.checked_duration_since(Instant::now()) {
                Some(w) => w,
                None => break,
            },
            None => Duration::from_millis(100),
        };
        match sink.recv_timeout(wait) {
            Ok(SinkEvent::Sent { id, gen }) => ledger.sent(id, gen),
            Ok(SinkEvent::Reply { bytes, at }) => ledger.reply(&bytes, at),
            Ok(SinkEvent::SenderDone(err)) => {
                if err.is_some() {
                    aborted = err;
                    break;
                }
                deadline = Some(Instant::now() + cfg.drain);
            }
            Ok(SinkEvent::ReceiverFailed(err)) => {
                aborted = Some(err);
                break;
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
    }
    stop.store(true, Ordering::Relaxed);
    let _ = sender.join();
    let _ = receiver.join();
    // whatever was queued before the threads stopped still counts
    while let Ok(ev) = sink.try_recv() {
        match ev {
            SinkEvent::Sent { id, gen } => ledger.sent(id, gen),
            SinkEvent::Reply { bytes, at } => ledger.reply(&bytes, at),
            _ => {}
        }
    }
    ledger.into_report(cfg.packet_size, None, aborted)
}

enum EmuEvent {
    Send(u64),
    AtServer(Vec<u8>),
    AtSender(Vec<u8>),
}

/// Runs the same protocol over an emulated channel in virtual time,
/// starting at time zero. Deterministic for a given spec and schedule.
pub fn run_sampler_emulated(
    spec: &EmulatedSpec,
    cfg: &SamplerConfig,
) -> Result<SamplerReport, HarnessError> {
    cfg.validate()?;
    let mut channel = EmulatedChannel::new(spec)?;
    let mut echo = EchoCore::default();
    let times = cfg.schedule.send_times();
    let mut events = EventQueue::new();
    if let Some(&t0) = times.first() {
        events.schedule(t0, EmuEvent::Send(0));
    }
    let mut ledger = Ledger::default();
    let mut server_recv: Vec<Option<Nanos>> = vec![None; times.len()];
    let size = cfg.packet_size;

    while let Some((now, ev)) = events.pop() {
        match ev {
            EmuEvent::Send(id) => {
                ledger.sent(id, now);
                let bytes = WirePacket::data(id, now, size)
                    .expect("size validated")
                    .encode();
                if let Some(at) = channel.transit(Direction::Forward, now, size) {
                    events.schedule(at, EmuEvent::AtServer(bytes));
                }
                if let Some(&next) = times.get(id as usize + 1) {
                    events.schedule(next, EmuEvent::Send(id + 1));
                }
            }
            EmuEvent::AtServer(bytes) => {
                if let Ok(p) = WirePacket::decode(&bytes) {
                    let slot = &mut server_recv[p.id as usize];
                    slot.get_or_insert(now);
                }
                let clock = channel.server_clock(now).unwrap_or(0);
                if let Some(reply) = echo.handle(&bytes, clock) {
                    if let Some(at) = channel.transit(Direction::Backward, now, reply.len()) {
                        events.schedule(at, EmuEvent::AtSender(reply));
                    }
                }
            }
            EmuEvent::AtSender(bytes) => ledger.reply(&bytes, now),
        }
    }

    let server_records: Vec<PacketRecord> = ledger
        .gen
        .iter()
        .zip(&server_recv)
        .enumerate()
        .map(|(id, (&g, &r))| PacketRecord {
            id: id as u64,
            gen_ns: g,
            recv_ns: r,
            size_bytes: size as u32,
        })
        .collect();
    let server_trace = AgeTrace::from_records(server_records)?;
    ledger.into_report(size, Some(server_trace), None)
}
