use std::io::ErrorKind;
use std::net::{SocketAddr, UdpSocket};
use std::time::{Duration, Instant};

use super::{
    wall_clock_ns, Direction, EchoCore, EmulatedChannel, EmulatedSpec, HarnessError, MsgType,
    WirePacket,
};
use crate::time::{secs, Nanos, NANOS_PER_SEC};

/// Fewest exchanges an offset estimate is computed from.
pub const MIN_PINGS: usize = 10;

/// One time-request exchange: local send and receive stamps around the
/// responder's own clock reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PingSample {
    pub t_send: Nanos,
    pub server_ts: Nanos,
    pub t_recv: Nanos,
}

impl PingSample {
    pub fn rtt_ns(&self) -> Nanos {
        self.t_recv - self.t_send
    }

    /// Twice this exchange's offset estimate, kept integral.
    fn offset2(&self) -> i128 {
        2 * self.server_ts as i128 - self.t_send as i128 - self.t_recv as i128
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetEstimate {
    /// Responder clock minus local clock.
    pub offset_ns: i64,
    /// Round trip of every exchange, in seconds.
    pub rtt_samples: Vec<f64>,
    /// Sample standard deviation of the per-exchange offsets, in ns.
    pub confidence: f64,
}

/// Offset under the symmetric-delay assumption: the responder stamped the
/// request half a round trip after it was sent. A path whose forward delay
/// is `f` and return delay `b` biases each estimate by `(f - b) / 2`.
pub fn offset_from_samples(samples: &[PingSample]) -> Result<OffsetEstimate, HarnessError> {
    if samples.len() < MIN_PINGS {
        return Err(HarnessError::TooFewPings {
            need: MIN_PINGS,
            got: samples.len(),
        });
    }
    let n = samples.len() as i128;
    let sum2: i128 = samples.iter().map(PingSample::offset2).sum();
    let offset_ns = (sum2 as f64 / (2 * n) as f64).round() as i64;
    let mean = sum2 as f64 / (2 * n) as f64;
    let var = samples
        .iter()
        .map(|s| {
            let d = s.offset2() as f64 / 2.0 - mean;
            d * d
        })
        .sum::<f64>()
        / (n - 1) as f64;
    Ok(OffsetEstimate {
        offset_ns,
        rtt_samples: samples.iter().map(|s| secs(s.rtt_ns())).collect(),
        confidence: var.sqrt(),
    })
}

/// Pings a live responder `n_pings` times using the wall clock. Each ping
/// is retried up to `retries` times before giving up.
pub fn estimate_offset(
    peer: SocketAddr,
    n_pings: usize,
    timeout: Duration,
    retries: u32,
) -> Result<OffsetEstimate, HarnessError> {
    let bind: SocketAddr = if peer.is_ipv4() {
        "0.0.0.0:0".parse().expect("literal")
    } else {
        "[::]:0".parse().expect("literal")
    };
    let socket = UdpSocket::bind(bind)?;
    socket.connect(peer)?;
    let mut buf = [0u8; 2048];
    let mut samples = Vec::with_capacity(n_pings);
    let mut id = 0u64;
    for _ in 0..n_pings {
        let mut got = None;
        for _ in 0..retries.max(1) {
            id += 1;
            let t_send = wall_clock_ns();
            socket.send(&WirePacket::time_request(id, t_send).encode())?;
            let deadline = Instant::now() + timeout;
            while let Some(left) = deadline.checked_duration_since(Instant::now()) {
                socket.set_read_timeout(Some(left.max(Duration::from_micros(100))))?;
                let n = match socket.recv(&mut buf) {
                    Ok(n) => n,
                    Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                        break
                    }
                    Err(e) if e.kind() == ErrorKind::ConnectionRefused => continue,
                    Err(e) => return Err(e.into()),
                };
                let t_recv = wall_clock_ns();
                match WirePacket::decode(&buf[..n]) {
                    Ok(p) if p.msg_type == MsgType::TimeResponse && p.id == id => {
                        got = Some(PingSample {
                            t_send,
                            server_ts: p.extra_ts,
                            t_recv,
                        });
                        break;
                    }
                    // late answers to earlier attempts are ignored
                    _ => {}
                }
            }
            if got.is_some() {
                break;
            }
        }
        samples.push(got.ok_or(HarnessError::Timeout {
            attempts: retries.max(1),
        })?);
    }
    offset_from_samples(&samples)
}

/// Emulated counterpart of [`estimate_offset`]; pings go out one at a
/// time, 10 ms after the previous answer, starting an hour into virtual
/// time so negative offsets keep the responder clock positive.
pub fn estimate_offset_emulated(
    spec: &EmulatedSpec,
    n_pings: usize,
) -> Result<OffsetEstimate, HarnessError> {
    const RETRIES: u32 = 5;
    let timeout = NANOS_PER_SEC;
    let mut channel = EmulatedChannel::new(spec)?;
    let mut echo = EchoCore::default();
    let mut now: Nanos = 3600 * NANOS_PER_SEC;
    let mut samples = Vec::with_capacity(n_pings);
    let mut id = 0u64;
    for _ in 0..n_pings {
        let mut got = None;
        for _ in 0..RETRIES {
            id += 1;
            let t_send = now;
            let req = WirePacket::time_request(id, t_send).encode();
            let reply = channel
                .transit(Direction::Forward, t_send, req.len())
                .map(|at| -> Result<_, HarnessError> {
                    let bytes = echo.handle(&req, channel.server_clock(at)?);
                    Ok(bytes.and_then(|b| {
                        channel
                            .transit(Direction::Backward, at, b.len())
                            .map(|back| (back, b))
                    }))
                })
                .transpose()?
                .flatten();
            match reply {
                Some((back, bytes)) if back - t_send <= timeout => {
                    let p = WirePacket::decode(&bytes)?;
                    got = Some(PingSample {
                        t_send,
                        server_ts: p.extra_ts,
                        t_recv: back,
                    });
                    now = back + 10_000_000;
                    break;
                }
                _ => now = t_send + timeout,
            }
        }
        samples.push(got.ok_or(HarnessError::Timeout { attempts: RETRIES })?);
    }
    offset_from_samples(&samples)
}
