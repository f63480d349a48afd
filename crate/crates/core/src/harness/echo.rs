use std::fmt;
use std::io::ErrorKind;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use super::{wall_clock_ns, HarnessError, MsgType, WirePacket};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EchoStats {
    pub rx: u64,
    pub echoed: u64,
    pub time_replies: u64,
    pub malformed: u64,
}

impl fmt::Display for EchoStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rx={} echoed={} malformed={}",
            self.rx, self.echoed, self.malformed
        )
    }
}

/// Socket-free echo logic, shared by the UDP server and the emulator.
#[derive(Debug, Default)]
pub struct EchoCore {
    pub stats: EchoStats,
}

impl EchoCore {
    /// Reply to one datagram, if it deserves one. Data comes back
    /// byte-identical apart from the type byte; a time request is answered
    /// with the responder's clock in `extra_ts`.
    pub fn handle(&mut self, datagram: &[u8], clock_ns: u64) -> Option<Vec<u8>> {
        self.stats.rx += 1;
        match WirePacket::decode(datagram) {
            Ok(p) if p.msg_type == MsgType::Data => {
                let mut reply = datagram.to_vec();
                reply[4] = MsgType::EchoReply as u8;
                self.stats.echoed += 1;
                Some(reply)
            }
            Ok(p) if p.msg_type == MsgType::TimeRequest => {
                let reply = WirePacket {
                    msg_type: MsgType::TimeResponse,
                    extra_ts: clock_ns,
                    ..p
                };
                self.stats.time_replies += 1;
                Some(reply.encode())
            }
            _ => {
                self.stats.malformed += 1;
                None
            }
        }
    }
}

/// UDP echo server. Datagrams are handled one at a time in arrival order.
pub struct EchoServer {
    socket: UdpSocket,
    core: EchoCore,
}

impl EchoServer {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Self, HarnessError> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        Ok(Self {
            socket,
            core: EchoCore::default(),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, HarnessError> {
        Ok(self.socket.local_addr()?)
    }

    pub fn stats(&self) -> EchoStats {
        self.core.stats
    }

    /// Serves until `stop` is set. `on_tick` receives the running counters
    /// once per second.
    pub fn serve(
        &mut self,
        stop: &AtomicBool,
        mut on_tick: impl FnMut(&EchoStats),
    ) -> Result<EchoStats, HarnessError> {
        let mut buf = vec![0u8; 65_536];
        let mut next_tick = Instant::now() + Duration::from_secs(1);
        while !stop.load(Ordering::Relaxed) {
            match self.socket.recv_from(&mut buf) {
                Ok((n, peer)) => {
                    if let Some(reply) = self.core.handle(&buf[..n], wall_clock_ns()) {
                        // a vanished peer is not the server's problem
                        let _ = self.socket.send_to(&reply, peer);
                    }
                }
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(e) if e.kind() == ErrorKind::ConnectionRefused => {}
                Err(e) => return Err(e.into()),
            }
            if Instant::now() >= next_tick {
                on_tick(&self.core.stats);
                next_tick += Duration::from_secs(1);
            }
        }
        Ok(self.core.stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_is_echoed_verbatim() {
        let mut core = EchoCore::default();
        let pkt = WirePacket::data(42, 777, 100).unwrap().encode();
        let reply = core.handle(&pkt, 5).unwrap();
        assert_eq!(reply[4], 0x02);
        assert_eq!(reply[..4], pkt[..4]);
        assert_eq!(reply[5..], pkt[5..]);
        let d = WirePacket::decode(&reply).unwrap();
        assert_eq!((d.id, d.gen_ts), (42, 777));
    }

    #[test]
    fn time_request_gets_clock() {
        let mut core = EchoCore::default();
        let req = WirePacket::time_request(3, 10).encode();
        let rep = WirePacket::decode(&core.handle(&req, 12345).unwrap()).unwrap();
        assert_eq!(rep.msg_type, MsgType::TimeResponse);
        assert_eq!((rep.id, rep.gen_ts, rep.extra_ts), (3, 10, 12345));
    }

    #[test]
    fn garbage_is_counted() {
        let mut core = EchoCore::default();
        assert!(core.handle(b"hello", 0).is_none());
        let reply = WirePacket::data(1, 1, 40).unwrap().encode();
        let mut echo_of_echo = reply.clone();
        echo_of_echo[4] = 0x02;
        assert!(core.handle(&echo_of_echo, 0).is_none());
        assert_eq!(
            core.stats,
            EchoStats {
                rx: 2,
                echoed: 0,
                time_replies: 0,
                malformed: 2
            }
        );
        assert_eq!(core.stats.to_string(), "rx=2 echoed=0 malformed=2");
    }
}
