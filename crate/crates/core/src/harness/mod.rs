//! Measurement harness: a UDP echo server, a paced sampler that timestamps
//! its own packets and their echoes, clock-offset estimation by ping, and an
//! in-process emulated channel that runs the same protocol in virtual time.
//!
//! In the echo topology both stamps of every record come from the sampler's
//! monotonic clock, so no clock synchronization is needed. Wall-clock time
//! is only read inside time-request/time-response exchanges.

mod echo;
mod emulated;
mod error;
mod sampler;
mod schedule;
mod sync;
mod wire;

pub use echo::{EchoCore, EchoServer, EchoStats};
pub use emulated::{
    parse_bandwidth, DelayDist, Direction, EmulatedChannel, EmulatedSpec, LossSchedule, PathSpec,
};
pub use error::HarnessError;
pub use sampler::{rtt_age_bound, run_sampler, run_sampler_emulated, SamplerConfig, SamplerReport};
pub use schedule::RateSchedule;
pub use sync::{
    estimate_offset, estimate_offset_emulated, offset_from_samples, OffsetEstimate, PingSample,
    MIN_PINGS,
};
pub use wire::{MsgType, WireError, WirePacket, DEFAULT_DATA_SIZE, HEADER_LEN, MAGIC};

use std::time::{SystemTime, UNIX_EPOCH};

/// Nanoseconds since the Unix epoch from the wall clock.
pub fn wall_clock_ns() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0)
}
