//! Age statistics computed from generation/reception timestamp traces.
//!
//! The age of a flow at time `t` is `t - U(t)` where `U(t)` is the newest
//! generation stamp delivered by `t`. Between deliveries the age grows with
//! slope one; at a delivery it drops to that packet's system time.
//!
//! Averages are taken over the window between the first and last delivery.
//! Packets that arrive after a newer one has already been delivered are
//! obsolete: they cannot lower the age and are dropped before any statistic
//! is computed. Records without a reception stamp count as lost.

mod bias;
mod error;
mod io;
mod penalty;
mod stats;
mod trace;

pub use bias::{apply_bias, BiasModel};
pub use error::AgeError;
pub use io::{read_trace, read_trace_csv, write_trace, write_trace_csv, TRACE_HEADER};
pub use penalty::{penalty_average, penalty_bias, PenaltyKind, PenaltySpec};
pub use stats::{
    average_age, average_age_h, average_age_over, average_age_q, instantaneous_age,
    mean_system_time, peak_age, summarize, TraceSummary,
};
pub use trace::{AgeTrace, Delivery, PacketRecord};
