//! Age of Information (AoI) toolkit.
//!
//! * [`age`] computes exact age statistics from timestamp traces.
//! * [`sim`] runs seedable discrete-event simulations of update flows and
//!   multi-source polling schedulers.
//! * [`policy`] holds sending policies: zero-wait, Lazy, an epoch-based
//!   age control loop and a tabular pause/resume Q-learning agent.
//! * [`harness`] measures age over real UDP paths or an in-process emulated
//!   channel.
//!
//! Timestamps are integer nanoseconds everywhere; conversion to seconds
//! happens only when a statistic is reported.

pub mod age;
pub mod harness;
pub mod kv;
pub mod policy;
pub mod sim;
pub mod time;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

pub use age::{
    apply_bias, average_age_h, average_age_q, instantaneous_age, peak_age, penalty_average,
    penalty_bias, AgeError, AgeTrace, BiasModel, PacketRecord, PenaltyKind, PenaltySpec,
    TraceSummary,
};
pub use time::Nanos;
