//! Sending policies driven by ACK feedback: fixed rate, zero-wait, Lazy,
//! an epoch-based backlog controller (ACP), and a tabular Q-learning agent
//! that chooses between pausing and resuming a sampler.
//!
//! Policies are plain state machines. [`run_closed_loop`] drives the rate
//! policies over an emulated channel in virtual time, and [`train_q`] runs
//! the pause/resume environment for the learning agent.

mod acp;
mod closed_loop;
mod config;
mod observe;
mod qlearn;

pub use acp::{acp_epoch_update, AcpAction, AcpState};
pub use closed_loop::{
    run_closed_loop, ClosedLoopReport, DecisionRow, RatePolicy, DECISION_HEADER,
};
pub use config::PolicyConfig;
pub use observe::{lazy_rate, zero_wait_next, Ewma, PolicyObservation};
pub use qlearn::{age_cost, q_act, q_step, train_q, Action, QAgent, QReport};

use crate::age::AgeError;
use crate::harness::HarnessError;
use crate::kv::KvError;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("policy not ready: {0}")]
    NotReady(&'static str),
    #[error("invalid policy config: {0}")]
    Config(String),
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Age(#[from] AgeError),
}
