use std::io;

#[derive(Debug, thiserror::Error)]
pub enum AgeError {
    #[error("time {t} ns outside observation window [{start}, {end}]")]
    OutOfWindow { t: u64, start: u64, end: u64 },
    #[error("need at least 2 deliveries spanning a positive interval, got {deliveries}")]
    InsufficientData { deliveries: usize },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("bias of {bias_ns} ns drives a timestamp negative")]
    NegativeTimestamp { bias_ns: i64 },
    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),
    #[error("penalty undefined at age {age_s} s")]
    PenaltyDomain { age_s: f64 },
    #[error("trace csv line {line}: {msg}")]
    Csv { line: u64, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}
