use super::{AgeError, AgeTrace, PacketRecord};
use crate::time::{from_secs_signed, secs_signed};

/// Constant offset of the receiver clock relative to the sender clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BiasModel {
    pub bias_ns: i64,
}

impl BiasModel {
    pub fn new(bias_ns: i64) -> Self {
        Self { bias_ns }
    }

    pub fn from_secs(s: f64) -> Self {
        Self::new(from_secs_signed(s))
    }

    pub fn secs(&self) -> f64 {
        secs_signed(self.bias_ns as i128)
    }
}

/// Shifts every reception stamp (and the window) by the bias, leaving
/// generation stamps untouched. This is what a sender-side calculator sees
/// when the receiver reports stamps from its own, offset clock.
pub fn apply_bias(trace: &AgeTrace, b: &BiasModel) -> Result<AgeTrace, AgeError> {
    if b.bias_ns == 0 {
        return Ok(trace.clone());
    }
    let shift = |t: u64| -> Result<u64, AgeError> {
        let v = t as i128 + b.bias_ns as i128;
        u64::try_from(v).map_err(|_| AgeError::NegativeTimestamp { bias_ns: b.bias_ns })
    };
    let (records, start, end, init, declared) = trace.clone().into_parts();
    let records = records
        .into_iter()
        .map(|r| {
            Ok(PacketRecord {
                recv_ns: r.recv_ns.map(shift).transpose()?,
                ..r
            })
        })
        .collect::<Result<Vec<_>, AgeError>>()?;
    let min_recv = records.iter().filter_map(|r| r.recv_ns).min();
    let start = min_recv.map_or(start, |m| start.min(m));
    let end = if b.bias_ns > 0 { shift(end)? } else { end };
    AgeTrace::with_bias(records, start, end, init, declared + b.bias_ns)
}
