//! Nanosecond time helpers.

/// Integer nanoseconds. All stamps and durations are carried in this unit.
pub type Nanos = u64;

pub const NANOS_PER_SEC: u64 = 1_000_000_000;

#[inline]
pub fn secs(ns: u64) -> f64 {
    ns as f64 / NANOS_PER_SEC as f64
}

#[inline]
pub fn secs_signed(ns: i128) -> f64 {
    ns as f64 / NANOS_PER_SEC as f64
}

/// Rounds a non-negative duration in seconds to nanoseconds.
#[inline]
pub fn from_secs(s: f64) -> Nanos {
    debug_assert!(s >= 0.0 && s.is_finite(), "bad duration {s}");
    (s * NANOS_PER_SEC as f64).round() as Nanos
}

#[inline]
pub fn from_secs_signed(s: f64) -> i64 {
    (s * NANOS_PER_SEC as f64).round() as i64
}

/// Parses a duration such as `12.5ms`, `1s`, `250us` or `40ns`.
/// A bare number is taken as seconds.
pub fn parse_duration(text: &str) -> Option<Nanos> {
    let t = text.trim();
    let (num, scale) = if let Some(v) = t.strip_suffix("ns") {
        (v, 1e-9)
    } else if let Some(v) = t.strip_suffix("us") {
        (v, 1e-6)
    } else if let Some(v) = t.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = t.strip_suffix('s') {
        (v, 1.0)
    } else {
        (t, 1.0)
    };
    let v: f64 = num.trim().parse().ok()?;
    if !v.is_finite() || v < 0.0 {
        return None;
    }
    Some(from_secs(v * scale))
}

/// Signed variant of [`parse_duration`], accepting a leading `-`.
pub fn parse_signed_duration(text: &str) -> Option<i64> {
    let t = text.trim();
    match t.strip_prefix('-') {
        Some(rest) => parse_duration(rest).map(|v| -(v as i64)),
        None => parse_duration(t).map(|v| v as i64),
    }
}
