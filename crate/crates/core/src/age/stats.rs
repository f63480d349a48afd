use super::{AgeError, AgeTrace, Delivery};
use crate::time::{secs, secs_signed, Nanos};

/// Age at instant `t`, in seconds.
pub fn instantaneous_age(trace: &AgeTrace, t: Nanos) -> Result<f64, AgeError> {
    if t < trace.t_start() || t > trace.t_end() {
        return Err(AgeError::OutOfWindow {
            t,
            start: trace.t_start(),
            end: trace.t_end(),
        });
    }
    let newest = trace
        .records()
        .iter()
        .filter(|r| r.recv_ns.is_some_and(|recv| recv <= t))
        .map(|r| r.gen_ns)
        .max();
    Ok(match newest {
        Some(g) => secs_signed(t as i128 - g as i128),
        None => secs(trace.initial_age_ns() + (t - trace.t_start())),
    })
}

fn usable(trace: &AgeTrace) -> Result<Vec<Delivery>, AgeError> {
    let (d, _) = trace.deliveries();
    if d.len() < 2 || d[d.len() - 1].recv_ns == d[0].recv_ns {
        return Err(AgeError::InsufficientData {
            deliveries: d.len(),
        });
    }
    Ok(d)
}

fn span(d: &[Delivery]) -> i128 {
    d[d.len() - 1].recv_ns as i128 - d[0].recv_ns as i128
}

/// Average age from the trapezoids between consecutive generation stamps.
///
/// Each trapezoid `Q_i = (2 r_i - s_i - s_{i-1})(s_i - s_{i-1}) / 2` covers
/// the area contributed by update `i-1` until update `i` replaces it. Summed
/// over `i = 2..n` they cover the window `[r_1, r_n]` plus the triangle
/// `Y_1^2 / 2` left of `r_1` and minus the triangle `Y_n^2 / 2` right of
/// `r_n`; both corrections are applied so the result is the time average
/// over `[r_1, r_n]`.
pub fn average_age_q(trace: &AgeTrace) -> Result<f64, AgeError> {
    let d = usable(trace)?;
    // all areas are kept doubled, in ns^2
    let mut area2: i128 = 0;
    for w in d.windows(2) {
        let (s0, s1, r1) = (
            w[0].gen_ns as i128,
            w[1].gen_ns as i128,
            w[1].recv_ns as i128,
        );
        area2 += (2 * r1 - s1 - s0) * (s1 - s0);
    }
    let y_first = d[0].system_time();
    let y_last = d[d.len() - 1].system_time();
    area2 += y_last * y_last - y_first * y_first;
    Ok(ratio_secs(area2, 2 * span(&d)))
}

/// Average age from the areas between consecutive reception stamps:
/// `H_i = (r_i - r_{i-1}) Y_{i-1} + (r_i - r_{i-1})^2 / 2`.
pub fn average_age_h(trace: &AgeTrace) -> Result<f64, AgeError> {
    let d = usable(trace)?;
    let mut area2: i128 = 0;
    for w in d.windows(2) {
        let dr = w[1].recv_ns as i128 - w[0].recv_ns as i128;
        area2 += dr * (2 * w[0].system_time() + dr);
    }
    Ok(ratio_secs(area2, 2 * span(&d)))
}

/// Average age over an explicit window `[start, end]`, which must begin at
/// or after the first usable delivery. Past the last delivery the age keeps
/// growing.
pub fn average_age_over(trace: &AgeTrace, start: Nanos, end: Nanos) -> Result<f64, AgeError> {
    let (d, _) = trace.deliveries();
    if d.is_empty() || start < d[0].recv_ns || end <= start {
        return Err(AgeError::InsufficientData {
            deliveries: d.len(),
        });
    }
    let (a, b) = (start as i128, end as i128);
    let mut area2: i128 = 0;
    for (i, cur) in d.iter().enumerate() {
        let next = d.get(i + 1).map_or(b, |n| n.recv_ns as i128);
        let x = (cur.recv_ns as i128).max(a);
        let y = next.min(b);
        if y > x {
            let s = cur.gen_ns as i128;
            area2 += (y - s) * (y - s) - (x - s) * (x - s);
        }
    }
    Ok(ratio_secs(area2, 2 * (b - a)))
}

/// Average age; the reception-interval form.
pub fn average_age(trace: &AgeTrace) -> Result<f64, AgeError> {
    average_age_h(trace)
}

/// Mean of the age just before each delivery, `r_i - s_{i-1}`, over
/// `i = 2..n`.
pub fn peak_age(trace: &AgeTrace) -> Result<f64, AgeError> {
    let d = usable(trace)?;
    let total: i128 = d
        .windows(2)
        .map(|w| w[1].recv_ns as i128 - w[0].gen_ns as i128)
        .sum();
    Ok(ratio_secs(total, (d.len() - 1) as i128))
}

/// Mean system time `r_i - s_i` over non-obsolete deliveries.
pub fn mean_system_time(trace: &AgeTrace) -> Result<f64, AgeError> {
    let (d, _) = trace.deliveries();
    if d.is_empty() {
        return Err(AgeError::InsufficientData { deliveries: 0 });
    }
    let total: i128 = d.iter().map(Delivery::system_time).sum();
    Ok(ratio_secs(total, d.len() as i128))
}

/// `num / den` where `num` is in ns (or ns^2 with `den` in ns), reported in
/// seconds. The integer part is divided exactly before converting to float.
fn ratio_secs(num: i128, den: i128) -> f64 {
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    (q as f64 + r as f64 / den as f64) / 1e9
}

/// Everything `analyze` reports about a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub records: usize,
    pub deliveries: usize,
    pub obsolete: usize,
    pub lost: usize,
    pub avg_age_q: f64,
    pub avg_age_h: f64,
    pub peak_age: f64,
    pub mean_system_time: f64,
}

pub fn summarize(trace: &AgeTrace) -> Result<TraceSummary, AgeError> {
    let (d, obsolete) = trace.deliveries();
    Ok(TraceSummary {
        records: trace.len(),
        deliveries: d.len(),
        obsolete,
        lost: trace.lost(),
        avg_age_q: average_age_q(trace)?,
        avg_age_h: average_age_h(trace)?,
        peak_age: peak_age(trace)?,
        mean_system_time: mean_system_time(trace)?,
    })
}
