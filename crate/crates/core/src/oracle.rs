//! Grid-integration reference for age statistics.
//!
//! Evaluates the age path on a uniform grid by scanning the raw records,
//! without going through the closed-form code in [`crate::age`]. Traces fed
//! to it must have stamps on the grid so that every delivery falls on a cell
//! boundary and the midpoint rule sees a smooth integrand in every cell.

use crate::age::{AgeTrace, PenaltySpec};

/// Age path `(t, Δ(t))` sampled at the midpoints of a `step_ns` grid over
/// `[first delivery, last non-obsolete delivery]`, with `bias_ns` added to every
/// reception stamp.
pub fn age_midpoints(trace: &AgeTrace, step_ns: u64, bias_ns: i64) -> Vec<f64> {
    let mut deliveries: Vec<(i128, i128)> = trace
        .records()
        .iter()
        .filter_map(|r| {
            r.recv_ns
                .map(|v| (v as i128 + bias_ns as i128, r.gen_ns as i128))
        })
        .collect();
    deliveries.sort();
    assert!(deliveries.len() >= 2, "oracle needs two deliveries");
    let step = step_ns as i128;
    let first = deliveries[0].0;
    // the window ends at the last delivery that is not obsolete
    let mut seen = i128::MIN;
    let mut last = first;
    for &(r, g) in &deliveries {
        if g > seen {
            seen = g;
            last = r;
        }
    }
    assert_eq!((last - first) % step, 0, "trace not aligned to the grid");
    for &(r, _) in &deliveries {
        assert_eq!((r - first) % step, 0, "delivery off the grid");
    }
    let cells = ((last - first) / step) as usize;
    let mut out = Vec::with_capacity(cells);
    let mut next = 0usize;
    let mut newest = i128::MIN;
    for k in 0..cells {
        // twice the midpoint, to stay in integers
        let mid2 = 2 * first + (2 * k as i128 + 1) * step;
        while next < deliveries.len() && 2 * deliveries[next].0 <= mid2 {
            newest = newest.max(deliveries[next].1);
            next += 1;
        }
        out.push((mid2 - 2 * newest) as f64 / 2e9);
    }
    out
}

/// Midpoint-rule time average of `f(Δ(t))`.
pub fn grid_penalty_average(trace: &AgeTrace, p: &PenaltySpec, step_ns: u64, bias_ns: i64) -> f64 {
    let ages = age_midpoints(trace, step_ns, bias_ns);
    let n = ages.len() as f64;
    pairwise_sum(&ages.iter().map(|&a| p.value(a)).collect::<Vec<_>>()) / n
}

/// Midpoint-rule time average of `Δ(t)`.
pub fn grid_average_age(trace: &AgeTrace, step_ns: u64) -> f64 {
    let ages = age_midpoints(trace, step_ns, 0);
    pairwise_sum(&ages) / ages.len() as f64
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}
