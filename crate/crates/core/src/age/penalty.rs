use std::fmt;
use std::str::FromStr;

use super::{AgeError, AgeTrace, BiasModel, Delivery};
use crate::time::{secs, secs_signed};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    /// `f(t) = α t`
    Linear,
    /// `f(t) = e^{α t} - 1`
    Exponential,
    /// `f(t) = ln(α t + 1)`
    Logarithmic,
}

impl FromStr for PenaltyKind {
    type Err = AgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "lin" => Ok(Self::Linear),
            "exponential" | "exp" => Ok(Self::Exponential),
            "logarithmic" | "log" => Ok(Self::Logarithmic),
            other => Err(AgeError::InvalidPenalty(format!("unknown kind `{other}`"))),
        }
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::Exponential => "exponential",
            Self::Logarithmic => "logarithmic",
        })
    }
}

/// A nonlinear (or linear) age penalty `f` with shape parameter `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    kind: PenaltyKind,
    alpha: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, alpha: f64) -> Result<Self, AgeError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(AgeError::InvalidPenalty(format!(
                "alpha must be positive and finite, got {alpha}"
            )));
        }
        Ok(Self { kind, alpha })
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Penalty of a single age value.
    pub fn value(&self, age_s: f64) -> f64 {
        let a = self.alpha;
        match self.kind {
            PenaltyKind::Linear => a * age_s,
            PenaltyKind::Exponential => (a * age_s).exp_m1(),
            PenaltyKind::Logarithmic => (a * age_s).ln_1p(),
        }
    }

    fn check_domain(&self, age_s: f64) -> Result<(), AgeError> {
        if self.kind == PenaltyKind::Logarithmic && self.alpha * age_s <= -1.0 {
            return Err(AgeError::PenaltyDomain { age_s });
        }
        Ok(())
    }

    /// Antiderivative `F(t) = ∫_0^t f`.
    pub fn integral(&self, t: f64) -> Result<f64, AgeError> {
        self.check_domain(t)?;
        let a = self.alpha;
        let x = a * t;
        Ok(match self.kind {
            PenaltyKind::Linear => 0.5 * a * t * t,
            PenaltyKind::Exponential => exp_excess(x) / a,
            PenaltyKind::Logarithmic => ((1.0 + x) * x.ln_1p() - x) / a,
        })
    }
}

/// `e^x - 1 - x` without cancellation for small `x`.
fn exp_excess(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        // x^2/2 + x^3/6 + x^4/24 + x^5/120
        let x2 = x * x;
        x2 * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    } else {
        x.exp_m1() - x
    }
}

/// `(t + 1/α) ln(α t + 1)`; the part of the logarithmic antiderivative that
/// survives a bias difference.
fn log_core(alpha: f64, t: f64) -> f64 {
    (t + 1.0 / alpha) * (alpha * t).ln_1p()
}

fn intervals(trace: &AgeTrace) -> Result<(Vec<Delivery>, f64), AgeError> {
    let (d, _) = trace.deliveries();
    if d.len() < 2 || d[d.len() - 1].recv_ns == d[0].recv_ns {
        return Err(AgeError::InsufficientData {
            deliveries: d.len(),
        });
    }
    let span = secs(d[d.len() - 1].recv_ns - d[0].recv_ns);
    Ok((d, span))
}

/// Time average of `f(Δ(t))` over the window between the first and last
/// delivery.
///
/// Over `[r_{i-1}, r_i]` the age runs linearly from `β = r_{i-1} - s_{i-1}`
/// to `θ = r_i - s_{i-1}`, so each interval contributes `F(θ) - F(β)`.
pub fn penalty_average(trace: &AgeTrace, p: &PenaltySpec) -> Result<f64, AgeError> {
    let (d, span) = intervals(trace)?;
    let mut total = 0.0;
    for w in d.windows(2) {
        let beta = secs_signed(w[0].recv_ns as i128 - w[0].gen_ns as i128);
        let theta = secs_signed(w[1].recv_ns as i128 - w[0].gen_ns as i128);
        total += p.integral(theta)? - p.integral(beta)?;
    }
    Ok(total / span)
}

/// Change in the time-average penalty caused by shifting every reception
/// stamp by a constant clock bias `B`.
///
/// The linear penalty shifts by exactly `αB`. For the exponential and
/// logarithmic penalties the per-interval term
/// `F(θ+B) - F(β+B) - F(θ) + F(β)` is summed over all intervals and divided
/// by the window length, which the bias does not change.
pub fn penalty_bias(trace: &AgeTrace, b: &BiasModel, p: &PenaltySpec) -> Result<f64, AgeError> {
    let (d, span) = intervals(trace)?;
    let a = p.alpha;
    let bias = b.secs();
    if p.kind == PenaltyKind::Linear {
        return Ok(a * bias);
    }
    let mut total = 0.0;
    for w in d.windows(2) {
        let beta = secs_signed(w[0].recv_ns as i128 - w[0].gen_ns as i128);
        let theta = secs_signed(w[1].recv_ns as i128 - w[0].gen_ns as i128);
        total += match p.kind {
            PenaltyKind::Exponential => {
                // (e^{α(θ+B)} - e^{α(β+B)} - e^{αθ} + e^{αβ}) / α
                //   = (e^{αB} - 1) e^{αβ} (e^{α(θ-β)} - 1) / α
                (a * bias).exp_m1() * (a * beta).exp() * (a * (theta - beta)).exp_m1() / a
            }
            PenaltyKind::Logarithmic => {
                for age in [beta, theta, beta + bias, theta + bias] {
                    p.check_domain(age)?;
                }
                // the linear parts of F cancel
                (log_core(a, theta + bias) - log_core(a, beta + bias))
                    - (log_core(a, theta) - log_core(a, beta))
            }
            PenaltyKind::Linear => unreachable!(),
        };
    }
    Ok(total / span)
}
