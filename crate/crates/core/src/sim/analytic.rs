use super::SimError;

/// Steady-state average age of an FCFS M/M/1 queue,
/// `(1/μ)(1 + 1/ρ + ρ²/(1-ρ))`.
pub fn analytic_mm1_age(rho: f64, mu: f64) -> Result<f64, SimError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SimError::Domain(format!(
            "load must be in (0, 1), got {rho}"
        )));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(SimError::Domain(format!(
            "service rate must be positive, got {mu}"
        )));
    }
    Ok((1.0 + 1.0 / rho + rho * rho / (1.0 - rho)) / mu)
}

/// Mean number of packets in an M/M/1 system, `ρ/(1-ρ)`.
pub fn mm1_mean_in_system(rho: f64) -> Result<f64, SimError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SimError::Domain(format!(
            "load must be in (0, 1), got {rho}"
        )));
    }
    Ok(rho / (1.0 - rho))
}

/// Load minimizing [`analytic_mm1_age`], by golden-section search.
pub fn mm1_optimal_load() -> f64 {
    let f = |r: f64| 1.0 + 1.0 / r + r * r / (1.0 - r);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1e-3, 1.0 - 1e-3);
    while b - a > 1e-12 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}
