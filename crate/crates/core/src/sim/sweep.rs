use rayon::prelude::*;

use super::{simulate, SimConfig, SimError};
use crate::age::{average_age, peak_age};

pub const SWEEP_HEADER: &str = "rate_hz,avg_age_s,peak_age_s,loss,avg_delay_s";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rate_hz: f64,
    /// NaN when the run delivered fewer than two updates.
    pub avg_age_s: f64,
    pub peak_age_s: f64,
    pub loss: u64,
    pub avg_delay_s: f64,
    pub mean_in_system: f64,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.rate_hz, self.avg_age_s, self.peak_age_s, self.loss, self.avg_delay_s
        )
    }
}

/// How long each sweep point runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepHorizon {
    /// Use the template's arrival count at every rate.
    Template,
    /// Run each point for this many seconds of generation, `rate × secs`
    /// arrivals.
    Duration(f64),
}

/// One fresh simulation per rate, all with the template's seed. Points run
/// in parallel; rows come back in input order.
pub fn sweep_rate(
    template: &SimConfig,
    rates: &[f64],
    horizon: SweepHorizon,
) -> Result<Vec<SweepRow>, SimError> {
    if rates.is_empty() {
        return Err(SimError::Config("sweep needs at least one rate".into()));
    }
    let configs = rates
        .iter()
        .map(|&rate| {
            let arrival = template.arrival.with_rate(rate).ok_or_else(|| {
                SimError::Config("cannot sweep the rate of a generate-at-will source".into())
            })?;
            let mut cfg = template.clone();
            cfg.arrival = arrival;
            if let SweepHorizon::Duration(secs) = horizon {
                cfg.horizon = ((rate * secs).round() as u64).max(2);
            }
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    configs
        .par_iter()
        .map(|cfg| {
            let out = simulate(cfg)?;
            Ok(SweepRow {
                rate_hz: cfg.arrival.rate().unwrap_or(f64::NAN),
                avg_age_s: average_age(&out.trace).unwrap_or(f64::NAN),
                peak_age_s: peak_age(&out.trace).unwrap_or(f64::NAN),
                loss: out.meta.losses(),
                avg_delay_s: out.meta.avg_delay_s,
                mean_in_system: out.meta.mean_in_system,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ArrivalProcess, ChannelModel};

    #[test]
    fn single_rate_matches_simulate() {
        let cfg = SimConfig::mm1(0.5, 1.0, 5_000, 11);
        let rows = sweep_rate(&cfg, &[0.5], SweepHorizon::Template).unwrap();
        assert_eq!(rows.len(), 1);
        let out = simulate(&cfg).unwrap();
        assert_eq!(rows[0].avg_age_s, average_age(&out.trace).unwrap());
        assert_eq!(rows[0].loss, 0);
    }

    #[test]
    fn empty_sweep_is_an_error() {
        let cfg = SimConfig::mm1(0.5, 1.0, 10, 1);
        assert!(sweep_rate(&cfg, &[], SweepHorizon::Template).is_err());
    }

    #[test]
    fn udp_regimes_drop_before_delaying() {
        let ch = ChannelModel::udp_regimes(130e3, 1058, 0.0);
        let mu = ch.service_rate();
        let cfg = SimConfig::through_channel(ArrivalProcess::Poisson { rate: mu * 0.3 }, ch, 1, 21)
            .with_buffer(Some(64));
        let rates: Vec<f64> = [0.3, 0.5, 0.8, 0.9, 1.5, 2.5]
            .iter()
            .map(|f| f * mu)
            .collect();
        let rows = sweep_rate(&cfg, &rates, SweepHorizon::Duration(600.0)).unwrap();
        let relaxed = &rows[0];
        let busy = &rows[3];
        let panicked = &rows[5];
        assert_eq!(relaxed.loss, 0);
        assert!(busy.loss > 0, "busy regime should drop");
        // busy delay stays close to the relaxed one while panicked delay grows
        assert!(busy.avg_delay_s < 1.6 * rows[1].avg_delay_s, "{rows:?}");
        assert!(panicked.avg_delay_s > 3.0 * busy.avg_delay_s, "{rows:?}");
    }
}
