use std::path::PathBuf;

use clap::{Args, ValueEnum};

use aoi_core::age::{summarize, write_trace_csv};
use aoi_core::kv::KvDoc;
use aoi_core::sim::{simulate, sweep_rate, SweepHorizon, SWEEP_HEADER};

use crate::manifest::{sidecar, write_atomic, RunManifest};
use crate::model::ModelArgs;
use crate::{report, CliError};

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, env = "AOI_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Trace CSV to write; metadata goes to `<out>.meta`.
    #[arg(long)]
    pub out: PathBuf,
    /// Print suggested gnuplot commands to stderr.
    #[arg(long)]
    pub gnuplot_hints: bool,
}

pub fn cmd_sim(a: &SimArgs, argv: &[String]) -> Result<(), CliError> {
    let cfg = a.model.config(None, a.seed)?;
    let manifest = RunManifest::new("sim", argv, cfg.to_string(), Some(a.seed));
    let out = simulate(&cfg)?;
    let mut csv = Vec::new();
    write_trace_csv(&out.trace, &mut csv)?;
    write_atomic(&a.out, &csv)?;
    let meta_path = sidecar(&a.out, "meta");
    write_atomic(&meta_path, out.meta.to_kv().render().as_bytes())?;
    manifest.finish(&[&a.out, &meta_path])?;

    let mut kv = KvDoc::new();
    kv.push("arrivals", out.meta.arrivals)
        .push("delivered", out.meta.delivered)
        .push("loss", out.meta.losses())
        .push("unstable", out.meta.unstable);
    match summarize(&out.trace) {
        Ok(s) => {
            kv.push("avg_age_s", s.avg_age_h)
                .push("peak_age_s", s.peak_age)
                .push("mean_system_time_s", s.mean_system_time);
        }
        Err(e) => eprintln!("aoi: no age statistics: {e}"),
    }
    report(&kv);
    if a.gnuplot_hints {
        eprintln!(
            "set datafile separator ','; plot '{}' every ::1 using ($3/1e9):(($3-$2)/1e9) with points title 'system time'",
            a.out.display()
        );
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    /// Values are arrival rates per second.
    Rate,
    /// Values are loads, scaled by the service rate.
    Rho,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Points to run: `a,b,c` or `from:to:count`.
    #[arg(long)]
    pub values: String,
    #[arg(long, value_enum, default_value = "rate")]
    pub axis: Axis,
    /// Space `from:to:count` points geometrically.
    #[arg(long)]
    pub log: bool,
    /// Seconds of generation per point; otherwise every point uses
    /// --arrivals.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, env = "AOI_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub gnuplot_hints: bool,
}

/// Expands `a,b,c` or `from:to:count`.
pub fn parse_values(text: &str, log: bool) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::config(format!("bad --values `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [from, to, count] => {
            let (a, b) = (num(from)?, num(to)?);
            let n: usize = count.trim().parse().map_err(|_| bad())?;
            if n == 0 || (log && (a <= 0.0 || b <= 0.0)) {
                return Err(bad());
            }
            if n == 1 {
                vec![a]
            } else {
                (0..n)
                    .map(|k| {
                        let f = k as f64 / (n - 1) as f64;
                        if log {
                            a * (b / a).powf(f)
                        } else {
                            a + (b - a) * f
                        }
                    })
                    .collect()
            }
        }
        [list] => list.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err(bad()),
    };
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(CliError::config("sweep values must be positive"));
    }
    Ok(values)
}

pub fn cmd_sweep(a: &SweepArgs, argv: &[String]) -> Result<(), CliError> {
    let values = parse_values(&a.values, a.log)?;
    let scale = match a.axis {
        Axis::Rate => 1.0,
        Axis::Rho => a.model.service_rate()?,
    };
    let rates: Vec<f64> = values.iter().map(|v| v * scale).collect();
    let template = a.model.config(Some(rates[0]), a.seed)?;
    let manifest = RunManifest::new("sweep", argv, template.to_string(), Some(a.seed));
    let horizon = match a.duration {
        Some(s) if s > 0.0 && s.is_finite() => SweepHorizon::Duration(s),
        Some(s) => {
            return Err(CliError::config(format!(
                "duration must be positive, got {s}"
            )))
        }
        None => SweepHorizon::Template,
    };
    let rows = sweep_rate(&template, &rates, horizon)?;
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    write_atomic(&a.out, csv.as_bytes())?;
    manifest.finish(&[&a.out])?;

    let best = rows
        .iter()
        .filter(|r| r.avg_age_s.is_finite())
        .min_by(|x, y| x.avg_age_s.total_cmp(&y.avg_age_s));
    let mut kv = KvDoc::new();
    kv.push("points", rows.len());
    if let Some(b) = best {
        kv.push("min_age_rate_hz", b.rate_hz)
            .push("min_avg_age_s", b.avg_age_s)
            .push("mean_in_system_at_min", b.mean_in_system);
    }
    report(&kv);
    if a.gnuplot_hints {
        eprintln!(
            "set datafile separator ','; set logscale x; plot '{}' every ::1 using 1:2 with linespoints title 'average age', '' every ::1 using 1:3 with linespoints title 'peak age'",
            a.out.display()
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_lists() {
        assert_eq!(parse_values("1,2.5,4", false).unwrap(), vec![1.0, 2.5, 4.0]);
        assert_eq!(parse_values("1:3:3", false).unwrap(), vec![1.0, 2.0, 3.0]);
        let g = parse_values("1:100:3", true).unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert_eq!(parse_values("7:9:1", false).unwrap(), vec![7.0]);
        for bad in ["", "a", "1:2", "0,1", "1:2:0", "0:5:3"] {
            assert!(parse_values(bad, bad == "0:5:3").is_err(), "{bad}");
        }
    }
}
