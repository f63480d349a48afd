use std::path::PathBuf;

use clap::{Args, ValueEnum};

use aoi_core::age::{average_age, write_trace_csv};
use aoi_core::harness::{EmulatedSpec, DEFAULT_DATA_SIZE};
use aoi_core::kv::KvDoc;
use aoi_core::policy::{run_closed_loop, train_q, Action, PolicyConfig, QAgent, RatePolicy};

use crate::manifest::{sidecar, write_atomic, RunManifest};
use crate::{report, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyName {
    Fixed,
    ZeroWait,
    Lazy,
    Acp,
    Qlearn,
}

#[derive(Debug, Clone, Args)]
pub struct PolicyArgs {
    #[arg(long, value_enum)]
    pub name: PolicyName,
    /// Emulated channel spec, e.g. `fixed_rtt=100ms` or `capacity_step`.
    #[arg(long)]
    pub emulated: String,
    /// `key=value` policy settings; they take precedence over flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sending rate for the fixed policy.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Virtual seconds to run rate policies for.
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, default_value_t = DEFAULT_DATA_SIZE)]
    pub size: usize,
    /// Learning iterations for qlearn.
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    /// Seconds the age grows by when qlearn pauses.
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    /// Resume updates a bin needs before it is reported.
    #[arg(long, default_value_t = 50)]
    pub min_visits: u64,
    #[arg(long, env = "AOI_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Trace CSV of the run (rate policies).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Decision log CSV; defaults to `<out>.decisions.csv`. For qlearn,
    /// the final Q table.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub gnuplot_hints: bool,
}

pub fn cmd_policy(a: &PolicyArgs, argv: &[String]) -> Result<(), CliError> {
    let cfg = match &a.config {
        Some(p) => PolicyConfig::load(p)?,
        None => PolicyConfig::default(),
    };
    let mut spec: EmulatedSpec = a.emulated.parse()?;
    if !a.emulated.contains("seed=") {
        spec.seed = a.seed;
    }
    let config = format!(
        "policy={:?} emulated={spec} {}",
        a.name,
        cfg.to_kv().render().trim_end().replace('\n', " ")
    );
    let manifest = RunManifest::new("policy", argv, config, Some(a.seed));
    let log_path = a
        .log
        .clone()
        .or_else(|| a.out.as_ref().map(|o| sidecar(o, "decisions.csv")));

    if a.name == PolicyName::Qlearn {
        let mut agent = QAgent::new(&cfg, a.seed)?;
        let r = train_q(&mut agent, &spec, a.step, a.iters, a.min_visits)?;
        let mut kv = KvDoc::new();
        kv.push("iterations", r.iterations)
            .push("episodes", r.episodes)
            .push("final_epsilon", r.final_epsilon)
            .push("steady_bins", r.steady_bins.len());
        let qr: Vec<f64> = r.steady_bins.iter().map(|b| b.3).collect();
        if !qr.is_empty() {
            kv.push("q_resume_mean", qr.iter().sum::<f64>() / qr.len() as f64)
                .push(
                    "q_resume_min",
                    qr.iter().cloned().fold(f64::INFINITY, f64::min),
                )
                .push(
                    "q_resume_max",
                    qr.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                );
        }
        if let Some(&last) = r.resume_trace.last() {
            kv.push("final_q_resume", last);
        }
        let tail_resume = r
            .tail_actions
            .iter()
            .filter(|&&x| x == Action::Resume)
            .count();
        kv.push(
            "greedy",
            if r.greedy_always_resume() {
                "resume"
            } else {
                "mixed"
            },
        )
        .push(
            "tail_resume_fraction",
            tail_resume as f64 / r.tail_actions.len().max(1) as f64,
        );
        if let Some(path) = &log_path {
            let mut csv =
                String::from("bin_lo_s,bin_hi_s,q_pause,q_resume,visits_pause,visits_resume\n");
            for b in 0..agent.bins() {
                let (lo, hi) = agent.bin_range(b);
                let [qp, qr] = agent.q_bin(b);
                let [vp, vr] = agent.visits_bin(b);
                csv.push_str(&format!("{lo},{hi},{qp},{qr},{vp},{vr}\n"));
            }
            write_atomic(path, csv.as_bytes())?;
            manifest.finish(&[path])?;
        }
        report(&kv);
        return Ok(());
    }

    let policy = match a.name {
        PolicyName::Fixed => RatePolicy::Fixed(
            a.rate
                .ok_or_else(|| CliError::config("the fixed policy needs --rate"))?,
        ),
        PolicyName::ZeroWait => RatePolicy::ZeroWait,
        PolicyName::Lazy => RatePolicy::Lazy,
        PolicyName::Acp => RatePolicy::acp(&cfg)?,
        PolicyName::Qlearn => unreachable!("handled above"),
    };
    let r = run_closed_loop(policy, &spec, &cfg, a.duration, a.size)?;
    let mut outputs = Vec::new();
    if let Some(out) = &a.out {
        let mut csv = Vec::new();
        write_trace_csv(&r.ack_trace, &mut csv)?;
        write_atomic(out, &csv)?;
        outputs.push(out.clone());
    }
    if let Some(path) = &log_path {
        write_atomic(path, r.decision_csv().as_bytes())?;
        outputs.push(path.clone());
    }
    if !outputs.is_empty() {
        let refs: Vec<&std::path::Path> = outputs.iter().map(|p| p.as_path()).collect();
        manifest.finish(&refs)?;
    }

    let mut kv = KvDoc::new();
    kv.push("sent", r.sent)
        .push("acked", r.acked)
        .push("expired", r.expired)
        .push("epochs", r.decisions.len())
        .push("mean_in_flight", r.mean_in_flight)
        .push("steady_rate_hz", r.send_rate(a.duration / 2.0, a.duration));
    if let Some(last) = r.decisions.last() {
        kv.push("final_rate_hz", last.rate_hz)
            .push("final_target_backlog", last.target_backlog);
    }
    if let Ok(age) = average_age(&r.server_trace) {
        kv.push("avg_age_s", age);
    }
    if let Ok(age) = average_age(&r.ack_trace) {
        kv.push("ack_age_s", age);
    }
    report(&kv);
    if a.gnuplot_hints {
        if let Some(path) = &log_path {
            eprintln!(
                "set datafile separator ','; plot '{}' every ::1 using 1:4 with lines title 'rate', '' every ::1 using 1:5 axes x1y2 with lines title 'age'",
                path.display()
            );
        }
    }
    Ok(())
}
