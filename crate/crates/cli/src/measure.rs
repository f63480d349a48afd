use std::io::Write;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use clap::{Args, Subcommand};

use aoi_core::age::{peak_age, write_trace_csv};
use aoi_core::harness::{
    estimate_offset, estimate_offset_emulated, rtt_age_bound, run_sampler, run_sampler_emulated,
    EchoServer, EmulatedSpec, RateSchedule, SamplerConfig, DEFAULT_DATA_SIZE,
};
use aoi_core::kv::KvDoc;
use aoi_core::time::from_secs;

use crate::manifest::{write_atomic, RunManifest};
use crate::sim::parse_values;
use crate::{parse_dur, report, CliError};

#[derive(Debug, Clone, Args)]
pub struct MeasureArgs {
    #[command(subcommand)]
    pub mode: MeasureMode,
}

#[derive(Debug, Clone, Subcommand)]
pub enum MeasureMode {
    /// Echo every data packet back to its sender until interrupted.
    EchoServer {
        #[arg(long, default_value = "0.0.0.0")]
        bind: String,
        /// UDP port; 0 picks a free one.
        #[arg(long, default_value_t = 9000)]
        port: u16,
        /// Stop after this many seconds instead of waiting for a signal.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Send timestamped packets and record when their echoes return.
    Sampler(SamplerArgs),
    /// Estimate the responder's clock offset from time-request pings.
    Sync {
        /// Responder address, host:port.
        #[arg(
            long,
            conflicts_with = "emulated",
            required_unless_present = "emulated"
        )]
        peer: Option<String>,
        /// Emulated channel spec instead of a live peer.
        #[arg(long)]
        emulated: Option<String>,
        #[arg(long, default_value_t = 100)]
        pings: usize,
        #[arg(long, value_parser = parse_dur, default_value = "1s")]
        timeout: u64,
        #[arg(long, default_value_t = 3)]
        retries: u32,
        #[arg(long, env = "AOI_SEED", default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    /// Echo server address, host:port.
    #[arg(
        long,
        conflicts_with = "emulated",
        required_unless_present = "emulated"
    )]
    pub dest: Option<String>,
    /// Emulated channel spec, e.g. `fixed_rtt=12.5ms`.
    #[arg(long)]
    pub emulated: Option<String>,
    /// Constant sending rate, packets per second.
    #[arg(long, conflicts_with_all = ["schedule", "sweep"])]
    pub rate: Option<f64>,
    /// Piecewise schedule `rate:seconds,rate:seconds,...`.
    #[arg(long, conflicts_with = "sweep")]
    pub schedule: Option<String>,
    /// Linear rate sweep `from:to:steps`, each step lasting --segment.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub segment: f64,
    /// Seconds to send for with --rate.
    #[arg(long, default_value_t = 30.0)]
    pub duration: f64,
    /// Datagram size in bytes.
    #[arg(long, default_value_t = DEFAULT_DATA_SIZE)]
    pub size: usize,
    /// Seconds to wait for late echoes after the last send.
    #[arg(long, default_value_t = 1.0)]
    pub drain: f64,
    #[arg(long, env = "AOI_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub gnuplot_hints: bool,
}

pub fn cmd_measure(a: &MeasureArgs, argv: &[String]) -> Result<(), CliError> {
    match &a.mode {
        MeasureMode::EchoServer {
            bind,
            port,
            duration,
        } => echo_server(bind, *port, *duration),
        MeasureMode::Sampler(s) => sampler(s, argv),
        MeasureMode::Sync {
            peer,
            emulated,
            pings,
            timeout,
            retries,
            seed,
        } => {
            let est = match (peer, emulated) {
                (_, Some(text)) => estimate_offset_emulated(&emulated_spec(text, *seed)?, *pings)?,
                (Some(p), None) => estimate_offset(
                    resolve(p)?,
                    *pings,
                    Duration::from_nanos(*timeout),
                    *retries,
                )?,
                (None, None) => return Err(CliError::config("give --peer or --emulated")),
            };
            let n = est.rtt_samples.len();
            let mut kv = KvDoc::new();
            kv.push("pings", n)
                .push("offset_ns", est.offset_ns)
                .push("offset_ms", est.offset_ns as f64 / 1e6)
                .push("confidence_ns", est.confidence)
                .push("rtt_mean_s", est.rtt_samples.iter().sum::<f64>() / n as f64);
            report(&kv);
            Ok(())
        }
    }
}

fn resolve(addr: &str) -> Result<SocketAddr, CliError> {
    addr.to_socket_addrs()
        .map_err(|e| CliError::config(format!("{addr}: {e}")))?
        .next()
        .ok_or_else(|| CliError::config(format!("{addr}: no address")))
}

/// Parses a spec; the run seed applies unless the spec names its own.
fn emulated_spec(text: &str, seed: u64) -> Result<EmulatedSpec, CliError> {
    let mut spec: EmulatedSpec = text.parse()?;
    if !text.contains("seed=") {
        spec.seed = seed;
    }
    Ok(spec)
}

static STOP: OnceLock<Arc<AtomicBool>> = OnceLock::new();

fn stop_flag() -> Arc<AtomicBool> {
    Arc::clone(STOP.get_or_init(|| {
        let flag = Arc::new(AtomicBool::new(false));
        let f = Arc::clone(&flag);
        if let Err(e) = ctrlc::set_handler(move || f.store(true, Ordering::Relaxed)) {
            eprintln!("aoi: no signal handler: {e}");
        }
        flag
    }))
}

fn echo_server(bind: &str, port: u16, duration: Option<f64>) -> Result<(), CliError> {
    let mut server = EchoServer::bind((bind, port))?;
    let addr = server.local_addr()?;
    let stop = stop_flag();
    stop.store(false, Ordering::Relaxed);
    println!("listening={addr}");
    println!("port={}", addr.port());
    std::io::stdout().flush()?;
    let deadline = duration.map(|d| Instant::now() + Duration::from_secs_f64(d.max(0.0)));
    let stats = server.serve(&stop, |s| {
        println!("{s}");
        let _ = std::io::stdout().flush();
        if deadline.is_some_and(|d| Instant::now() >= d) {
            stop.store(true, Ordering::Relaxed);
        }
    })?;
    println!("{stats}");
    Ok(())
}

fn schedule(a: &SamplerArgs) -> Result<RateSchedule, CliError> {
    if let Some(text) = &a.schedule {
        let segments = text
            .split(',')
            .map(|seg| {
                let (r, d) = seg
                    .split_once(':')
                    .ok_or_else(|| CliError::config(format!("bad schedule segment `{seg}`")))?;
                let rate: f64 = r
                    .trim()
                    .parse()
                    .map_err(|_| CliError::config(format!("bad rate `{r}`")))?;
                Ok((rate, parse_dur(d).map_err(CliError::Config)?))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        return Ok(RateSchedule::new(segments)?);
    }
    if let Some(text) = &a.sweep {
        let rates = parse_values(text, false)?;
        let seg = from_secs(a.segment);
        return Ok(RateSchedule::new(
            rates.into_iter().map(|r| (r, seg)).collect(),
        )?);
    }
    let rate = a
        .rate
        .ok_or_else(|| CliError::config("give --rate, --schedule or --sweep"))?;
    Ok(RateSchedule::constant(rate, a.duration)?)
}

fn sampler(a: &SamplerArgs, argv: &[String]) -> Result<(), CliError> {
    let sched = schedule(a)?;
    let mut cfg = SamplerConfig::new(sched.clone()).with_packet_size(a.size);
    cfg.drain = Duration::from_secs_f64(a.drain.max(0.0));
    let (report_, config) = match (&a.dest, &a.emulated) {
        (_, Some(text)) => {
            let spec = emulated_spec(text, a.seed)?;
            (
                run_sampler_emulated(&spec, &cfg)?,
                format!("emulated {spec}"),
            )
        }
        (Some(dest), None) => {
            let addr = resolve(dest)?;
            (run_sampler(addr, &cfg)?, format!("udp {addr}"))
        }
        (None, None) => return Err(CliError::config("give --dest or --emulated")),
    };
    let manifest = RunManifest::new(
        "measure sampler",
        argv,
        format!("{config} size={} segments={:?}", a.size, sched.segments()),
        a.emulated.as_ref().map(|_| a.seed),
    );
    let mut csv = Vec::new();
    write_trace_csv(&report_.trace, &mut csv)?;
    write_atomic(&a.out, &csv)?;
    manifest.finish(&[&a.out])?;

    let r = &report_;
    let mut kv = KvDoc::new();
    kv.push("sent", r.sent)
        .push("received", r.received)
        .push("echo_rate", r.echo_rate())
        .push("unmatched", r.unmatched)
        .push("duplicates", r.duplicates)
        .push("malformed", r.malformed);
    match rtt_age_bound(&r.trace) {
        Ok(age) => {
            kv.push("avg_age_s", age)
                .push("peak_age_s", peak_age(&r.trace).unwrap_or(f64::NAN));
        }
        Err(e) => eprintln!("aoi: no age statistics: {e}"),
    }
    let rtts: Vec<f64> = r
        .trace
        .records()
        .iter()
        .filter_map(|p| p.recv_ns.map(|a| (a - p.gen_ns) as f64 / 1e9))
        .collect();
    if !rtts.is_empty() {
        let mean = rtts.iter().sum::<f64>() / rtts.len() as f64;
        kv.push("rtt_mean_s", mean);
        if let [(rate, _)] = sched.segments() {
            kv.push("min_age_formula_s", mean + 1.0 / (2.0 * rate));
        }
    }
    if let Some(Ok(t)) = r.true_age() {
        kv.push("true_age_s", t);
    }
    report(&kv);
    if a.gnuplot_hints {
        eprintln!(
            "set datafile separator ','; plot '{}' every ::1 using ($2/1e9):(($3-$2)/1e9) with points title 'rtt'",
            a.out.display()
        );
    }
    match &r.aborted {
        Some(why) => Err(CliError::Runtime(format!(
            "sampler aborted, partial trace written: {why}"
        ))),
        None => Ok(()),
    }
}
