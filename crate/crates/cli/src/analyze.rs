use std::path::PathBuf;

use clap::Args;

use aoi_core::age::{
    apply_bias, penalty_average, penalty_bias, read_trace, summarize, BiasModel, PenaltyKind,
    PenaltySpec,
};
use aoi_core::kv::KvDoc;

use crate::{parse_signed_dur, report, CliError};

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Trace CSV.
    pub trace: PathBuf,
    /// Age penalty: linear, exp or log.
    #[arg(long)]
    pub penalty: Option<PenaltyKind>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Receiver clock bias added to every reception stamp, e.g. `1000`
    /// (seconds) or `-200ms`.
    #[arg(long, value_parser = parse_signed_dur, allow_hyphen_values = true)]
    pub bias: Option<i64>,
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    let raw = read_trace(&a.trace).map_err(|e| match CliError::from(e) {
        CliError::Runtime(m) => CliError::Runtime(format!("{}: {m}", a.trace.display())),
        other => other,
    })?;
    let bias = a.bias.map(BiasModel::new);
    let trace = match &bias {
        Some(b) => apply_bias(&raw, b)?,
        None => raw.clone(),
    };
    let s = summarize(&trace)?;
    let mut kv = KvDoc::new();
    kv.push("records", s.records)
        .push("deliveries", s.deliveries)
        .push("obsolete", s.obsolete)
        .push("lost", s.lost);
    if let Some(b) = &bias {
        kv.push("bias_s", b.secs());
    }
    kv.push("avg_age_s", s.avg_age_h)
        .push("avg_age_q_s", s.avg_age_q)
        .push("avg_age_h_s", s.avg_age_h)
        .push("peak_age_s", s.peak_age)
        .push("mean_system_time_s", s.mean_system_time);
    if let Some(kind) = a.penalty {
        let spec = PenaltySpec::new(kind, a.alpha)?;
        kv.push("penalty", kind)
            .push("alpha", a.alpha)
            .push("penalty_avg", penalty_average(&trace, &spec)?);
        if let Some(b) = &bias {
            kv.push("penalty_bias", penalty_bias(&raw, b, &spec)?);
        }
    }
    report(&kv);
    Ok(())
}
