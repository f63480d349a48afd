use crate::kv::KvDoc;

/// Per-run counters and flags, written as a `key=value` sidecar next to the
/// trace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetadata {
    pub seed: u64,
    pub config: String,
    pub arrivals: u64,
    pub delivered: u64,
    pub ingress_dropped: u64,
    pub buffer_dropped: u64,
    pub superseded: u64,
    pub channel_lost: u64,
    pub retransmissions: u64,
    pub still_queued: u64,
    pub unstable: bool,
    pub avg_delay_s: f64,
    /// Time-average number of packets queued or in service.
    pub mean_in_system: f64,
    pub end_time_s: f64,
}

impl RunMetadata {
    /// Updates that never reached the receiver for any reason.
    pub fn losses(&self) -> u64 {
        self.ingress_dropped + self.buffer_dropped + self.superseded + self.channel_lost
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut kv = KvDoc::new();
        kv.push("seed", self.seed)
            .push("config", &self.config)
            .push("arrivals", self.arrivals)
            .push("delivered", self.delivered)
            .push("loss", self.losses())
            .push("ingress_dropped", self.ingress_dropped)
            .push("buffer_dropped", self.buffer_dropped)
            .push("superseded", self.superseded)
            .push("channel_lost", self.channel_lost)
            .push("retransmissions", self.retransmissions)
            .push("still_queued", self.still_queued)
            .push("unstable", self.unstable)
            .push("avg_delay_s", self.avg_delay_s)
            .push("mean_in_system", self.mean_in_system)
            .push("end_time_s", self.end_time_s);
        kv
    }
}
