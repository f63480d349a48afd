use super::AgeError;
use crate::time::Nanos;

/// One status update: when it was generated and, unless lost, when it was
/// received.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRecord {
    pub id: u64,
    pub gen_ns: Nanos,
    pub recv_ns: Option<Nanos>,
    pub size_bytes: u32,
}

impl PacketRecord {
    pub fn delivered(id: u64, gen_ns: Nanos, recv_ns: Nanos) -> Self {
        Self {
            id,
            gen_ns,
            recv_ns: Some(recv_ns),
            size_bytes: 0,
        }
    }

    pub fn lost(id: u64, gen_ns: Nanos) -> Self {
        Self {
            id,
            gen_ns,
            recv_ns: None,
            size_bytes: 0,
        }
    }

    pub fn with_size(mut self, size_bytes: u32) -> Self {
        self.size_bytes = size_bytes;
        self
    }
}

/// A delivery that survived obsolete-packet filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub gen_ns: Nanos,
    pub recv_ns: Nanos,
}

impl Delivery {
    /// System time `r - s` in nanoseconds; negative only under a declared
    /// clock bias.
    pub fn system_time(&self) -> i128 {
        self.recv_ns as i128 - self.gen_ns as i128
    }
}

/// Ordered packet records plus an observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeTrace {
    records: Vec<PacketRecord>,
    t_start: Nanos,
    t_end: Nanos,
    initial_age_ns: Nanos,
    declared_bias_ns: i64,
}

impl AgeTrace {
    /// Builds a trace with an explicit window and the age observed at
    /// `t_start`.
    pub fn new(
        records: Vec<PacketRecord>,
        t_start: Nanos,
        t_end: Nanos,
        initial_age_ns: Nanos,
    ) -> Result<Self, AgeError> {
        let trace = Self {
            records,
            t_start,
            t_end,
            initial_age_ns,
            declared_bias_ns: 0,
        };
        trace.validate()?;
        Ok(trace)
    }

    /// Builds a trace whose window spans every stamp it contains, with zero
    /// age at the window start.
    pub fn from_records(records: Vec<PacketRecord>) -> Result<Self, AgeError> {
        let t_start = records
            .iter()
            .flat_map(|r| std::iter::once(r.gen_ns).chain(r.recv_ns))
            .min()
            .unwrap_or(0);
        let t_end = records
            .iter()
            .flat_map(|r| std::iter::once(r.gen_ns).chain(r.recv_ns))
            .max()
            .unwrap_or(0);
        Self::new(records, t_start, t_end, 0)
    }

    /// Convenience constructor from `(gen, recv)` pairs in nanoseconds.
    pub fn from_pairs(pairs: &[(Nanos, Option<Nanos>)]) -> Result<Self, AgeError> {
        let records = pairs
            .iter()
            .enumerate()
            .map(|(i, &(g, r))| PacketRecord {
                id: i as u64,
                gen_ns: g,
                recv_ns: r,
                size_bytes: 0,
            })
            .collect();
        Self::from_records(records)
    }

    pub(crate) fn with_bias(
        records: Vec<PacketRecord>,
        t_start: Nanos,
        t_end: Nanos,
        initial_age_ns: Nanos,
        declared_bias_ns: i64,
    ) -> Result<Self, AgeError> {
        let trace = Self {
            records,
            t_start,
            t_end,
            initial_age_ns,
            declared_bias_ns,
        };
        trace.validate()?;
        Ok(trace)
    }

    fn validate(&self) -> Result<(), AgeError> {
        if self.t_end < self.t_start {
            return Err(AgeError::InvalidTrace(format!(
                "window end {} before start {}",
                self.t_end, self.t_start
            )));
        }
        for pair in self.records.windows(2) {
            if pair[1].id <= pair[0].id {
                return Err(AgeError::InvalidTrace(format!(
                    "ids not strictly increasing: {} then {}",
                    pair[0].id, pair[1].id
                )));
            }
        }
        for r in &self.records {
            if let Some(recv) = r.recv_ns {
                if recv < self.t_start || recv > self.t_end {
                    return Err(AgeError::InvalidTrace(format!(
                        "packet {} received at {recv} outside window [{}, {}]",
                        r.id, self.t_start, self.t_end
                    )));
                }
                if self.declared_bias_ns == 0 && recv < r.gen_ns {
                    return Err(AgeError::InvalidTrace(format!(
                        "packet {} received at {recv} before generation at {}",
                        r.id, r.gen_ns
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    pub fn t_start(&self) -> Nanos {
        self.t_start
    }

    pub fn t_end(&self) -> Nanos {
        self.t_end
    }

    pub fn initial_age_ns(&self) -> Nanos {
        self.initial_age_ns
    }

    /// Clock bias already applied to the reception stamps.
    pub fn declared_bias_ns(&self) -> i64 {
        self.declared_bias_ns
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records with no reception stamp.
    pub fn lost(&self) -> usize {
        self.records.iter().filter(|r| r.recv_ns.is_none()).count()
    }

    /// Deliveries in reception order with obsolete packets removed, plus the
    /// number of obsolete packets dropped.
    pub fn deliveries(&self) -> (Vec<Delivery>, usize) {
        let mut raw: Vec<Delivery> = self
            .records
            .iter()
            .filter_map(|r| {
                r.recv_ns.map(|recv_ns| Delivery {
                    gen_ns: r.gen_ns,
                    recv_ns,
                })
            })
            .collect();
        raw.sort_by_key(|d| (d.recv_ns, d.gen_ns));
        let total = raw.len();
        let mut newest: Option<Nanos> = None;
        raw.retain(|d| match newest {
            Some(g) if d.gen_ns <= g => false,
            _ => {
                newest = Some(d.gen_ns);
                true
            }
        });
        let obsolete = total - raw.len();
        (raw, obsolete)
    }

    pub(crate) fn into_parts(self) -> (Vec<PacketRecord>, Nanos, Nanos, Nanos, i64) {
        (
            self.records,
            self.t_start,
            self.t_end,
            self.initial_age_ns,
            self.declared_bias_ns,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unordered_ids() {
        let recs = vec![
            PacketRecord::delivered(2, 0, 5),
            PacketRecord::delivered(1, 1, 6),
        ];
        assert!(matches!(
            AgeTrace::from_records(recs),
            Err(AgeError::InvalidTrace(_))
        ));
    }

    #[test]
    fn rejects_acausal_record() {
        let recs = vec![PacketRecord::delivered(0, 10, 5)];
        assert!(AgeTrace::from_records(recs).is_err());
    }

    #[test]
    fn rejects_recv_outside_window() {
        let recs = vec![PacketRecord::delivered(0, 0, 50)];
        assert!(AgeTrace::new(recs, 0, 10, 0).is_err());
    }

    #[test]
    fn obsolete_packets_are_filtered() {
        // packet 1 overtakes packet 0
        let t = AgeTrace::from_pairs(&[(0, Some(30)), (10, Some(20)), (40, Some(50)), (45, None)])
            .unwrap();
        let (d, obsolete) = t.deliveries();
        assert_eq!(obsolete, 1);
        assert_eq!(
            d,
            vec![
                Delivery {
                    gen_ns: 10,
                    recv_ns: 20
                },
                Delivery {
                    gen_ns: 40,
                    recv_ns: 50
                }
            ]
        );
        assert_eq!(t.lost(), 1);
    }
}
