use aoi_core::age::{
    apply_bias, average_age, average_age_h, average_age_q, peak_age, penalty_average, penalty_bias,
    read_trace_csv, write_trace_csv, AgeTrace, BiasModel, PacketRecord, PenaltyKind, PenaltySpec,
};
use aoi_core::oracle::{grid_average_age, grid_penalty_average};
use proptest::prelude::*;

const S: u64 = 1_000_000_000;
const MS: u64 = 1_000_000;

/// Gaps and delays in units of `quantum`; deliveries may reorder.
fn build(steps: &[(u64, u64, bool)], quantum: u64) -> AgeTrace {
    let mut gen = 100 * S;
    let records = steps
        .iter()
        .enumerate()
        .map(|(i, &(gap, delay, lost))| {
            gen += gap * quantum;
            if lost {
                PacketRecord::lost(i as u64, gen)
            } else {
                PacketRecord::delivered(i as u64, gen, gen + delay * quantum)
            }
        })
        .collect();
    AgeTrace::from_records(records).unwrap()
}

fn steps(max_len: usize, loss: bool) -> impl Strategy<Value = Vec<(u64, u64, bool)>> {
    let lost = if loss {
        prop::bool::weighted(0.1).boxed()
    } else {
        Just(false).boxed()
    };
    prop::collection::vec((1u64..50, 0u64..120, lost), 2..max_len)
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn both_forms_agree(s in steps(400, true)) {
        let t = build(&s, MS);
        prop_assume!(average_age_h(&t).is_ok());
        let (q, h) = (average_age_q(&t).unwrap(), average_age_h(&t).unwrap());
        prop_assert!(rel(q, h) <= 1e-12, "{} vs {}", q, h);
    }

    #[test]
    fn closed_form_matches_grid(s in steps(60, true)) {
        let t = build(&s, MS);
        prop_assume!(average_age(&t).is_ok());
        let g = grid_average_age(&t, MS / 10);
        prop_assert!(rel(average_age(&t).unwrap(), g) <= 1e-9);
    }

    #[test]
    fn bias_shifts_average_and_peak(s in steps(300, true), b_ms in -50_000i64..2_000_000) {
        let t = build(&s, MS);
        prop_assume!(average_age(&t).is_ok());
        let model = BiasModel::new(b_ms * MS as i64);
        let biased = apply_bias(&t, &model).unwrap();
        let b = model.secs();
        let (a0, p0) = (average_age(&t).unwrap(), peak_age(&t).unwrap());
        let (a1, p1) = (average_age(&biased).unwrap(), peak_age(&biased).unwrap());
        prop_assert!((a1 - a0 - b).abs() <= 1e-9 * (a0.abs() + b.abs()));
        prop_assert!((p1 - p0 - b).abs() <= 1e-9 * (p0.abs() + b.abs()));
    }

    #[test]
    fn linear_penalty_bias_is_exact(s in steps(100, false), b_ms in -5_000i64..5_000, alpha in 0.01f64..10.0) {
        let t = build(&s, MS);
        prop_assume!(average_age(&t).is_ok());
        let p = PenaltySpec::new(PenaltyKind::Linear, alpha).unwrap();
        let model = BiasModel::new(b_ms * MS as i64);
        prop_assert_eq!(penalty_bias(&t, &model, &p).unwrap(), alpha * model.secs());
    }

    #[test]
    fn nonlinear_penalty_bias_matches_grid(
        s in steps(40, false),
        b_ms in 0i64..1_500,
        alpha in prop::sample::select(vec![0.1, 1.0, 3.0]),
        exp in any::<bool>(),
    ) {
        let t = build(&s, MS);
        prop_assume!(average_age(&t).is_ok());
        let kind = if exp { PenaltyKind::Exponential } else { PenaltyKind::Logarithmic };
        let p = PenaltySpec::new(kind, alpha).unwrap();
        let model = BiasModel::new(b_ms * MS as i64);
        let closed = penalty_bias(&t, &model, &p).unwrap();
        let step = MS / 100;
        let grid = grid_penalty_average(&t, &p, step, model.bias_ns)
            - grid_penalty_average(&t, &p, step, 0);
        if b_ms == 0 {
            prop_assert!(closed.abs() <= 1e-15);
        } else {
            prop_assert!(rel(closed, grid) <= 1e-6, "{} vs {}", closed, grid);
        }
        let direct = penalty_average(&apply_bias(&t, &model).unwrap(), &p).unwrap()
            - penalty_average(&t, &p).unwrap();
        prop_assert!((direct - closed).abs() <= 1e-9 * closed.abs().max(1e-9));
    }

    #[test]
    fn obsolete_and_lost_records_do_not_change_age(s in steps(200, false), at in 0usize..200) {
        let t = build(&s, MS);
        prop_assume!(average_age(&t).is_ok());
        let mut records = t.records().to_vec();
        let k = at % records.len();
        let next = records.iter().map(|r| r.id).max().unwrap() + 1;
        let first = records[0].gen_ns;
        // generated before everything, received after everything
        records.push(PacketRecord::delivered(next, first - 1, t.t_end() + 1));
        records.push(PacketRecord::lost(next + 1, records[k].gen_ns));
        let t2 = AgeTrace::new(records, t.t_start() - 1, t.t_end() + 1, 0).unwrap();
        prop_assert_eq!(average_age(&t2).unwrap(), average_age(&t).unwrap());
        prop_assert_eq!(peak_age(&t2).unwrap(), peak_age(&t).unwrap());
    }

    #[test]
    fn csv_round_trip(s in steps(100, true)) {
        let t = build(&s, 7);
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        let back = read_trace_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.records(), t.records());
    }
}

#[test]
fn periodic_trace_has_textbook_average() {
    // period T, delay D: age ramps from D to D + T, average D + T/2
    let pairs: Vec<_> = (0..1_000u64)
        .map(|i| (i * 10 * MS, Some(i * 10 * MS + 3 * MS)))
        .collect();
    let t = AgeTrace::from_pairs(&pairs).unwrap();
    assert!((average_age(&t).unwrap() - 0.008).abs() < 1e-12);
    assert!((peak_age(&t).unwrap() - 0.013).abs() < 1e-12);
}
