use aoi_core::age::average_age;
use aoi_core::harness::{
    estimate_offset_emulated, rtt_age_bound, run_sampler_emulated, EchoCore, EmulatedSpec, MsgType,
    RateSchedule, SamplerConfig, WireError, WirePacket, HEADER_LEN, MAGIC,
};
use proptest::prelude::*;

fn msg_type() -> impl Strategy<Value = MsgType> {
    prop::sample::select(vec![
        MsgType::Data,
        MsgType::EchoReply,
        MsgType::TimeRequest,
        MsgType::TimeResponse,
    ])
}

proptest! {
    #[test]
    fn wire_round_trip(
        t in msg_type(),
        id in any::<u64>(),
        gen_ts in any::<u64>(),
        extra_ts in any::<u64>(),
        payload_len in 0u16..2_000,
    ) {
        let p = WirePacket { msg_type: t, id, gen_ts, extra_ts, payload_len };
        let bytes = p.encode();
        prop_assert_eq!(bytes.len(), HEADER_LEN + payload_len as usize);
        prop_assert_eq!(&bytes[..4], &MAGIC);
        prop_assert_eq!(WirePacket::decode(&bytes).unwrap(), p);
    }

    #[test]
    fn truncated_datagrams_are_rejected(id in any::<u64>(), size in 31usize..1500, cut in 1usize..1500) {
        let bytes = WirePacket::data(id, 7, size).unwrap().encode();
        let cut = cut.min(bytes.len());
        let err = WirePacket::decode(&bytes[..bytes.len() - cut]).unwrap_err();
        let expected = matches!(err, WireError::Short(_) | WireError::LengthMismatch { .. });
        prop_assert!(expected, "{:?}", err);
    }

    #[test]
    fn echo_changes_only_the_type(id in any::<u64>(), gen_ts in any::<u64>(), size in 31usize..1500, clock in any::<u64>()) {
        let req = WirePacket::data(id, gen_ts, size).unwrap().encode();
        let reply = EchoCore::default().handle(&req, clock).unwrap();
        prop_assert_eq!(reply.len(), req.len());
        let p = WirePacket::decode(&reply).unwrap();
        prop_assert_eq!(p.msg_type, MsgType::EchoReply);
        prop_assert_eq!((p.id, p.gen_ts), (id, gen_ts));
        prop_assert_eq!(&reply[5..], &req[5..]);
    }

    #[test]
    fn ack_age_bounds_responder_age(
        fwd_ms in 1u32..40,
        back_ms in 1u32..40,
        sigma in 0.1f64..1.0,
        rate in 5f64..200.0,
        seed in any::<u64>(),
    ) {
        let spec: EmulatedSpec = format!(
            "forward=lognormal:{fwd_ms}ms:{sigma},backward=lognormal:{back_ms}ms:{sigma},reorder=1,seed={seed}"
        )
        .parse()
        .unwrap();
        let cfg = SamplerConfig::new(RateSchedule::constant(rate, 5.0).unwrap());
        let r = run_sampler_emulated(&spec, &cfg).unwrap();
        let bound = rtt_age_bound(&r.trace).unwrap();
        let truth = r.true_age().unwrap().unwrap();
        prop_assert!(bound >= truth, "{} < {}", bound, truth);
    }

    #[test]
    fn responder_clock_offset_does_not_reach_the_ack_trace(offset_ms in -1_000i64..1_000, rate in 5f64..300.0, seed in any::<u64>()) {
        let cfg = SamplerConfig::new(RateSchedule::constant(rate, 3.0).unwrap());
        let plain: EmulatedSpec = format!("forward=uniform:2ms:9ms,backward=4ms,seed={seed}").parse().unwrap();
        let mut skewed = plain.clone();
        skewed.server_offset_ns = offset_ms * 1_000_000;
        let a = run_sampler_emulated(&plain, &cfg).unwrap();
        let b = run_sampler_emulated(&skewed, &cfg).unwrap();
        prop_assert_eq!(a.trace.records(), b.trace.records());
    }
}

#[test]
fn fixed_path_age_is_rtt_plus_half_period() {
    let spec: EmulatedSpec = "fixed_rtt=12.5ms".parse().unwrap();
    for rate in [10.0, 140.0, 300.0] {
        let r = run_sampler_emulated(
            &spec,
            &SamplerConfig::new(RateSchedule::constant(rate, 10.0).unwrap()),
        )
        .unwrap();
        let age = average_age(&r.trace).unwrap();
        let want = 0.0125 + 0.5 / rate;
        assert!((age - want).abs() / want < 1e-6, "{rate}: {age} vs {want}");
    }
}

#[test]
fn offset_variance_falls_as_one_over_n() {
    let spread = |n: usize| {
        let est: Vec<f64> = (0..200u64)
            .map(|seed| {
                let spec: EmulatedSpec = format!(
                    "offset=3ms,forward=normal:10ms:2ms,backward=normal:10ms:2ms,seed={seed}"
                )
                .parse()
                .unwrap();
                estimate_offset_emulated(&spec, n).unwrap().offset_ns as f64
            })
            .collect();
        let m = est.iter().sum::<f64>() / est.len() as f64;
        let var = est.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (est.len() - 1) as f64;
        (m, var)
    };
    let (m10, v10) = spread(10);
    let (m80, v80) = spread(80);
    assert!((m80 - 3e6).abs() < 1e5, "{m80}");
    assert!((m10 - 3e6).abs() < 3e5, "{m10}");
    // eight times the pings, an eighth of the variance
    let ratio = v10 / v80;
    assert!((5.0..12.0).contains(&ratio), "{ratio}");
}
