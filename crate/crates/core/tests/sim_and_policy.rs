use aoi_core::age::{average_age, peak_age};
use aoi_core::harness::{EmulatedSpec, DEFAULT_DATA_SIZE};
use aoi_core::policy::{
    acp_epoch_update, run_closed_loop, AcpState, PolicyConfig, PolicyObservation, RatePolicy,
};
use aoi_core::sim::{
    analytic_mm1_age, mm1_mean_in_system, simulate, simulate_scheduler, ArrivalProcess,
    ChannelModel, Discipline, SchedulerConfig, SchedulingPolicy, ServiceProcess, SimConfig,
};
use proptest::prelude::*;

#[test]
fn mm1_matches_closed_form() {
    for rho in [0.3, 0.53, 0.7] {
        let out = simulate(&SimConfig::mm1(rho, 2.0, 300_000, 3)).unwrap();
        let got = average_age(&out.trace).unwrap();
        // independent closed form: (1/mu)(1 + 1/rho + rho^2/(1 - rho))
        let want = 0.5 * (1.0 + 1.0 / rho + rho * rho / (1.0 - rho));
        assert!((analytic_mm1_age(rho, 2.0).unwrap() - want).abs() < 1e-12);
        assert!(
            (got - want).abs() / want < 0.03,
            "rho {rho}: {got} vs {want}"
        );
        let n = out.meta.mean_in_system;
        assert!(
            (n - rho / (1.0 - rho)).abs() / (rho / (1.0 - rho)) < 0.05,
            "{n}"
        );
        assert!((mm1_mean_in_system(rho).unwrap() - rho / (1.0 - rho)).abs() < 1e-12);
    }
}

#[test]
fn dd1_is_a_sawtooth() {
    let cfg = SimConfig::new(
        ArrivalProcess::Deterministic { rate: 10.0 },
        ServiceProcess::Deterministic { rate: 40.0 },
        1_000,
        1,
    );
    let out = simulate(&cfg).unwrap();
    // period 0.1 s, system time 0.025 s
    assert!((average_age(&out.trace).unwrap() - 0.075).abs() < 1e-9);
    assert!((peak_age(&out.trace).unwrap() - 0.125).abs() < 1e-9);
}

#[test]
fn same_seed_same_trace() {
    let cfg = SimConfig::mm1(0.6, 1.0, 20_000, 42);
    assert_eq!(simulate(&cfg).unwrap().trace, simulate(&cfg).unwrap().trace);
    let other = SimConfig {
        seed: 43,
        ..cfg.clone()
    };
    assert_ne!(
        simulate(&cfg).unwrap().trace,
        simulate(&other).unwrap().trace
    );
}

#[test]
fn lcfs_keeps_age_bounded_past_capacity() {
    let base = SimConfig::mm1(1.5, 1.0, 50_000, 9);
    assert!(base.is_unstable());
    let fcfs = average_age(&simulate(&base).unwrap().trace).unwrap();
    let lcfs_cfg = base.clone().with_discipline(Discipline::Lcfs1);
    assert!(!lcfs_cfg.is_unstable());
    let lcfs = average_age(&simulate(&lcfs_cfg).unwrap().trace).unwrap();
    assert!(lcfs < 3.0, "{lcfs}");
    assert!(fcfs > 100.0 * lcfs, "{fcfs} vs {lcfs}");
}

#[test]
fn udp_regimes_lose_before_they_delay() {
    let ch = ChannelModel::udp_regimes(1e6, 1000, 0.01);
    assert_eq!(ch.ingress_drop(0.5), 0.0);
    assert!(ch.ingress_drop(0.8) > 0.0);
    assert_eq!(ch.accepted_load(0.8), ch.accepted_load(0.9));
    assert!(ch.accepted_load(1.2) > ch.accepted_load(0.9));
}

#[test]
fn max_weight_beats_round_robin_on_skewed_channels() {
    let p = vec![0.9, 0.9, 0.3, 0.3];
    let run = |policy| {
        simulate_scheduler(&SchedulerConfig::new(p.clone(), 1.0, policy), 20_000, 5)
            .unwrap()
            .total_avg_age()
    };
    let (mw, rr) = (
        run(SchedulingPolicy::max_weight()),
        run(SchedulingPolicy::RoundRobin),
    );
    assert!(mw < rr, "{mw} vs {rr}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn acp_target_stays_in_bounds(
        steps in prop::collection::vec((0.0f64..2.0, 0.0f64..5.0, 0u64..20), 1..200),
        kappa in 0.5f64..3.0,
        cap in 4.0f64..100.0,
    ) {
        let mut s = AcpState::new(kappa, cap, 0.01).unwrap();
        for (age, backlog, acks) in steps {
            let obs = PolicyObservation {
                now: 0,
                last_ack_rtt: Some(0.05),
                ewma_rtt: Some(0.05),
                ewma_inter_ack: None,
                backlog,
                avg_age_epoch: age,
                acks_in_epoch: acks,
            };
            acp_epoch_update(&mut s, &obs).unwrap();
            prop_assert!(s.target_backlog >= kappa && s.target_backlog <= cap);
        }
    }

    #[test]
    fn closed_loop_acp_respects_bounds(median_ms in 5u32..80, sigma in 0.1f64..1.0, seed in 0u64..1_000) {
        let spec: EmulatedSpec =
            format!("forward=lognormal:{median_ms}ms:{sigma},backward=lognormal:{median_ms}ms:{sigma},seed={seed}")
                .parse()
                .unwrap();
        let cfg = PolicyConfig::default();
        let r = run_closed_loop(RatePolicy::acp(&cfg).unwrap(), &spec, &cfg, 5.0, DEFAULT_DATA_SIZE).unwrap();
        for d in &r.decisions {
            prop_assert!(d.target_backlog >= cfg.kappa && d.target_backlog <= cfg.backlog_cap);
            prop_assert!(d.rate_hz.is_finite() && d.rate_hz > 0.0);
        }
    }
}
