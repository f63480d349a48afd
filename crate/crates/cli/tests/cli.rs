use std::path::Path;
use std::process::{Command, Output};

use aoi_core::age::{average_age, read_trace};

fn aoi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoi"))
        .current_dir(dir)
        .env_remove("AOI_SEED")
        .args(args)
        .output()
        .expect("run aoi")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = aoi(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn value(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
        .parse()
        .unwrap()
}

#[test]
fn sim_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "--model",
        "mm1",
        "--rho",
        "0.5",
        "--arrivals",
        "5000",
        "--seed",
        "3",
    ];
    ok(d, &[&["sim"][..], &args, &["--out", "a.csv"]].concat());
    ok(d, &[&["sim"][..], &args, &["--out", "b.csv"]].concat());
    let a = std::fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.csv")).unwrap());
    assert!(d.join("a.csv.meta").exists());
    assert!(d.join("a.csv.manifest").exists());
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |out: &str, seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_aoi"));
        cmd.current_dir(d).env_remove("AOI_SEED");
        if let Some(s) = seed {
            cmd.env("AOI_SEED", s);
        }
        let st = cmd
            .args([
                "sim",
                "--model",
                "mm1",
                "--rho",
                "0.5",
                "--arrivals",
                "500",
                "--out",
                out,
            ])
            .output()
            .unwrap();
        assert!(st.status.success());
        std::fs::read(d.join(out)).unwrap()
    };
    let default = run("d.csv", None);
    assert_eq!(default, run("one.csv", Some("1")));
    assert_ne!(default, run("nine.csv", Some("9")));
}

#[test]
fn overload_is_flagged_unstable() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &[
            "sim",
            "--model",
            "mm1",
            "--rho",
            "1.2",
            "--arrivals",
            "2000",
            "--out",
            "t.csv",
        ],
    );
    assert!(out.contains("unstable=true"));
    let out = ok(
        dir.path(),
        &[
            "sim",
            "--model",
            "mm1",
            "--rho",
            "0.5",
            "--arrivals",
            "2000",
            "--out",
            "t.csv",
        ],
    );
    assert!(out.contains("unstable=false"));
}

#[test]
fn lcfs_tail_is_shorter_than_fcfs_past_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = ["--model", "mm1", "--rho", "1.5", "--arrivals", "20000"];
    let fcfs = ok(d, &[&["sim"][..], &base, &["--out", "f.csv"]].concat());
    let lcfs = ok(
        d,
        &[
            &["sim"][..],
            &base,
            &["--discipline", "lcfs1", "--out", "l.csv"],
        ]
        .concat(),
    );
    assert!(value(&lcfs, "peak_age_s") * 10.0 < value(&fcfs, "peak_age_s"));
}

#[test]
fn analyze_reports_golden_values() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // updates every second, each delivered half a second later
    let mut csv = String::from("id,gen_ns,recv_ns,size_bytes\n");
    for i in 0..11u64 {
        csv.push_str(&format!(
            "{i},{},{},100\n",
            i * 1_000_000_000,
            i * 1_000_000_000 + 500_000_000
        ));
    }
    csv.push_str("11,11000000000,,100\n");
    std::fs::write(d.join("g.csv"), csv).unwrap();
    let out = ok(d, &["analyze", "g.csv"]);
    assert_eq!(value(&out, "records"), 12.0);
    assert_eq!(value(&out, "lost"), 1.0);
    assert_eq!(value(&out, "avg_age_s"), 1.0);
    assert_eq!(value(&out, "avg_age_q_s"), 1.0);
    assert_eq!(value(&out, "peak_age_s"), 1.5);
    let out = ok(
        d,
        &[
            "analyze",
            "g.csv",
            "--bias",
            "-200ms",
            "--penalty",
            "linear",
            "--alpha",
            "2",
        ],
    );
    assert!((value(&out, "avg_age_s") - 0.8).abs() < 1e-12);
    assert!((value(&out, "penalty_bias") + 0.4).abs() < 1e-12);
}

#[test]
fn malformed_trace_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("bad.csv"),
        "id,gen_ns,recv_ns,size_bytes\n0,1,2,0\n1,x,3,0\n",
    )
    .unwrap();
    let out = aoi(d, &["analyze", "bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(aoi(d, &["sim", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        aoi(
            d,
            &["sim", "--model", "mm1", "--rho", "-1", "--out", "x.csv"]
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(aoi(d, &["analyze", "missing.csv"]).status.code(), Some(3));
    assert_eq!(aoi(d, &["--help"]).status.code(), Some(0));
}

#[test]
fn single_point_sweep_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "sweep",
            "--model",
            "mm1",
            "--axis",
            "rho",
            "--values",
            "0.5",
            "--arrivals",
            "2000",
            "--out",
            "s.csv",
        ],
    );
    let text = std::fs::read_to_string(d.join("s.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("rate_hz,avg_age_s,peak_age_s,loss,avg_delay_s"));
}

#[test]
fn replay_reproduces_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "sim",
            "--model",
            "mm1",
            "--rho",
            "0.4",
            "--arrivals",
            "3000",
            "--seed",
            "17",
            "--out",
            "r.csv",
        ],
    );
    let first = std::fs::read(d.join("r.csv")).unwrap();
    std::fs::remove_file(d.join("r.csv")).unwrap();
    ok(d, &["replay", "r.csv.manifest"]);
    assert_eq!(first, std::fs::read(d.join("r.csv")).unwrap());
}

#[test]
fn emulated_sampler_and_sync() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(
        d,
        &[
            "measure",
            "sampler",
            "--emulated",
            "fixed_rtt=12.5ms",
            "--rate",
            "140",
            "--duration",
            "10",
            "--out",
            "m.csv",
        ],
    );
    assert_eq!(value(&out, "echo_rate"), 1.0);
    assert!((value(&out, "avg_age_s") - (0.0125 + 0.5 / 140.0)).abs() < 1e-9);
    let trace = read_trace(&d.join("m.csv")).unwrap();
    assert_eq!(trace.len(), 1400);
    assert!((average_age(&trace).unwrap() - value(&out, "avg_age_s")).abs() < 1e-12);

    let out = ok(
        d,
        &[
            "measure",
            "sync",
            "--emulated",
            "offset=5ms,rtt=30ms",
            "--pings",
            "50",
        ],
    );
    assert_eq!(value(&out, "offset_ns"), 5e6);
    let out = ok(
        d,
        &[
            "measure",
            "sync",
            "--emulated",
            "offset=5ms,forward=20ms,backward=10ms",
        ],
    );
    assert_eq!(value(&out, "offset_ns"), 10e6);
}

#[test]
fn echo_server_stops_after_duration() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &[
            "measure",
            "echo-server",
            "--bind",
            "127.0.0.1",
            "--port",
            "0",
            "--duration",
            "0.2",
        ],
    );
    assert!(out.contains("listening=127.0.0.1:"));
    assert!(out.trim_end().ends_with("malformed=0"), "{out}");
}

#[test]
fn policies_run_on_emulated_paths() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(
        d,
        &[
            "policy",
            "--name",
            "lazy",
            "--emulated",
            "fixed_rtt=100ms",
            "--duration",
            "60",
            "--out",
            "lazy.csv",
        ],
    );
    assert!((value(&out, "mean_in_flight") - 1.0).abs() < 0.2);
    assert!((value(&out, "steady_rate_hz") - 10.0).abs() < 0.5);

    let out = ok(
        d,
        &[
            "policy",
            "--name",
            "acp",
            "--emulated",
            "capacity_step",
            "--duration",
            "30",
            "--out",
            "acp.csv",
        ],
    );
    assert!(value(&out, "final_target_backlog") >= 1.0);
    let log = std::fs::read_to_string(d.join("acp.csv.decisions.csv")).unwrap();
    assert!(log.starts_with("epoch,action,target_backlog,rate_hz,avg_age_s,backlog"));
    assert!(log
        .lines()
        .skip(1)
        .all(|l| ["INC", "DEC", "MDEC"].contains(&l.split(',').nth(1).unwrap())));

    let out = ok(
        d,
        &[
            "policy",
            "--name",
            "qlearn",
            "--emulated",
            "fixed_delay=1s",
            "--out",
            "q.csv",
        ],
    );
    assert!((value(&out, "q_resume_mean") - 0.632).abs() <= 0.02);
    assert!(out.contains("greedy=resume"), "{out}");
}
