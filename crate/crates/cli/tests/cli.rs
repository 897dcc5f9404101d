//! End-to-end checks of the binary: worked examples, exit codes, and
//! byte-level determinism of the emitted artifacts.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codedxbar"))
        .args(args)
        .env_remove("CODEDXBAR_SEED")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn tmp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("codedxbar-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn analyze_fig1_matches_the_worked_example() {
    let doc = stdout_json(&bin(&["analyze", "--pattern", "fig1"]));
    assert_eq!(doc["pattern"]["inputs"], 2);
    assert_eq!(doc["pattern"]["outputs"], 3);
    assert_eq!(doc["pattern"]["flows"], 4);
    assert_eq!(doc["pattern"]["subflows"], 6);
    assert_eq!(doc["graph"]["maximal_stable_sets"], 4);
    assert_eq!(doc["graph"]["maximal_cliques"], 4);
    assert_eq!(doc["admissible"], true);
    assert_eq!(doc["split"], true);
    assert_eq!(doc["perfect"], true);
    assert_eq!(doc["chi_f"], "1/1");
    assert_eq!(doc["in_region"], true);
    assert_eq!(doc["min_speedup"], "1/1");
    assert_eq!(doc["loads"]["inputs"], serde_json::json!(["2/3", "1/1"]));
    assert_eq!(
        doc["loads"]["outputs"],
        serde_json::json!(["1/1", "1/1", "1/1"])
    );
}

#[test]
fn analyze_scaled_fig1_leaves_the_region() {
    let doc = stdout_json(&bin(&["analyze", "--pattern", "fig1", "--alpha", "6/5"]));
    assert_eq!(doc["chi_f"], "6/5");
    assert_eq!(doc["min_speedup"], "6/5");
    assert_eq!(doc["in_region"], false);
    assert_eq!(doc["admissible"], false);
}

#[test]
fn analyze_2xn_vertex_is_split_and_perfect() {
    let doc = stdout_json(&bin(&["analyze", "--pattern", "2x4"]));
    assert_eq!(doc["split"], true);
    assert_eq!(doc["perfect"], true);
    assert_eq!(doc["chi_f"], "1/1");
    assert_eq!(doc["min_speedup"], "1/1");
}

#[test]
fn schedule_fig1_emits_a_three_slot_frame() {
    let doc = stdout_json(&bin(&["schedule", "--pattern", "fig1", "--json"]));
    assert_eq!(doc["frame_length"], 3);
    let slots = doc["slots"].as_array().unwrap();
    assert_eq!(slots.len(), 3);
    // per frame: each broadcast sub-flow (vertices 0..3) is served twice,
    // each unicast (3..6) once
    let mut counts = [0usize; 6];
    for slot in slots {
        let vs = slot.as_array().unwrap();
        assert_eq!(vs.len(), 3);
        for v in vs {
            counts[v.as_u64().unwrap() as usize] += 1;
        }
    }
    assert_eq!(counts, [2, 2, 2, 1, 1, 1]);
    let lambda = doc["lambda"].as_array().unwrap();
    assert_eq!(lambda.len(), 3);
    for term in lambda {
        assert_eq!(term[0], "1/3");
    }
}

#[test]
fn simulate_offline_output_is_frozen() {
    let out = bin(&[
        "simulate",
        "--pattern",
        "fig1",
        "--policy",
        "offline",
        "--slots",
        "999",
        "--seed",
        "7",
    ]);
    assert!(out.status.success());
    let expected = "alpha,policy,seed,slots,mean_delay,p95_delay,mean_backlog,backlog_slope,\
                    stable,decode_failures,throughput_per_flow(json)\n\
                    1,offline,7,999,2,2,3,-0.00002404809619238478,true,0,\
                    \"{\"\"0\"\":0.6666666666666666,\"\"1\"\":0.3333333333333333,\
                    \"\"2\"\":0.3333333333333333,\"\"3\"\":0.3333333333333333}\"\n";
    assert_eq!(String::from_utf8_lossy(&out.stdout), expected);
}

#[test]
fn exit_codes_cover_parse_size_cap_and_region() {
    let parse = bin(&["simulate", "--pattern", "/no/such/file.json"]);
    assert_eq!(parse.status.code(), Some(2));

    // 2x25 expands to 50 sub-flows, past the enumeration cap
    let cap = bin(&["analyze", "--pattern", "2x25"]);
    assert_eq!(cap.status.code(), Some(3));

    let region = bin(&["schedule", "--pattern", "fig1", "--alpha", "6/5"]);
    assert_eq!(region.status.code(), Some(4));
}

#[test]
fn region_reports_the_no_coding_violation_at_the_vertex() {
    let out = bin(&["region", "3", "2/3", "1/3", "1/3", "1/3"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("no coding: 2 r0 + sum r_j = 7/3 > 2/1 : violated"));
    assert!(text.contains("uncoded feasible: false, min_scale = 7/6"));
    assert!(text.contains("coded speedup (chi_f) = 1/1"));

    let boundary = bin(&["region", "2", "1/2", "1/2", "1/2"]);
    let btext = String::from_utf8_lossy(&boundary.stdout).to_string();
    assert!(btext.contains("no coding: 2 r0 + sum r_j = 2/1 <= 2/1 : holds"));
    assert!(btext.contains("uncoded feasible: true, min_scale = 1/1"));
}

#[test]
fn sweep_artifacts_are_byte_identical_and_seed_sensitive() {
    let a = tmp_path("sweep-a.csv");
    let b = tmp_path("sweep-b.csv");
    let c = tmp_path("sweep-c.csv");
    let args = |out: &PathBuf| {
        vec![
            "sweep".to_string(),
            "--pattern".into(),
            "fig1".into(),
            "--alphas".into(),
            "1/2:1:1/4".into(),
            "--slots".into(),
            "2000".into(),
            "--out".into(),
            out.to_str().unwrap().to_string(),
        ]
    };
    let run = |out: &PathBuf, seed: Option<&str>| {
        let argv = args(out);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_codedxbar"));
        cmd.args(&argv).env_remove("CODEDXBAR_SEED");
        if let Some(s) = seed {
            cmd.env("CODEDXBAR_SEED", s);
        }
        assert!(cmd.output().expect("binary runs").status.success());
    };
    run(&a, None);
    run(&b, None);
    run(&c, Some("1"));
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    let bytes_c = std::fs::read(&c).unwrap();
    assert_eq!(bytes_a, bytes_b);
    assert_ne!(bytes_a, bytes_c);
    // header plus one row per (alpha, policy): 3 alphas x 2 default policies
    assert_eq!(bytes_a.iter().filter(|&&ch| ch == b'\n').count(), 7);
    for p in [a, b, c] {
        let _ = std::fs::remove_file(p);
    }
}
