use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sota_core::synth::{syn3, Syn3Config};

fn sota(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sota"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = sota(args);
    assert!(
        out.status.success(),
        "sota {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_syn3(dir: &Path) -> PathBuf {
    let inst = syn3(&Syn3Config::default()).unwrap();
    let mut spec = inst.spec.clone();
    spec.bundle = Some("syn3.bundle.json".into());
    inst.bundle.save(dir.join("syn3.bundle.json")).unwrap();
    let net = dir.join("syn3.json");
    spec.save(&net).unwrap();
    net
}

fn fixture() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/mini_gtfs")
        .display()
        .to_string()
}

#[test]
fn dominance_matches_plain_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_syn3(dir.path());
    let net = net.to_str().unwrap();
    let root = |mode: &str| -> f64 {
        let v: Value = serde_json::from_str(&ok(&[
            "solve", "--net", net, "--od", "A:C", "--budget", "22.5m", "--mode", mode,
        ]))
        .unwrap();
        assert_eq!(v["budget_ticks"], 90);
        v["root_utility"].as_f64().unwrap()
    };
    let plain = root("plain");
    assert!((root("dominance") - plain).abs() < 1e-12);
    assert!(plain > 0.9);
}

#[test]
fn sweep_writes_fifteen_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    ok(&[
        "solve",
        "--net",
        "builtin:syn3",
        "--budget-sweep",
        "10m:45m:2.5m",
        "--mode",
        "dominance",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 16);
    assert_eq!(lines[0], "budget_ticks,budget_minutes,root_utility");
    assert!(lines[1].starts_with("40,10,"));
    assert!(lines[15].starts_with("180,45,"));
}

#[test]
fn missing_bundle_exits_2_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_syn3(dir.path());
    std::fs::remove_file(dir.path().join("syn3.bundle.json")).unwrap();
    let out = sota(&["solve", "--net", net.to_str().unwrap(), "--od", "A:C"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
    assert!(err["error"]["message"].as_str().unwrap().contains("syn3.bundle.json"));
}

#[test]
fn bad_inputs_exit_2() {
    for args in [
        vec!["solve", "--net", "builtin:syn3", "--budget", "20s"],
        vec!["solve", "--net", "builtin:syn3", "--budget", "46m"],
        vec!["solve", "--net", "builtin:syn3", "--od", "A:Z"],
        vec!["simulate", "--net", "builtin:example1", "-n", "0"],
    ] {
        let out = sota(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert!(err["error"]["kind"].is_string());
    }
}

#[test]
fn outputs_are_reproducible_and_manifested() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.json");
    let manifest = dir.path().join("manifest.json");
    let run = || {
        ok(&[
            "simulate",
            "--net",
            "builtin:example1",
            "-n",
            "5000",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
            "--manifest",
            manifest.to_str().unwrap(),
        ]);
        (std::fs::read(&out).unwrap(), std::fs::read(&manifest).unwrap())
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let m: Value = serde_json::from_slice(&a.1).unwrap();
    assert_eq!(m["seeds"][0], 7);
    assert_eq!(m["grid"]["delta_seconds"], 60.0);
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn compare_sweep_never_favours_let() {
    let out = ok(&["compare", "--net", "builtin:syn3"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().all(|r| r["diff"].as_f64().unwrap() >= -1e-12));
    assert_eq!(v["let_legs"][0]["line"], "1");
}

#[test]
fn bench_syn3_has_45_rows() {
    let out = ok(&["bench", "--instances", "syn3", "--no-timing"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 46);
    assert!(lines[0].starts_with("instance,mode,budget_ticks"));
    assert!(lines[1].starts_with("syn3,plain,40,10,"));
    assert_eq!(out, ok(&["bench", "--instances", "syn3", "--no-timing"]));
}

#[test]
fn bench_generators_take_seeds() {
    let out = ok(&[
        "bench",
        "--instances",
        "low-diff,high-diff",
        "--seeds",
        "1,2",
        "--modes",
        "plain",
        "--budget-sweep",
        "20m:30m:10m",
    ]);
    assert_eq!(out.lines().count(), 1 + 4 * 2);
    assert!(out.contains("low-diff:2,plain,120,30,"));
}

#[test]
fn policy_dump_holds_example_decisions() {
    let out = ok(&["policy", "--net", "builtin:example1", "--station", "O"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    let rows = v["stations"][0]["decisions"].as_array().unwrap();
    let find = |line: &str, rest: &[&str], t: u64, r: u64| {
        rows.iter()
            .find(|d| d["line"] == line && d["rest"] == serde_json::json!(rest) && d["t"] == t && d["r"] == r)
            .map(|d| d["decision"].as_str().unwrap().to_string())
    };
    assert_eq!(find("3", &["1", "2"], 18, 2).as_deref(), Some("wait"));
    assert_eq!(find("1", &["2"], 17, 3).as_deref(), Some("board"));
    assert_eq!(find("1", &["2", "3"], 19, 1).as_deref(), Some("board"));
}

#[test]
fn ingest_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("bundle.json");
    let report = dir.path().join("report.json");
    let args = [
        "ingest",
        "--gtfs",
        &fixture(),
        "--window",
        "06:00-10:00",
        "--delta",
        "15s",
        "--sigma",
        "0.25:0.5",
        "--seed",
        "3",
        "--out",
        bundle.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ];
    ok(&args);
    let first = std::fs::read(&bundle).unwrap();
    ok(&args);
    assert_eq!(first, std::fs::read(&bundle).unwrap());
    let r: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let r1 = r["lines"]
        .as_array()
        .unwrap()
        .iter()
        .find(|l| l["line"] == "R1:0")
        .unwrap();
    assert_eq!(r1["headway_seconds"], 750.0);
    let net = dir.path().join("network.json");
    let v: Value = serde_json::from_str(&ok(&[
        "solve",
        "--net",
        net.to_str().unwrap(),
        "--od",
        "S1:S3",
        "--budget",
        "30m",
    ]))
    .unwrap();
    let u = v["root_utility"].as_f64().unwrap();
    assert!(u > 0.0 && u <= 1.0);
}

#[test]
fn ingest_of_empty_window_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = sota(&[
        "ingest",
        "--gtfs",
        &fixture(),
        "--window",
        "01:00-02:00",
        "--out",
        dir.path().join("b.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "gtfs");
}
