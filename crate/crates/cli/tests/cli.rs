use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn birkhoff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_birkhoff"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn means_csv_has_one_header_and_17_digits() {
    let o = birkhoff(&[
        "means", "--system", "rotation", "--M", "8", "--N", "1", "--observable", "coordinate",
        "--points", "0", "--n-grid", "8",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text, "point,a,mean\n0,1.0000000000000000e0,4.3750000000000000e-1\n");
}

#[test]
fn verify_passes_on_transitive_rotation() {
    let o = birkhoff(&["verify", "--system", "rotation", "--M", "10000", "--N", "1", "--observable", "coordinate"]);
    assert_eq!(code(&o), 0);
    let report = json(&o);
    assert_eq!(report["passed"], true);
    assert_eq!(report["failed"].as_array().unwrap().len(), 0);
}

#[test]
fn verify_failure_names_the_invariant() {
    let o = birkhoff(&["verify", "--system", "rotation", "--M", "100", "--N", "2", "--observable", "coordinate"]);
    assert_eq!(code(&o), 2);
    let report = json(&o);
    assert_eq!(report["failed"], serde_json::json!(["full_cycle_identity"]));
    let check = &report["checks"][0];
    assert_eq!(check["name"], "full_cycle_identity");
    assert!(check["observed"].as_f64().unwrap() > 1e-3);
}

#[test]
fn verify_tolerance_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"system":{"name":"rotation","M":100,"N":2},"observable":{"name":"coordinate"},"tolerances":{"full_cycle":0.5}}"#,
    );
    assert_eq!(code(&birkhoff(&["verify", "--config", &cfg])), 0);
    let bad = write(dir.path(), "b.json", r#"{"tolerances":{"full_cycle":-1}}"#);
    assert_eq!(code(&birkhoff(&["verify", "--config", &bad])), 3);
}

#[test]
fn malformed_json_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{ not json");
    assert_eq!(code(&birkhoff(&["run", "--config", &cfg])), 3);
    let unknown = write(dir.path(), "u.json", r#"{"sytem":{}}"#);
    assert_eq!(code(&birkhoff(&["build", "--config", &unknown])), 3);
}

#[test]
fn config_errors_exit_3() {
    assert_eq!(code(&birkhoff(&["build", "--system", "torus", "--M", "3"])), 3);
    assert_eq!(code(&birkhoff(&["build", "--system", "rotation", "--M", "3", "--N", "3"])), 3);
    assert_eq!(code(&birkhoff(&["gap", "--system", "rotation", "--M", "8", "--N", "1", "--observable", "delta"])), 3);
    assert_eq!(code(&birkhoff(&["means", "--system", "rotation", "--M", "8", "--N", "1", "--observable", "block", "--block", "8"])), 3);
    assert_eq!(code(&birkhoff(&["means", "--bogus-flag"])), 3);
    assert_eq!(code(&birkhoff(&["means", "--M", "4"])), 3);
}

#[test]
fn help_exits_0() {
    assert_eq!(code(&birkhoff(&["--help"])), 0);
}

#[test]
fn io_errors_exit_1() {
    assert_eq!(code(&birkhoff(&["run", "--config", "/nonexistent/config.json"])), 1);
    let o = birkhoff(&["build", "--system", "rotation", "--M", "4", "--N", "1", "--out", "/nonexistent/dir/x.csv"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn bad_thread_count_exits_3() {
    let o = Command::new(env!("CARGO_BIN_EXE_birkhoff"))
        .args(["tail", "--system", "rotation", "--M", "4", "--N", "1", "--observable", "delta", "--threshold", "1"])
        .env("BIRKHOFF_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"analysis":"tail","system":{"name":"rotation","M":8,"N":1},"observable":{"name":"coordinate"},"threshold":0.5}"#,
    );
    let o = birkhoff(&["run", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["tail_mass"], (0.625 + 0.75 + 0.875) / 8.0);
    let o = birkhoff(&["run", "--config", &cfg, "--M", "4"]);
    assert_eq!(json(&o)["tail_mass"], 0.1875);
    let o = birkhoff(&["run", "--config", &cfg, "--observable", "delta", "--threshold", "3"]);
    assert_eq!(json(&o)["tail_mass"], 1.0);
}

#[test]
fn build_writes_system_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let report = dir.path().join("r.json");
    let o = birkhoff(&[
        "build", "--system", "rotation", "--M", "4", "--N", "1", "--observable", "coordinate",
        "--out", out.to_str().unwrap(), "--report", report.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,perm_image,value,coordinate(circle)"));
    assert_eq!(lines.next(), Some("0,1,0.0000000000000000e0,0.0000000000000000e0"));
    let r: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["transitive"], true);
    assert_eq!(r["cycles"], 1);
}

#[test]
fn approx_report_and_tabulated_images() {
    let o = birkhoff(&[
        "approx", "--system", "rotation", "--M", "101", "--N", "0", "--map", "rotation", "--map-alpha", "0.5",
        "--delta", "0.01", "--transitive",
    ]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["log"]["matched_fraction"], 1.0);
    assert!(r["log"]["mismatch_count"].as_u64().unwrap() <= r["log"]["b"].as_u64().unwrap());
    assert!(r["approx_error"].as_f64().unwrap() <= r["log"]["error_bound"].as_f64().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let images = write(dir.path(), "img.csv", "index,image\n0,0.5\n1,0.75\n2,0.0\n3,0.25\n");
    let o = birkhoff(&["approx", "--system", "rotation", "--M", "4", "--N", "0", "--images", &images, "--delta", "0.1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["approx_error"], 0.0);
    let short = write(dir.path(), "short.csv", "index,image\n0,0.5\n");
    let o = birkhoff(&["approx", "--system", "rotation", "--M", "4", "--N", "0", "--images", &short, "--delta", "0.1"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn symbolic_approximation_of_the_shift() {
    let o = birkhoff(&["approx", "--system", "bernoulli_block", "--m", "2", "--N", "2", "--map", "shift", "--delta", "0.3", "--epsilon", "0.3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["log"]["matched_fraction"], 1.0);
}

#[test]
fn gap_and_stabilize_reports() {
    let o = birkhoff(&[
        "gap", "--system", "rotation", "--M", "1024", "--N", "1", "--observable", "delta", "--K", "256", "--L",
        "512", "--points", "600,700,800",
    ]);
    assert_eq!(json(&o)["gap"], 2.0);
    let o = birkhoff(&[
        "stabilize", "--system", "rotation", "--M", "1000", "--N", "1", "--observable", "function", "--function",
        "constant", "--epsilon", "0.01",
    ]);
    assert_eq!(code(&o), 3, "constant needs a parameter");
    let o = birkhoff(&[
        "stabilize", "--system", "rotation", "--M", "1000", "--N", "1", "--observable", "block", "--block", "250",
        "--n-min", "2000",
    ]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    // two full periods: every window mean is exactly 1/4
    assert_eq!(r["result"]["plateau_length"], 2000);
    assert_eq!(r["result"]["found"], true);
    assert_eq!(r["result"]["covered_fraction"], 1.0);
}

#[test]
fn fluct_report_occupancy_ends_at_one() {
    let o = birkhoff(&[
        "fluct", "--system", "rotation", "--M", "1024", "--N", "1", "--observable", "delta", "--epsilon", "0.5",
        "--horizon", "1024", "--points", "1000,1010",
    ]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    let occ = r["report"]["occupancy"].as_array().unwrap();
    assert_eq!(occ.last().unwrap(), 1.0);
    assert!(r["report"]["counts"].as_array().unwrap().iter().all(|c| c.as_u64().unwrap() >= 1));
}
