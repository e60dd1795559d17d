use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn idmft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idmft"))
        .args(args)
        .env_remove("IDMFT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fixture(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
        .display()
        .to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn dimer_scan_csv() {
    let o = idmft(&["scan", "--model", "dimer", "--t-list", "1,0.5,0.1", "--U", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("label,R,E_fci,E_cum,S,E_idmft,frobenius_error,degenerate")
    );
    let s: Vec<f64> = lines.map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert_eq!(s.len(), 3);
    assert!(s[0] < s[1] && s[1] < s[2]);
}

#[test]
fn missing_file_is_a_domain_error() {
    let o = idmft(&["fci", "missing.fcidump"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.fcidump"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(idmft(&["fci", "--bogus"]).status.code(), Some(2));
    assert_eq!(idmft(&["scan"]).status.code(), Some(2));
    assert_eq!(idmft(&["schur", "--penalty", "cubic"]).status.code(), Some(2));
    assert_eq!(idmft(&[]).status.code(), Some(2));
}

#[test]
fn identical_anchors_fit_to_zero_kappa() {
    let f = fixture("h2/h2_R0.74.fcidump");
    let o = idmft(&[
        "fit",
        "--eq",
        &f,
        "--diss",
        &f,
        "--e-eq",
        "-1.163374490319",
        "--e-diss",
        "-1.163374490319",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kappa"].as_f64(), Some(0.0));
    // b = E(κ=0) - E_ref, the mean-field gap to the exact energy
    let b = v["b"].as_f64().unwrap();
    assert!(b > 0.03 && b < 0.04, "{b}");
}

#[test]
fn fci_prints_energy_and_occupations() {
    let o = idmft(&["fci", "--model", "dimer", "--t", "1", "--U", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let e: f64 = text
        .lines()
        .next()
        .unwrap()
        .split_whitespace()
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((e - (0.5 - 4.25f64.sqrt())).abs() < 1e-10);
    assert!(text.contains("occupations"));
}

#[test]
fn scan_files_round_trip_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = idmft(&[
        "--out-dir",
        out,
        "scan",
        "--model",
        "dimer",
        "--t-list",
        "1,0.5,0.2,0.1",
        "--U",
        "1",
        "--kappa",
        "0.1",
        "--b",
        "0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("scan.csv").exists());
    let scan = dir.path().join("scan.json");
    let records = json(&scan);
    assert_eq!(records.as_array().unwrap().len(), 4);
    assert_eq!(records[0]["gamma_fci"]["rows"], 4);

    let o = idmft(&["--out-dir", out, "analyze", scan.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("analyze.json"));
    assert_eq!(report["points"], 4);
    assert_eq!(report["single_valuedness"]["single_valued"], true);
    assert_eq!(report["error_curve"].as_array().unwrap().len(), 4);
    assert!(report["linear_fit"]["r_squared"].as_f64().unwrap() > 0.0);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_idmft"))
        .args(["schur", "--penalty", "sqrt_ph", "--trials", "200"])
        .env("IDMFT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    let v = json(&dir.path().join("schur.json"));
    assert_eq!(v["verdict"]["passed"], true);
    let alpha = v["exchange_force"]["alpha"].as_f64().unwrap();
    assert!((alpha - 0.5).abs() < 0.01);
}

#[test]
fn idmft_emits_gamma() {
    let o = idmft(&[
        "idmft", "--model", "dimer", "--t", "1", "--U", "1", "--kappa", "0.2", "--b", "0.1",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["converged"], true);
    let g = &v["gamma"];
    assert_eq!((g["rows"].as_u64(), g["cols"].as_u64()), (Some(4), Some(4)));
    let trace: f64 = (0..4).map(|i| g["data"][5 * i].as_f64().unwrap()).sum();
    assert!((trace - 2.0).abs() < 1e-10);
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = [
        "scan", "--model", "dimer", "--t-list", "1,0.3", "--U", "2", "--kappa", "0.3", "--b", "0.05",
    ];
    let (a, b) = (idmft(&args), idmft(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn file_scan_reads_separation_from_name() {
    let a = fixture("heh_plus/heh_plus_R1.00.fcidump");
    let b = fixture("heh_plus/heh_plus_R2.00.fcidump");
    let o = idmft(&["scan", &a, &b]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rs: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rs, vec![1.0, 2.0]);
}

fn dimer_fcidump(ms2: i32) -> String {
    format!("&FCI NORB=2,NELEC=2,MS2={ms2},\n&END\n 1.0 1 1 1 1\n 1.0 2 2 2 2\n -1.0 2 1 0 0\n 0.0 0 0 0 0\n")
}

#[test]
fn failed_scan_keeps_finished_geometries() {
    let dir = tempfile::tempdir().unwrap();
    let singlet = dir.path().join("dimer_R1.00.fcidump");
    let triplet = dir.path().join("triplet_R2.00.fcidump");
    std::fs::write(&singlet, dimer_fcidump(0)).unwrap();
    std::fs::write(&triplet, dimer_fcidump(2)).unwrap();
    let o = idmft(&[
        "--out-dir",
        dir.path().to_str().unwrap(),
        "scan",
        singlet.to_str().unwrap(),
        triplet.to_str().unwrap(),
        "--kappa",
        "0.1",
        "--b",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("triplet_R2.00"));
    let partial = json(&dir.path().join("scan.partial.json"));
    assert_eq!(partial.as_array().unwrap().len(), 1);
    assert_eq!(partial[0]["label"], "dimer_R1.00");
    assert!(!dir.path().join("scan.csv").exists());
}
