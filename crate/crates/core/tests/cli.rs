//! End-to-end runs of the `qentropy` binary.

use std::path::Path;
use std::process::{Command, Output};

use qentropy::capacity::{self, CapacityEstimate};
use qentropy::channel::Channel;
use qentropy::inequalities::FuzzReport;
use qentropy::json;
use qentropy::qstate::RngStream;

fn qentropy(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qentropy"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const SMALL_FUZZ: [&str; 6] = ["--trials", "100", "--decomposition-trials", "50", "--seed", "3"];

#[test]
fn verify_inequalities_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["verify-inequalities"];
    args.extend(SMALL_FUZZ);
    let o = qentropy(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: FuzzReport = json::read_file(&dir.path().join("reports/strong-concavity/3.json")).unwrap();
    assert_eq!(report.trials, 100);
    assert_eq!(report.failures, 0);
    assert_eq!(report.witnesses.len(), 10);
    assert!(dir.path().join(&report.witnesses[0]).exists());
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().count(), 9);
}

#[test]
fn positive_tolerance_is_a_self_test_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["verify-inequalities", "--tol", "0.5", "--format", "json"];
    args.extend(SMALL_FUZZ);
    let o = qentropy(&args, dir.path());
    assert_eq!(code(&o), 1);
    let reports: Vec<FuzzReport> = serde_json::from_slice(&o.stdout).unwrap();
    assert!(reports.iter().map(|r| r.failures).sum::<usize>() > 0);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut args = vec!["verify-inequalities", "--only", "joint-convexity,strong-subadditivity-i"];
    args.extend(SMALL_FUZZ);
    let (oa, ob) = (qentropy(&args, a.path()), qentropy(&args, b.path()));
    assert_eq!(oa.stdout, ob.stdout);
    for rel in ["reports/joint-convexity/3.json", "reports/strong-subadditivity-i/3.json"] {
        assert_eq!(std::fs::read(a.path().join(rel)).unwrap(), std::fs::read(b.path().join(rel)).unwrap());
    }
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qentropy(&["verify-inequalities"], dir.path())), 2);
    assert_eq!(code(&qentropy(&["verify-inequalities", "--seed", "1", "--dims", "0"], dir.path())), 2);
    assert_eq!(code(&qentropy(&["capacity", "ce", "--seed", "1"], dir.path())), 2);
    assert_eq!(code(&qentropy(&["bounds", "--seed", "1", "--dims", "9"], dir.path())), 2);
    assert_eq!(code(&qentropy(&["frobnicate", "--seed", "1"], dir.path())), 2);
}

#[test]
fn malformed_channel_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"kind": "kraus", "d_in": 2, "d_out": 2, "kraus": [[1, 0]]}"#).unwrap();
    let o = qentropy(&["capacity", "ce", "--channel", bad.to_str().unwrap(), "--seed", "1"], dir.path());
    assert_eq!(code(&o), 2);
    std::fs::write(&bad, "not json").unwrap();
    let o = qentropy(&["capacity", "chi", "--channel", bad.to_str().unwrap(), "--seed", "1"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn capacity_zoo_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = qentropy(&["capacity", "ce", "--zoo", "identity", "--dim", "2", "--seed", "1", "--format", "json"], dir.path());
    assert_eq!(code(&o), 0);
    let est: CapacityEstimate = serde_json::from_slice(&o.stdout).unwrap();
    assert!((est.value - 2.0).abs() <= 1e-3);
    let saved: CapacityEstimate = json::read_file(&dir.path().join("capacity/ce-identity-d2-1.json")).unwrap();
    assert_eq!(saved.value, est.value);

    let o = qentropy(
        &["capacity", "chi", "--zoo", "depolarizing", "--dim", "2", "--p", "1.0", "--seed", "1", "--format", "json"],
        dir.path(),
    );
    let est: CapacityEstimate = serde_json::from_slice(&o.stdout).unwrap();
    assert!(est.value.abs() <= 1e-6);
}

#[test]
fn capacity_of_eb_channel_file_respects_log_d() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = RngStream::new(99, 0).rng();
    let ch: Channel = capacity::random_eb_channel(2, &mut rng).unwrap().into();
    let path = dir.path().join("eb.json");
    json::write_file(&path, &ch).unwrap();
    let o = qentropy(&["capacity", "ce", "--channel", path.to_str().unwrap(), "--seed", "2", "--format", "json"], dir.path());
    assert_eq!(code(&o), 0);
    let est: CapacityEstimate = serde_json::from_slice(&o.stdout).unwrap();
    assert!(est.value <= 1.0 + 1e-6);
    assert!(dir.path().join("capacity/ce-eb-2.json").exists());
}

#[test]
fn bounds_on_dephasing_is_tight() {
    let dir = tempfile::tempdir().unwrap();
    let o = qentropy(&["bounds", "--zoo", "dephasing", "--seed", "4", "--format", "json"], dir.path());
    assert_eq!(code(&o), 0);
    let entries: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let eb = &entries[0]["check"];
    assert_eq!(eb["name"], "eb-ce-log-d");
    assert!(eb["slack"].as_f64().unwrap().abs() <= 1e-3);
}

#[test]
fn bounds_sampled_campaign_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = qentropy(&["bounds", "--seed", "6", "--eb-channels", "3", "--channels", "2", "--restarts", "6"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("bounds/6.json").exists());
}

#[test]
fn additivity_named_pairs() {
    let dir = tempfile::tempdir().unwrap();
    for (eb, other, total) in [("dephasing", "identity", 2.0), ("constant", "constant", 0.0)] {
        let o = qentropy(
            &["additivity-probe", "--eb", eb, "--other", other, "--seed", "8", "--restarts", "6", "--format", "json"],
            dir.path(),
        );
        assert_eq!(code(&o), 0);
        let entries: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let tensor = entries[0]["tensor"]["value"].as_f64().unwrap();
        assert!((tensor - total).abs() <= 1e-3, "{eb} x {other}: {tensor}");
    }
    let o = qentropy(&["additivity-probe", "--eb", "identity", "--other", "identity", "--seed", "8"], dir.path());
    assert_eq!(code(&o), 2);
}
