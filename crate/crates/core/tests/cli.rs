use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybrid-iss"))
}

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn certify_writes_report_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let status = bin().args(["certify", &data("two_clock_network.json"), "--out"]).arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["verdict"], "certified-for-solution-class");
    assert_eq!(report["rates"]["c"], -2.0);

    let status = bin().args(["certify", &data("two_clock_network_l17.json"), "--out"]).arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn bad_input_exits_3() {
    assert_eq!(bin().args(["certify", "/nonexistent.json"]).status().unwrap().code(), Some(3));
    assert_eq!(bin().args(["frobnicate"]).status().unwrap().code(), Some(3));
}

#[test]
fn region_reports_bound() {
    let out = bin().args(["region", "-2", "1"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["region"]["class"], "radt");
    assert_eq!(v["region"]["delta_star_bound"], 0.5);
}

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", &data("two_clock_network.json"), "--traj", "2", "--seed", "3", "--csv"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
    let csv = std::fs::read_to_string(dir.path().join("traj_0001.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("t,j,"));
}
