use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_acceptance");

#[test]
fn every_criterion_passes() {
    let out = Command::new(BIN).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 9, "{stdout}");
    assert!(lines.iter().all(|l| l.starts_with("PASS ")), "{stdout}");
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn criteria_can_be_selected_by_name() {
    let out = Command::new(BIN).args(["metric-math", "retry-semantics"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let names: Vec<&str> = stdout.lines().filter_map(|l| l.split_whitespace().nth(1)).collect();
    assert_eq!(names, ["metric-math", "retry-semantics"]);
    let out = Command::new(BIN).arg("speed").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
