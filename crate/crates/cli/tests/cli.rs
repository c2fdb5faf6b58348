use std::process::{Command, Output};

fn ncstokes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncstokes"))
        .args(args)
        .env_remove("NCSTOKES_LEVELS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_passes() {
    let o = ncstokes(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().count() >= 6);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn perturbed_bubble_fails_verification() {
    let o = ncstokes(&["verify", "--perturb-bubble"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL face moments"));
}

#[test]
fn unsupported_quadrature_degree_is_a_usage_error() {
    let o = ncstokes(&["verify", "--quadrature-degree", "31"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("quadrature degree"));
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(ncstokes(&["study", "--levels", "0"]).status.code(), Some(2));
    assert_eq!(ncstokes(&["solve", "--level", "9"]).status.code(), Some(2));
    assert_eq!(ncstokes(&["study", "--outer-tol", "2"]).status.code(), Some(2));
    assert_eq!(ncstokes(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn exhausted_iterations_exit_with_one() {
    let o = ncstokes(&["solve", "--level", "1", "--max-outer", "3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn study_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("study.csv");
    let o = ncstokes(&[
        "study",
        "--levels",
        "2",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let records: Vec<_> = rows.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), 2);
    let err: f64 = records[1][col("l2_velocity")].parse().unwrap();
    assert!(err > 0.0 && err < 0.05);
    assert_eq!(&records[1][col("status")], "ok");
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "levels = 1\nformat = csv\n").unwrap();
    let o = ncstokes(&["study", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 2);
    let o = ncstokes(&["study", "--config", cfg.to_str().unwrap(), "--format", "markdown"]);
    assert!(stdout(&o).starts_with('|'));
    std::fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(
        ncstokes(&["study", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
}
