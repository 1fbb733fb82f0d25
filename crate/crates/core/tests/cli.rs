use std::process::{Command, Output};

fn orperc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orperc")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sweep_grid_is_inclusive() {
    let o = orperc(&[
        "sweep", "--model", "example", "--u", "0,-1", "--p-grid", "0.05:0.30:0.025", "--n", "4", "--reps", "50",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], orperc::cluster::SWEEP_CSV_HEADER);
    assert_eq!(lines.len(), 12);
    assert!(lines[11].starts_with("0.3"));
}

#[test]
fn invalid_input_exits_with_two() {
    assert_eq!(orperc(&["sweep", "--u", "0,-1"]).status.code(), Some(2));
    assert_eq!(orperc(&["explore", "--model", "example", "--p", "1.5"]).status.code(), Some(2));
    assert_eq!(orperc(&["explore", "--model", "example", "--p", "0.5", "--x", "99,0", "--radius", "3"]).status.code(), Some(2));
    assert_eq!(orperc(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn missing_certificate_exits_with_three() {
    let o = orperc(&["certify", "--model", "example", "--p", "0.9", "--psi", "0,-1", "--k-max", "1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(orperc(&["--help"]).status.code(), Some(0));
    assert_eq!(orperc(&["render", "--help"]).status.code(), Some(0));
}

#[test]
fn command_line_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"model": "example", "p": 0.3, "n": 3, "reps": 20, "u": "0,-1", "p_grid": "0.4:0.4:0.1"}"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let o = orperc(&["sweep", "--config", cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("0.4,3,20,"), "{row}");

    let o = orperc(&["sweep", "--config", cfg, "--n", "5", "--reps", "30"]);
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("0.4,5,30,"), "{row}");
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phi.json");
    let o = orperc(&[
        "phi", "--model", "example", "--p", "0.1", "--psi", "0,-1", "--exact", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["set_size"], 6);
    assert!((v["upper"].as_f64().unwrap() - 0.19454).abs() < 1e-4);
}

#[test]
fn render_is_identical_across_thread_counts() {
    let run = |threads: &str| {
        orperc(&["render", "--model", "example", "--p", "0.55", "--seed", "4", "--width", "40", "--threads", threads]).stdout
    };
    let a = run("1");
    assert!(a.starts_with(b"P6\n81 81\n255\n"));
    assert_eq!(a, run("3"));
}

#[test]
fn oracle_paths_table() {
    let o = orperc(&["oracle", "--kind", "paths", "--M", "2", "--p", "0.2", "--n", "3", "--l-max", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 12);
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|f| f.parse().unwrap()).collect();
    assert!(last[2] <= last[3]);
}
