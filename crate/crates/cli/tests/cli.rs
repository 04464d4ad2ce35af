use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_circumnav"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn last_row(csv: &str) -> Vec<f64> {
    csv.lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect()
}

fn header_index(csv: &str, col: &str) -> usize {
    csv.lines().next().unwrap().split(',').position(|c| c == col).unwrap()
}

#[test]
fn baseline_config_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&[
        "run",
        "--config",
        config("baseline.cfg").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,y_1,y_2,xhat_1,xhat_2,x_1,x_2,D_true,D_measured,D_hat,xtilde_norm,L\n"));
    let row = last_row(&csv);
    assert_eq!(row[0], 60.0);
    assert!((row[header_index(&csv, "D_true")] - 2.0).abs() < 1e-3);
    for f in ["report.txt", "distance.dat", "xtilde.dat", "path.dat"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn drift_report_flags_bounded_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--config",
        config("drift.cfg").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.lines().any(|l| l == "distance_error_bounded = true"), "{report}");
    assert!(String::from_utf8(o.stdout).unwrap().contains("scenario = drift"));
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "gains.alpha = 1\nthis line has no separator\n").unwrap();
    let out = dir.path().join("out");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.starts_with("{\"error\":\"config_invalid\",\"message\":"), "{err}");
}

#[test]
fn invalid_override_and_missing_file_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["run", "--set", "schedule.a=0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["run", "--set", "no.such.key=1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "run",
        "--config",
        dir.path().join("missing.cfg").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn identical_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for (name, seed) in [("a", "3"), ("b", "3"), ("c", "4")] {
        let out = dir.path().join(name);
        let o = run(&[
            "run",
            "--config",
            config("noise.cfg").to_str().unwrap(),
            "--set",
            "integrator.duration=5",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
            "--quiet",
        ]);
        assert!(o.status.success());
        csvs.push(fs::read(out.join("trajectory.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_ne!(csvs[0], csvs[2]);
}

#[test]
fn verify_exit_status_tracks_failures() {
    let o = run(&["verify", "--config", config("baseline.cfg").to_str().unwrap()]);
    assert!(o.status.success());
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("lyapunov_nonincreasing  PASS"), "{table}");
    assert!(table.contains("0 failed"));

    // too short to converge: the convergence and PE checks fail
    let o = run(&["verify", "--set", "integrator.duration=1", "--quiet"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_writes_one_report_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "sweep",
        "--set",
        "integrator.duration=2",
        "--grid",
        "gains.gamma=0.5,2",
        "--grid",
        "schedule.a=1,-1,2",
        "--out",
        dir.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 0..6 {
        assert!(dir.path().join(format!("cell_{i:03}/report.txt")).is_file());
    }
    let summary = fs::read_to_string(dir.path().join("summary.tsv")).unwrap();
    assert_eq!(summary.lines().count(), 7);
    assert!(summary.contains("gains.gamma=2 schedule.a=-1"));
}

#[test]
fn sweep_rejects_bad_cell_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = run(&["sweep", "--grid", "gains.gamma=1,-1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn schedule_dump_covers_one_period() {
    let o = run(&["schedule-dump", "--samples", "8"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(' ').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0], vec![0.0, 0.0, 1.0, -1.0, 0.0]);
    assert!((rows[8][0] - 2.0 * std::f64::consts::PI).abs() < 1e-12);

    let o = run(&[
        "schedule-dump",
        "--config",
        config("spatial.cfg").to_str().unwrap(),
        "--samples",
        "4",
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("# t a11 a12 a13"));
    assert!(!text.contains("-0.0 "));
}

#[test]
fn shipped_configs_parse() {
    for name in ["baseline", "normalized", "drift", "noise", "spatial"] {
        let o = run(&[
            "schedule-dump",
            "--config",
            config(&format!("{name}.cfg")).to_str().unwrap(),
            "--samples",
            "1",
        ]);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
