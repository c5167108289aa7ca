use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qwm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qwm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn deltaf_prints_table_one_values() {
    let dir = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    let o = qwm(&["deltaf"], dir.path());
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("delta_f.csv")).unwrap();
    let pf: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    for (got, want) in pf.iter().zip([-0.354, -0.633, -0.928]) {
        assert!((got - want).abs() < 5e-4, "{got} vs {want}");
    }
}

#[test]
fn simulate_is_byte_identical_across_reruns() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(qwm(&["simulate", "--seed", "11"], a.path())
        .status
        .success());
    assert!(qwm(&["simulate", "--seed", "11"], b.path())
        .status
        .success());
    let x = fs::read(a.path().join("image.csv")).unwrap();
    let y = fs::read(b.path().join("image.csv")).unwrap();
    assert_eq!(x, y);
    assert!(qwm(&["simulate", "--seed", "12"], b.path())
        .status
        .success());
    assert_ne!(x, fs::read(b.path().join("image.csv")).unwrap());
}

#[test]
fn sweep_reruns_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "sweep",
        "--reps",
        "2",
        "--rf-areas",
        "0.5,1.5",
        "--beta-e",
        "0.58",
        "--seed",
        "3",
    ];
    assert!(qwm(&args, a.path()).status.success());
    assert!(qwm(&args, b.path()).status.success());
    let x = fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    assert_eq!(x, fs::read_to_string(b.path().join("sweep.csv")).unwrap());
    assert_eq!(x.lines().count(), 5);
    assert!(x.starts_with("beta_E,rf_area,rep,G,sem,P_0_0,P_0_1,P_1_0,error\n"));
}

#[test]
fn exact_sweep_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    assert!(qwm(&["sweep", "--exact", "--reps", "1"], dir.path())
        .status
        .success());
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut by_beta: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for l in csv.lines().skip(1) {
        let cols: Vec<&str> = l.split(',').collect();
        by_beta
            .entry(cols[0].into())
            .or_default()
            .push(cols[3].parse().unwrap());
    }
    assert_eq!(by_beta.len(), 3);
    for gs in by_beta.values() {
        assert_eq!(gs.len(), 10);
        let spread = gs.iter().cloned().fold(f64::MIN, f64::max)
            - gs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-12);
    }
}

#[test]
fn simulate_then_analyze_recovers_four_clouds() {
    let dir = tempfile::tempdir().unwrap();
    assert!(qwm(&["simulate"], dir.path()).status.success());
    let image = dir.path().join("image.csv");
    let o = qwm(&["analyze", "--image", image.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let result = fs::read_to_string(dir.path().join("run_result.csv")).unwrap();
    assert_eq!(result.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "beta_e = 1.11\nrf_area = 0.7\n").unwrap();
    let o = qwm(
        &["exact-dist", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("work_distribution.csv")).unwrap();
    assert!(
        csv.lines().nth(1).unwrap().ends_with(",-6.33440105751e-1"),
        "{csv}"
    );
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "energy_ratio = 0.56\ndelta_p_tilde = 1e-27\n").unwrap();
    let o = qwm(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    fs::write(&cfg, "atom_cont = 5\n").unwrap();
    let o = qwm(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("atom_cont"));
    let o = qwm(
        &["analyze", "--image", "/nonexistent/image.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_3_and_writes_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let o = qwm(&["smear", "--points", "9"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let diag = fs::read_to_string(dir.path().join("diagnostic.txt")).unwrap();
    assert!(diag.contains("grid too coarse"), "{diag}");
}

#[test]
fn povm_check_reports_small_residuals() {
    let dir = tempfile::tempdir().unwrap();
    assert!(
        qwm(&["povm-check", "--random", "5", "--dim", "4"], dir.path())
            .status
            .success()
    );
    let report = fs::read_to_string(dir.path().join("povm_check.txt")).unwrap();
    assert_eq!(report.lines().count(), 6);
    for line in report.lines() {
        let completeness: f64 = line
            .split("completeness ")
            .nth(1)
            .unwrap()
            .split(',')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        assert!(completeness < 1e-12);
    }
}

#[test]
fn manifold_exact_mode_finds_a_line() {
    let dir = tempfile::tempdir().unwrap();
    assert!(qwm(&["manifold", "--exact", "--reps", "1"], dir.path())
        .status
        .success());
    let report = fs::read_to_string(dir.path().join("manifold_report.txt")).unwrap();
    assert_eq!(
        report.matches("dimension 1 (expected 1)").count(),
        3,
        "{report}"
    );
    assert!(dir.path().join("manifold_points.csv").exists());
}
