use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qsvt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsvt")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(p: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(p).unwrap().lines().skip(1).map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect()
}

#[test]
fn train_writes_schedule_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsvt(&[
        "train-phases",
        "--degree",
        "21",
        "--iters",
        "100",
        "--lr",
        "0.1",
        "--seed",
        "7",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("seed 7"));
    assert_eq!(csv_rows(&dir.path().join("loss_trace.csv")).len(), 100);
    let sched: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("schedule.json")).unwrap()).unwrap();
    assert_eq!(sched["seed"], 7);
    assert_eq!(sched["phis_even"].as_array().unwrap().len(), 11);
    assert_eq!(sched["phis_odd"].as_array().unwrap().len(), 12);
    let meta = fs::read_to_string(dir.path().join("train_meta.json")).unwrap();
    assert!(meta.contains("\"seed\": 7"));
}

#[test]
fn single_iteration_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsvt(&["train-phases", "--iters", "1", "--out", path(dir.path())]);
    assert!(o.status.success());
    assert_eq!(csv_rows(&dir.path().join("loss_trace.csv")).len(), 1);
}

#[test]
fn even_degree_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsvt(&["train-phases", "--degree", "20", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("odd"));
}

#[test]
fn bad_flag_is_a_validation_error() {
    assert_eq!(qsvt(&["train-phases", "--degree", "many"]).status.code(), Some(1));
    assert_eq!(qsvt(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(qsvt(&["--help"]).status.code(), Some(0));
}

#[test]
fn divergence_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsvt(&["train-phases", "--lr", "inf", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(qsvt(&["train-phases", "--seed", "3", "--iters", "20", "--out", path(d.path())]).status.success());
    }
    for f in ["schedule.json", "loss_trace.csv", "train_meta.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn eval_poly_tabulates_the_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    assert!(qsvt(&["train-phases", "--seed", "1", "--out", out]).status.success());
    let sched = dir.path().join("schedule.json");
    let o = qsvt(&["eval-poly", "--schedule", path(&sched), "--points", "50", "--out", out]);
    assert!(o.status.success());
    let rows = csv_rows(&dir.path().join("poly.csv"));
    assert_eq!(rows.len(), 50);
    assert_eq!(rows[0][0], 0.25);
    assert_eq!(rows[49][0], 1.0);
    // target column is s / x
    for r in &rows {
        assert!((r[2] - 0.10145775 / r[0]).abs() < 1e-15);
    }
    let err: f64 = stdout(&o).rsplit(' ').next().unwrap().trim().parse().unwrap();
    assert!(err <= 0.10, "{err}");
}

#[test]
fn eval_poly_batch() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsvt(&["eval-poly", "--degrees", "11,21", "--seeds", "0,1", "--iters", "10", "--out", path(dir.path())]);
    assert!(o.status.success());
    let rows = csv_rows(&dir.path().join("poly_errors.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!((rows[0][0], rows[3][0], rows[3][1]), (11.0, 21.0, 1.0));
}

fn write_csv(p: &Path, rows: &[Vec<f64>]) {
    let text: String =
        rows.iter().map(|r| r.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(",") + "\n").collect();
    fs::write(p, text).unwrap();
}

fn pade_rows(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (j + n - i) % n {
                    0 => 1.0,
                    1 => 0.25,
                    k if k == n - 1 => 0.25,
                    _ => 0.0,
                })
                .collect()
        })
        .collect()
}

#[test]
fn solve_identity() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_csv(&a, &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
    write_csv(&b, &[vec![0.5], vec![-1.0], vec![2.0]]);
    let o = qsvt(&["solve-linear", "--matrix", path(&a), "--rhs", path(&b), "--seed", "1", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("solution.csv"));
    // identity has every singular value at 1, where the fitted polynomial's ratio to s/x is off by its endpoint error
    let ratio = rows[0][1] / 0.5;
    for (r, want) in rows.iter().zip([0.5, -1.0, 2.0]) {
        assert!((r[1] - ratio * want).abs() < 1e-12);
        assert_eq!(r[2], want);
    }
}

#[test]
fn solve_pade_system_matches_classical_route() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let n = 64;
    write_csv(&a, &pade_rows(n));
    write_csv(&b, &[(0..n).map(|i| (0.37 * i as f64).sin() + 0.1).collect()]);
    let out = path(dir.path());
    let exact = qsvt(&["solve-linear", "--matrix", path(&a), "--rhs", path(&b), "--backend", "exact", "--out", out]);
    assert!(exact.status.success());
    let rows = csv_rows(&dir.path().join("solution.csv"));
    let worst = rows.iter().map(|r| (r[1] - r[2]).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");

    let poly = qsvt(&["solve-linear", "--matrix", path(&a), "--rhs", path(&b), "--seed", "1", "--out", out]);
    assert!(poly.status.success());
    assert!(stdout(&poly).contains("residual"));
}

#[test]
fn ill_conditioned_matrix_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_csv(&a, &[vec![1.0, 0.0], vec![0.0, 0.1]]);
    write_csv(&b, &[vec![1.0, 1.0]]);
    let o = qsvt(&["solve-linear", "--matrix", path(&a), "--rhs", path(&b), "--iters", "2", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn maxwell_defaults_record_fifty_steps() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsvt(&["run-maxwell", "--seed", "1", "--out", path(dir.path())]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("n = 128: 50 steps"));
    let rows = csv_rows(&dir.path().join("maxwell_n128.csv"));
    assert_eq!(rows.len(), 50);
    assert!((rows[49][1] - 0.5).abs() < 1e-12);
    assert_eq!(csv_rows(&dir.path().join("snapshot_n128_step0050.csv")).len(), 128);
    assert!(dir.path().join("schedule.json").exists());
}

#[test]
fn maxwell_grid_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsvt(&["run-maxwell", "--grid-sweep", "32,64", "--t-final", "0.1", "--out", path(dir.path())]);
    assert!(o.status.success());
    let rows = csv_rows(&dir.path().join("grid_sweep.csv"));
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![32.0, 64.0]);
    assert!(dir.path().join("maxwell_n64.csv").exists());
}

#[test]
fn statevector_backend_matches_operator() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    assert!(qsvt(&["train-phases", "--seed", "1", "--out", out]).status.success());
    let sched = dir.path().join("schedule.json");
    let mut finals = Vec::new();
    for backend in ["operator", "statevector"] {
        let sub = dir.path().join(backend);
        let o =
            qsvt(&["run-maxwell", "--n", "16", "--backend", backend, "--schedule", path(&sched), "--out", path(&sub)]);
        assert!(o.status.success());
        finals.push(csv_rows(&sub.join("snapshot_n16_step0050.csv")));
    }
    for (a, b) in finals[0].iter().zip(&finals[1]) {
        assert!((a[1] - b[1]).abs() <= 1e-8);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"seed": 5, "train": {"iters": 3}, "maxwell": {"n": 16, "t_final": 0.05}}"#).unwrap();
    let o = qsvt(&["run-maxwell", "--config", path(&cfg), "--n", "32", "--out", path(dir.path())]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("n = 32: 5 steps"));
    let meta = fs::read_to_string(dir.path().join("maxwell_meta.json")).unwrap();
    assert!(meta.contains("\"seed\": 5"));

    fs::write(&cfg, r#"{"maxwel": {}}"#).unwrap();
    assert_eq!(qsvt(&["run-maxwell", "--config", path(&cfg), "--out", path(dir.path())]).status.code(), Some(1));
}

#[test]
fn compare_backends_reports_every_backend() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsvt(&["compare-backends", "--n", "8", "--iters", "10", "--out", path(dir.path())]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("compare_backends.csv")).unwrap();
    for name in ["classical", "exact", "operator", "statevector"] {
        assert!(text.contains(&format!("\n{name},")), "{name}");
    }
    assert_eq!(qsvt(&["compare-backends", "--backends", "hhl", "--out", path(dir.path())]).status.code(), Some(1));
}
