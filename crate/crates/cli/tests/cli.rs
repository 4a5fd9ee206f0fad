use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ntk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ntk"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn ntk")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = ntk(dir, args);
    assert!(
        out.status.success(),
        "ntk {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn angle_curve_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["angle-curve", "--output", "out/curve.csv"]);
    let (header, rows) = table(&dir.path().join("out/curve.csv"));
    assert_eq!(
        header,
        ["theta_in_deg", "phi_deg_L1", "phi_deg_L2", "phi_deg_L4", "phi_deg_L8", "phi_deg_L16", "phi_deg_linear"]
    );
    assert_eq!(rows.len(), 36);
    for row in &rows {
        assert_eq!(row[0], row[6]);
    }
    let at_90: f64 = rows[18][1].parse().unwrap();
    assert_eq!(rows[18][0], "90");
    assert!((at_90 - 80.842150488).abs() < 1e-6, "{at_90}");

    let manifest = json(&dir.path().join("out/curve.manifest.json"));
    assert_eq!(manifest["command"], "angle-curve");
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["threads"], 1);
    assert!(manifest["version"].is_string());
}

#[test]
fn custom_angle_grid() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["angle-curve", "--depths", "3", "--theta-start", "10", "--theta-stop", "30", "--theta-step", "10"],
    );
    let (header, rows) = table(&dir.path().join("angle_curve.csv"));
    assert_eq!(header.len(), 3);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["10", "20", "30"]);
}

#[test]
fn depth_sweep_columns() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["depth-sweep", "--n", "20", "--d", "8", "--unit-norm", "--depths", "0..4", "--output", "d.csv"],
    );
    let (header, rows) = table(&dir.path().join("d.csv"));
    assert_eq!(header, ["depth", "min_phi_deg", "kappa_relu", "kappa_linear"]);
    assert_eq!(rows.len(), 5);
    // L = 0 is the Gram matrix in both columns
    assert_eq!(rows[0][2], rows[0][3]);
    assert!(rows.iter().all(|r| r[3] == rows[0][3]));
    let kappas: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(kappas.windows(2).all(|w| w[1] <= w[0]), "{kappas:?}");
    let phis: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(phis.windows(2).all(|w| w[1] >= w[0]), "{phis:?}");
}

#[test]
fn empirical_sweep_is_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let common = [
        "depth-sweep", "--kind", "empirical", "--width", "64", "--replicas", "2", "--n", "6", "--d", "3", "--depths",
        "1,2",
    ];
    let mut serial = common.to_vec();
    serial.extend(["--output", "serial.csv"]);
    let mut parallel = common.to_vec();
    parallel.extend(["--output", "parallel.csv", "--parallel", "2"]);
    ok(dir.path(), &serial);
    ok(dir.path(), &parallel);
    assert_eq!(
        fs::read(dir.path().join("serial.csv")).unwrap(),
        fs::read(dir.path().join("parallel.csv")).unwrap()
    );
    assert_eq!(json(&dir.path().join("parallel.manifest.json"))["threads"], 2);
}

#[test]
fn lemma_suite_report() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["mc-validate", "--suite", "lemmas", "--trials", "20000", "--output", "lemmas.json"]);
    let report = json(&dir.path().join("lemmas.json"));
    assert_eq!(report["passed"], true);
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 13);
    for check in checks {
        assert!(check["name"].is_string() && check["tolerance"].as_f64().unwrap() >= 0.0);
    }
    let manifest = json(&dir.path().join("lemmas.manifest.json"));
    assert_eq!(manifest["derived_seeds"].as_array().unwrap().len(), 13);
}

#[test]
fn failed_validation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // one replica at width 8 cannot match the infinite-width kernel to 3%
    let out = ntk(
        dir.path(),
        &["mc-validate", "--suite", "ntk", "--width", "8", "--replicas", "1", "--output", "ntk.json"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&dir.path().join("ntk.json"))["passed"], false);
}

#[test]
fn train_sweep_with_zero_epochs_logs_initial_loss() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "train-sweep", "--n", "40", "--width", "16", "--depths", "1,2", "--epochs", "0", "--rates", "1", "--batch-size",
            "10", "--output", "t.csv",
        ],
    );
    let (header, rows) = table(&dir.path().join("t.csv"));
    assert_eq!(header, ["epoch", "loss_L1", "loss_L2"]);
    assert_eq!(rows.len(), 1);
    let summary = json(&dir.path().join("t.summary.json"));
    for depth in summary["depths"].as_array().unwrap() {
        assert_eq!(depth["initial_loss"], depth["final_loss"]);
        assert!(depth["epochs_to_threshold"].is_null());
    }
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "train-sweep", "--seed", "7", "--n", "60", "--width", "16", "--depths", "1,3", "--epochs", "4", "--rates",
            "0.5,2", "--loss", "square", "--output", "run/t.csv",
        ],
    );
    let first = fs::read(dir.path().join("run/t.csv")).unwrap();
    let first_summary = fs::read(dir.path().join("run/t.summary.json")).unwrap();
    fs::remove_file(dir.path().join("run/t.csv")).unwrap();
    ok(dir.path(), &["replay", "run/t.manifest.json"]);
    assert_eq!(fs::read(dir.path().join("run/t.csv")).unwrap(), first);
    assert_eq!(fs::read(dir.path().join("run/t.summary.json")).unwrap(), first_summary);
}

#[test]
fn eig_reports_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("k.csv"), "2,1\n1,2\n").unwrap();
    ok(dir.path(), &["eig", "k.csv", "--output", "k.json"]);
    let report = json(&dir.path().join("k.json"));
    assert!((report["lambda_max"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!((report["lambda_min"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((report["kappa"].as_f64().unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn csv_data_source() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.csv"), "a,b\n1,0\n0.8,0.6\n0,1\n").unwrap();
    ok(
        dir.path(),
        &["depth-sweep", "--data", "csv:x.csv", "--header", "--depths", "0,1", "--output", "s.csv"],
    );
    let (_, rows) = table(&dir.path().join("s.csv"));
    assert_eq!(rows.len(), 2);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ragged.csv"), "1,2\n3\n").unwrap();
    fs::write(dir.path().join("zero.csv"), "1,2\n0,0\n").unwrap();
    let cases: [&[&str]; 7] = [
        &["frobnicate"],
        &["mc-validate", "--suite", "everything"],
        &["angle-curve", "--depths", "4..1"],
        &["train-sweep", "--rates", "1,-3"],
        &["train-sweep", "--data", "gaussian", "--n", "20"],
        &["eig", "ragged.csv"],
        &["depth-sweep", "--data", "csv:zero.csv"],
    ];
    for args in cases {
        let out = ntk(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = ntk(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("angle-curve"));
}
