//! End-to-end runs of the `glmsel` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use glmsel::cli::{InferOutput, SCENARIO_FILE, SUMMARY_FILE};
use glmsel::glm::Family;
use glmsel::report::{LambdaMode, Method};
use glmsel::sim::{generate_dataset, Scenario};
use tempfile::TempDir;

fn glmsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glmsel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a simulated logistic data set with an extra categorical column.
fn write_csv(dir: &Path) -> PathBuf {
    let mut s = Scenario::defaults(Family::Logistic);
    s.n = 300;
    s.p = 6;
    let d = generate_dataset(&s, 0);
    let path = dir.join("data.csv");
    let mut w = csv::Writer::from_path(&path).unwrap();
    let mut header: Vec<String> = (1..=d.p()).map(|j| format!("x{j}")).collect();
    header.push("colour".into());
    header.push("y".into());
    w.write_record(&header).unwrap();
    for i in 0..d.n() {
        let mut row: Vec<String> = (0..d.p()).map(|j| d.x[(i, j)].to_string()).collect();
        row.push(["red", "green", "blue"][i % 3].into());
        row.push(d.y[i].to_string());
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
    path
}

#[test]
fn infer_writes_report_and_table() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path());
    let json = dir.path().join("out.json");
    let table = dir.path().join("out.csv");
    let o = glmsel(&[
        "infer",
        csv.to_str().unwrap(),
        "--family",
        "logistic",
        "--response",
        "y",
        "--one-hot",
        "colour",
        "--lambda",
        "3",
        "--method",
        "all",
        "--out",
        json.to_str().unwrap(),
        "--csv-out",
        table.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out: InferOutput = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(out.config.lambda_mode, LambdaMode::Fixed);
    assert_eq!(out.config.methods, Method::ALL.to_vec());
    assert_eq!(out.report.lambda.value, 3.0);
    // Three methods per selected covariate; the true signals are in.
    let model = out.report.model_indices();
    assert!(
        [1, 2, 3].iter().all(|j| model.contains(j)),
        "model {model:?}"
    );
    assert_eq!(out.report.coefficients.len(), 3 * model.len());
    let names: Vec<&str> = out
        .report
        .coefficients
        .iter()
        .map(|c| c.name.as_str())
        .collect();
    assert!(names.contains(&"x1"));
    assert!(out.report.coefficients.iter().all(|c| c.error.is_none()));

    let mut r = csv::Reader::from_path(&table).unwrap();
    assert_eq!(r.records().count(), out.report.coefficients.len());
}

#[test]
fn data_driven_runs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path());
    let args = [
        "infer",
        csv.to_str().unwrap(),
        "--family",
        "logistic",
        "--response",
        "y",
        "--one-hot",
        "colour",
        "--lambda-grid",
        "2,12,6",
        "--seed",
        "9",
    ];
    let a = glmsel(&args);
    let b = glmsel(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let out: InferOutput = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(out.config.lambda_mode, LambdaMode::DataDriven);
    assert_eq!(out.report.lambda.grid.len(), 6);
    assert!(out.report.lambda.grid.contains(&out.report.lambda.value));
}

#[test]
fn config_file_and_fit() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "family = \"logistic\"\nresponse = \"y\"\none_hot = [\"colour\"]\n",
    )
    .unwrap();
    let o = glmsel(&[
        "fit",
        csv.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fit: glmsel::cli::FitReport = serde_json::from_slice(&o.stdout).unwrap();
    // Six covariates plus two indicators (first level dropped).
    assert_eq!(fit.p, 8);
    assert!(fit.coefficients.iter().any(|c| c.name == "colour=red"));
    assert!(!fit.coefficients.iter().any(|c| c.name == "colour=blue"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path());
    let c = csv.to_str().unwrap();

    let o = glmsel(&[
        "infer",
        c,
        "--family",
        "gamma",
        "--response",
        "y",
        "--lambda",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = glmsel(&[
        "infer",
        c,
        "--family",
        "logistic",
        "--response",
        "nope",
        "--lambda",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    // The categorical column is not numeric without --one-hot.
    let o = glmsel(&[
        "infer",
        c,
        "--family",
        "logistic",
        "--response",
        "y",
        "--lambda",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("colour"));

    let o = glmsel(&[
        "infer",
        c,
        "--family",
        "poisson",
        "--response",
        "x1",
        "--one-hot",
        "colour",
        "--lambda",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let o = glmsel(&[
        "infer",
        c,
        "--family",
        "logistic",
        "--response",
        "y",
        "--one-hot",
        "colour",
        "--lambda",
        "1e6",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("no covariates selected"));

    let o = glmsel(&[
        "infer",
        "/nonexistent.csv",
        "--family",
        "logistic",
        "--response",
        "y",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn simulate_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let scenario = dir.path().join("s.toml");
    std::fs::write(
        &scenario,
        "family = \"beta\"\nn = 120\np = 6\nreplicates = 6\nlambda_lo = 2\nlambda_hi = 8\nlambda_count = 3\nmethods = [\"ppl\", \"naive\"]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = glmsel(&[
        "simulate",
        scenario.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("phi = 10"));
    let echoed: Scenario =
        serde_json::from_str(&std::fs::read_to_string(out.join(SCENARIO_FILE)).unwrap()).unwrap();
    assert_eq!((echoed.n, echoed.replicates, echoed.phi), (120, 6, 10.0));
    let rows = csv::Reader::from_path(out.join(SUMMARY_FILE))
        .unwrap()
        .records()
        .count();
    assert!(rows > 0);

    std::fs::write(&scenario, "family = \"beta\"\nbogus = 1\n").unwrap();
    let o = glmsel(&[
        "simulate",
        scenario.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
