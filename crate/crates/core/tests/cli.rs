//! End-to-end runs of the `sflda` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sflda::harness::ModelFile;
use tempfile::TempDir;

const SMALL_GRIDS: [&str; 6] = ["--m-grid", "6-10", "--zeta-grid", "1e-6:1e-1:6", "--lambda-grid", "1e-6:1:7"];

fn sflda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sflda")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = sflda(args);
    assert!(
        out.status.success(),
        "sflda {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, case: &str, seed: &str, percent: &str) -> PathBuf {
    let out = dir.join(format!("sim_{case}_{seed}"));
    ok(&[
        "simulate", "--case", case, "--seed", seed, "--n", "120", "--train-size", "60", "--label-percent", percent,
        "--out", p(&out),
    ]);
    out
}

fn fit(curves: &Path, labels: &[&Path], model: &Path, extra: &[&str]) -> String {
    let mut args = vec!["fit", "--curves", p(curves), "--out", p(model)];
    for l in labels {
        args.extend(["--labels", p(l)]);
    }
    args.extend(SMALL_GRIDS);
    args.extend(extra);
    ok(&args)
}

fn training_error(stdout: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("training error: "))
        .expect("fit prints the training error")
        .parse()
        .unwrap()
}

fn read_predictions(path: &Path) -> Vec<(String, usize, Vec<f64>)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2..].iter().map(|v| v.parse().unwrap()).collect())
        })
        .collect()
}

fn read_labels(path: &Path) -> Vec<(String, Option<usize>)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (id, lab) = l.split_once(',').unwrap();
            (id.to_string(), lab.parse().ok())
        })
        .collect()
}

#[test]
fn simulate_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let da = simulate(a.path(), "1", "9", "20");
    let db = simulate(b.path(), "1", "9", "20");
    for f in ["curves.csv", "labels.csv", "truth.csv"] {
        assert_eq!(fs::read(da.join(f)).unwrap(), fs::read(db.join(f)).unwrap(), "{f} differs");
    }
    let other = simulate(a.path(), "1", "10", "20");
    assert_ne!(fs::read(da.join("curves.csv")).unwrap(), fs::read(other.join("curves.csv")).unwrap());
}

#[test]
fn unknown_case_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = sflda(&["simulate", "--case", "3", "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_then_predict_round_trip() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), "2", "4", "50");
    let model = dir.path().join("model.json");
    let stdout = fit(&sim.join("curves.csv"), &[&sim.join("labels.csv")], &model, &[]);

    let preds = dir.path().join("pred.csv");
    ok(&["predict", "--model", p(&model), "--curves", p(&sim.join("curves.csv")), "--out", p(&preds)]);
    let rows = read_predictions(&preds);
    assert_eq!(rows.len(), 120);
    for (_, class, probs) in &rows {
        assert_eq!(probs.len(), 2);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(*class == 1 || *class == 2);
    }

    // re-smoothing the training curves reproduces the in-sample error
    let labels = read_labels(&sim.join("labels.csv"));
    let (mut wrong, mut n) = (0, 0);
    for ((id, class, _), (lid, label)) in rows.iter().zip(&labels) {
        assert_eq!(id, lid);
        if let Some(l) = label {
            n += 1;
            wrong += usize::from(class != l);
        }
    }
    assert_eq!(wrong as f64 / n as f64, training_error(&stdout));

    // a reloaded model predicts identically
    let again = dir.path().join("again.csv");
    ok(&["predict", "--model", p(&model), "--curves", p(&sim.join("curves.csv")), "--out", p(&again)]);
    assert_eq!(fs::read(&preds).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn model_file_json_round_trips() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), "1", "5", "30");
    let model = dir.path().join("model.json");
    fit(&sim.join("curves.csv"), &[&sim.join("labels.csv")], &model, &["--criterion", "gbic"]);
    let text = fs::read_to_string(&model).unwrap();
    let parsed = ModelFile::from_json(&text).unwrap();
    assert_eq!(parsed.to_json(), text);
    assert_eq!(parsed.criterion.kind.name(), "gbic");
    parsed.predictor().unwrap();

    let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 99", 1);
    assert!(ModelFile::from_json(&bumped).is_err());
}

#[test]
fn both_criteria_and_methods_run() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), "2", "6", "30");
    for (criterion, method) in [("gic", "sflda"), ("gbic", "sflda"), ("gic", "flda"), ("gbic", "flda")] {
        let model = dir.path().join(format!("{criterion}_{method}.json"));
        let out = fit(
            &sim.join("curves.csv"),
            &[&sim.join("labels.csv")],
            &model,
            &["--criterion", criterion, "--method", method],
        );
        assert!(out.contains(&format!("{criterion}: ")));
        assert!(out.contains(&format!("method: {method}")));
    }
}

#[test]
fn empty_curve_file_gives_header_only_predictions() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), "2", "7", "50");
    let model = dir.path().join("model.json");
    fit(&sim.join("curves.csv"), &[&sim.join("labels.csv")], &model, &[]);
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "curve_id,t,x\n").unwrap();
    let preds = dir.path().join("pred.csv");
    ok(&["predict", "--model", p(&model), "--curves", p(&empty), "--out", p(&preds)]);
    assert_eq!(fs::read_to_string(&preds).unwrap(), "curve_id,class,p1,p2\n");
}

#[test]
fn missing_values_fail_unless_dropped() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), "2", "8", "50");
    let text = fs::read_to_string(sim.join("curves.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let (id, rest) = lines[3].split_once(',').unwrap();
    let (t, _) = rest.split_once(',').unwrap();
    let bad_id = id.to_string();
    lines[3] = format!("{id},{t},NA");
    let curves = dir.path().join("holes.csv");
    fs::write(&curves, lines.join("\n") + "\n").unwrap();

    let model = dir.path().join("model.json");
    let out = sflda(&[
        "fit", "--curves", p(&curves), "--labels", p(&sim.join("labels.csv")), "--out", p(&model),
    ]);
    assert!(!out.status.success());

    // the dropped curve's label is then unknown, so give labels without it
    let labels: String = fs::read_to_string(sim.join("labels.csv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with(&format!("{bad_id},")))
        .map(|l| format!("{l}\n"))
        .collect();
    let kept = dir.path().join("labels.csv");
    fs::write(&kept, labels).unwrap();
    fit(&curves, &[&kept], &model, &["--drop-missing"]);
    let preds = dir.path().join("pred.csv");
    ok(&["predict", "--model", p(&model), "--curves", p(&curves), "--out", p(&preds), "--drop-missing"]);
    let rows = read_predictions(&preds);
    assert_eq!(rows.len(), 119);
    assert!(rows.iter().all(|r| r.0 != bad_id));
}

#[test]
fn split_label_files_merge() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), "1", "11", "40");
    let text = fs::read_to_string(sim.join("labels.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let (mut a, mut b) = (format!("{header}\n"), format!("{header}\n"));
    for (i, l) in lines.enumerate() {
        if i % 2 == 0 { &mut a } else { &mut b }.push_str(&format!("{l}\n"));
    }
    let (la, lb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    fs::write(&la, a).unwrap();
    fs::write(&lb, b).unwrap();
    let one = dir.path().join("one.json");
    let two = dir.path().join("two.json");
    fit(&sim.join("curves.csv"), &[&sim.join("labels.csv")], &one, &[]);
    fit(&sim.join("curves.csv"), &[&la, &lb], &two, &[]);
    assert_eq!(fs::read(&one).unwrap(), fs::read(&two).unwrap());
}

#[test]
fn smooth_writes_coefficients() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), "2", "12", "50");
    let out = dir.path().join("coef.csv");
    ok(&["smooth", "--curves", p(&sim.join("curves.csv")), "--out", p(&out), "--m-grid", "7", "--zeta-grid", "1e-3"]);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "curve_id,zeta,w1,w2,w3,w4,w5,w6,w7");
    assert_eq!(lines.count(), 120);
}

#[test]
fn experiment_reports_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "experiment", "--case", "2", "--fractions", "20,50", "--reps", "2", "--seed", "3", "--out", p(&out),
            "--m-grid", "8-10", "--zeta-grid", "1e-6:1e-1:4", "--lambda-grid", "1e-6:1:5",
        ]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["report.csv", "records.csv", "sflda_gic.dat", "flda_gbic.dat"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}
