use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use trichome_core::synth::{synth_dataset, DatasetSpec};

fn trichome(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trichome"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "stderr: {}", stderr(o));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn write_dataset(dir: &Path, name: &str, spec: &DatasetSpec) {
    let ds = synth_dataset(spec).unwrap();
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    fs::write(dir.join(name), buf).unwrap();
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let t = TempDir::new().unwrap();
    for out in ["a", "b"] {
        json(&trichome(
            t.path(),
            &[
                "--seed",
                "1",
                "synth",
                "--lambda",
                "60",
                "--image-side",
                "1600",
                "--focal",
                "6400",
                "--out",
                out,
            ],
        ));
    }
    for f in ["scene.pgm", "scene.exif", "truth.json"] {
        assert_eq!(
            fs::read(t.path().join("a").join(f)).unwrap(),
            fs::read(t.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let truth: Value = serde_json::from_slice(&fs::read(t.path().join("a/truth.json")).unwrap()).unwrap();
    assert_eq!(truth["schema_version"], 1);
    assert_eq!(truth["seed"], 1);
    assert_eq!(truth["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(truth["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn analyze_recovers_synthetic_scene() {
    let t = TempDir::new().unwrap();
    json(&trichome(
        t.path(),
        &["--seed", "4", "synth", "--lambda", "150", "--noise", "2"],
    ));
    let truth: Value = serde_json::from_slice(&fs::read(t.path().join("truth.json")).unwrap()).unwrap();
    let want = truth["result"]["true_nnd_mm"].as_f64().unwrap();

    let r = json(&trichome(t.path(), &["analyze", "scene.pgm"]));
    let row = &r["result"][0];
    let got = row["nnd_mm"].as_f64().unwrap();
    assert!((got - want).abs() / want < 0.05, "{got} vs {want}");
    assert_eq!(row["iso"], truth["result"]["iso"]);
    assert_eq!(row["opening_px"], 600.0);
}

#[test]
fn image_without_markers_exits_2() {
    let t = TempDir::new().unwrap();
    let mut pgm = b"P5\n64 64\n255\n".to_vec();
    pgm.extend(std::iter::repeat_n(128u8, 64 * 64));
    fs::write(t.path().join("blank.pgm"), pgm).unwrap();
    let o = trichome(t.path(), &["analyze", "blank.pgm"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("marker 0 not found"), "{}", stderr(&o));

    let o = trichome(t.path(), &["analyze", "missing.pgm"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn append_twice_gives_identical_rows() {
    let t = TempDir::new().unwrap();
    json(&trichome(
        t.path(),
        &["synth", "--lambda", "80", "--image-side", "1600", "--focal", "6400"],
    ));
    let args = [
        "analyze",
        "scene.pgm",
        "--append",
        "data.csv",
        "--plant",
        "P1",
        "--leaf",
        "L1",
        "--leaflet",
        "F1",
        "--nitrate",
        "1800",
    ];
    json(&trichome(t.path(), &args));
    json(&trichome(t.path(), &args));
    let text = fs::read_to_string(t.path().join("data.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("plant_id,compound_leaf_id,leaflet_id,nnd_mm"));
    assert_eq!(lines[1], lines[2]);
    assert!(lines[1].starts_with("P1,L1,F1,"));
}

#[test]
fn synth_rejects_zero_lambda() {
    let t = TempDir::new().unwrap();
    let o = trichome(t.path(), &["synth", "--lambda", "0"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("lambda"));
    assert_eq!(code(&trichome(t.path(), &["synth", "--no-such-flag"])), 2);
}

#[test]
fn envelope_batch_is_marker_detectable() {
    let t = TempDir::new().unwrap();
    json(&trichome(
        t.path(),
        &[
            "--seed",
            "9",
            "synth",
            "--envelope",
            "--count",
            "4",
            "--lambda",
            "100",
            "--noise",
            "2",
        ],
    ));
    let files: Vec<String> = (0..4).map(|i| format!("scene_{i:03}.pgm")).collect();
    let mut args = vec!["analyze"];
    args.extend(files.iter().map(String::as_str));
    let r = json(&trichome(t.path(), &args));
    assert_eq!(r["result"].as_array().unwrap().len(), 4);
    assert!(r["result"]
        .as_array()
        .unwrap()
        .iter()
        .all(|row| row.get("error").is_none()));
}

#[test]
fn train_eval_classify_writes_reports() {
    let t = TempDir::new().unwrap();
    write_dataset(t.path(), "data.csv", &DatasetSpec::default());
    let r = json(&trichome(
        t.path(),
        &[
            "--seed",
            "3",
            "train-eval",
            "--data",
            "data.csv",
            "--shap",
            "--learning-curve",
            "--out",
            "cls",
        ],
    ));
    assert_eq!(r["result"]["n_images"], 25);
    assert!(r["result"]["metrics"]["roc_auc"].as_f64().is_some());
    for f in [
        "metrics.json",
        "confusion.csv",
        "roc.csv",
        "pr.csv",
        "folds.csv",
        "shap.csv",
        "learning_curve.csv",
    ] {
        assert!(t.path().join("cls").join(f).exists(), "{f}");
    }
    let curve = fs::read_to_string(t.path().join("cls/learning_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 101);
    // same inputs, same bytes
    json(&trichome(
        t.path(),
        &[
            "--seed",
            "3",
            "train-eval",
            "--data",
            "data.csv",
            "--shap",
            "--learning-curve",
            "--out",
            "cls2",
        ],
    ));
    assert_eq!(
        fs::read(t.path().join("cls/metrics.json")).unwrap(),
        fs::read(t.path().join("cls2/metrics.json")).unwrap()
    );
}

#[test]
fn train_eval_regress_reports_metric_names() {
    let t = TempDir::new().unwrap();
    write_dataset(t.path(), "data.csv", &DatasetSpec::default());
    let r = json(&trichome(
        t.path(),
        &["train-eval", "--data", "data.csv", "--mode", "regress"],
    ));
    for k in ["rmse", "r2", "pearson_r"] {
        assert!(r["result"][k].as_f64().is_some(), "{k}");
    }
    assert!(t.path().join("predictions.csv").exists());
}

#[test]
fn schema_error_names_row_and_column() {
    let t = TempDir::new().unwrap();
    write_dataset(t.path(), "data.csv", &DatasetSpec::default());
    let text = fs::read_to_string(t.path().join("data.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let cols: Vec<&str> = lines[0].split(',').collect();
    let nnd = cols.iter().position(|c| *c == "nnd_mm").unwrap();
    let mut cells: Vec<String> = lines[2].split(',').map(String::from).collect();
    cells[nnd] = "abc".into();
    lines[2] = cells.join(",");
    fs::write(t.path().join("bad.csv"), lines.join("\n")).unwrap();
    let o = trichome(t.path(), &["train-eval", "--data", "bad.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("row 2, column nnd_mm"), "{}", stderr(&o));
}

#[test]
fn sweep_emits_mroc_and_mpr() {
    let t = TempDir::new().unwrap();
    write_dataset(t.path(), "data.csv", &DatasetSpec::default());
    let r = json(&trichome(
        t.path(),
        &[
            "sweep",
            "--data",
            "data.csv",
            "--lo",
            "1600",
            "--hi",
            "1900",
            "--steps",
            "4",
            "--n-images",
            "5,25",
        ],
    ));
    let summaries = r["result"]["summaries"].as_array().unwrap();
    assert_eq!(summaries.len(), 2);
    for s in summaries {
        assert!(s["mroc"].as_f64().is_some() && s["mpr"].as_f64().is_some());
    }
    let cells = fs::read_to_string(t.path().join("sweep_cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 1 + 8);
}

#[test]
fn appendix_defaults_and_preconditions() {
    let t = TempDir::new().unwrap();
    let r = json(&trichome(t.path(), &["--seed", "5", "appendix", "--out", "a"]));
    assert!(r["result"]["p_value"].as_f64().unwrap() < 1e-3);
    assert_eq!(r["result"]["replicates"], 200);
    json(&trichome(t.path(), &["--seed", "5", "appendix", "--out", "b"]));
    for f in ["appendix.csv", "appendix.json"] {
        assert_eq!(
            fs::read(t.path().join("a").join(f)).unwrap(),
            fs::read(t.path().join("b").join(f)).unwrap()
        );
    }
    let o = trichome(t.path(), &["appendix", "--replicates", "5"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("at least 20"));
}

#[test]
fn stats_group_tests_and_vif_tables() {
    let t = TempDir::new().unwrap();
    write_dataset(t.path(), "data.csv", &DatasetSpec::default());
    let r = json(&trichome(t.path(), &["stats", "--data", "data.csv"]));
    let kw = &r["result"]["group_tests"][0];
    assert_eq!(kw["variable"], "nitrate_ppm");
    assert!(kw["kruskal_wallis"]["p_value"].as_f64().unwrap() < 0.05);
    assert_eq!(r["result"]["vif"].as_array().unwrap().len(), 2);
    assert_eq!(r["result"]["vif"][0]["features"].as_array().unwrap().len(), 4);

    let r = json(&trichome(t.path(), &["stats", "--data", "data.csv", "--exclude-iso"]));
    let tables = r["result"]["vif"].as_array().unwrap();
    assert_eq!(tables.len(), 1);
    assert!(!tables[0]["features"].as_array().unwrap().iter().any(|f| f == "iso"));

    let text = fs::read_to_string(t.path().join("data.csv")).unwrap();
    let no_groups: Vec<String> = text
        .lines()
        .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap())
        .collect();
    assert!(no_groups[0].ends_with("nitrate_ppm"));
    fs::write(t.path().join("plain.csv"), no_groups.join("\n")).unwrap();
    let o = trichome(t.path(), &["stats", "--data", "plain.csv"]);
    let r = json(&o);
    assert!(r["result"]["group_tests"].is_null());
    assert!(stderr(&o).contains("group tests skipped"));
}

#[test]
fn flags_override_config_file() {
    let t = TempDir::new().unwrap();
    fs::write(
        t.path().join("cfg.json"),
        r#"{"seed": 7, "appendix": {"lambda": 400, "replicates": 30}}"#,
    )
    .unwrap();
    let r = json(&trichome(
        t.path(),
        &["--config", "cfg.json", "appendix", "--replicates", "25"],
    ));
    assert_eq!(r["seed"], 7);
    assert_eq!(r["result"]["lambda"], 400.0);
    assert_eq!(r["result"]["replicates"], 25);

    fs::write(t.path().join("bad.json"), r#"{"appendix": {"lamda": 1}}"#).unwrap();
    assert_eq!(code(&trichome(t.path(), &["--config", "bad.json", "appendix"])), 2);
}

#[test]
fn unwritable_output_is_internal_error() {
    let t = TempDir::new().unwrap();
    fs::create_dir_all(t.path().join("o/appendix.csv")).unwrap();
    let o = trichome(
        t.path(),
        &["appendix", "--replicates", "20", "--lambda", "100", "--out", "o"],
    );
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}
