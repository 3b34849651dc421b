use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmc")).args(args).output().expect("qmc runs")
}

fn qmc_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmc"))
        .args(args)
        .env(key, value)
        .output()
        .expect("qmc runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}\nstdout: {}\nstderr: {}", o.status.code(), stdout(&o), stderr(&o));
    o
}

fn json(o: &Output) -> Value {
    serde_json::from_str(stdout(o).trim()).unwrap()
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn moons(dir: &TempDir, n: usize) -> PathBuf {
    let out = p(dir, &format!("moons{n}.csv"));
    ok(qmc(&["dataset", "--name", "moons", "--n", &n.to_string(), "--noise", "0.1", "--seed", "42", "--out", s(&out)]));
    out
}

fn train(dir: &TempDir, data: &Path, extra: &[&str], name: &str) -> (PathBuf, Value) {
    let out = p(dir, name);
    let mut args = vec!["train", "--data", s(data), "--out", s(&out)];
    args.extend_from_slice(extra);
    let o = ok(qmc(&args));
    (out, json(&o))
}

#[test]
fn dataset_writes_header_plus_rows() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "moons.csv");
    ok(qmc(&["dataset", "--name", "moons", "--n", "1000", "--noise", "0.1", "--seed", "42", "--out", s(&out)]));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1001);
    assert_eq!(text.lines().next(), Some("f1,f2,label"));
}

#[test]
fn dataset_is_byte_identical_per_seed() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (p(&dir, "a.csv"), p(&dir, "b.csv"));
    for out in [&a, &b] {
        ok(qmc(&["dataset", "--name", "spirals", "--n", "300", "--seed", "9", "--out", s(out)]));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn unknown_dataset_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = qmc(&["dataset", "--name", "foo", "--out", s(&p(&dir, "x.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown dataset"));
}

#[test]
fn train_reports_dimensions() {
    let dir = TempDir::new().unwrap();
    let data = moons(&dir, 200);
    let (model, summary) = train(
        &dir,
        &data,
        &["--encoding", "coherent", "--gamma", "70", "--fock", "20", "--state", "mixed"],
        "m.json",
    );
    assert_eq!(summary["k"], 400);
    assert_eq!(summary["l"], 2);
    assert_eq!(summary["n_train"], 200);
    assert_eq!(summary["mode"], "mixed");
    assert!(summary["purity"].as_f64().unwrap() > 0.0);
    assert!(model.exists());
}

#[test]
fn pure_state_of_one_sample_has_unit_purity() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "one.csv");
    fs::write(&data, "f1,f2,label\n2,3,yes\n").unwrap();
    let (_, summary) = train(&dir, &data, &["--encoding", "onehot", "--fock", "3", "--state", "pure"], "m.json");
    assert!((summary["purity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn foreign_encoder_flags_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let data = moons(&dir, 20);
    let out = p(&dir, "x.json");
    for flags in [
        vec!["--encoding", "softmax", "--gamma", "5"],
        vec!["--encoding", "coherent", "--beta", "5"],
        vec!["--encoding", "squeezed", "--rff-dim", "5"],
        vec!["--encoding", "rff", "--r", "1"],
    ] {
        let mut args = vec!["train", "--data", s(&data), "--out", s(&out)];
        args.extend(flags);
        assert_eq!(qmc(&args).status.code(), Some(2));
    }
}

#[test]
fn evaluate_on_training_data_is_accurate() {
    let dir = TempDir::new().unwrap();
    let data = moons(&dir, 300);
    let (model, _) = train(&dir, &data, &["--encoding", "softmax", "--fock", "10"], "m.json");
    let o = ok(qmc(&["evaluate", "--model", s(&model), "--data", s(&data)]));
    let v = json(&o);
    assert!(v["accuracy"].as_f64().unwrap() >= 0.9, "{v}");
    assert_eq!(v["n"], 300);
    assert_eq!(v["zero_support_count"], 0);
}

#[test]
fn predictions_are_distributions() {
    let dir = TempDir::new().unwrap();
    let data = moons(&dir, 100);
    let (model, _) = train(&dir, &data, &["--encoding", "squeezed", "--fock", "6"], "m.json");
    let out = p(&dir, "pred.csv");
    ok(qmc(&["predict", "--model", s(&model), "--data", s(&data), "--out", s(&out)]));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row,label,p_0,p_1,support,zero_support"));
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], i.to_string());
        let total: f64 = f[2..4].iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(f[4].parse::<f64>().unwrap() > 0.0);
        assert_eq!(f[5], "0");
        rows += 1;
    }
    assert_eq!(rows, 100);
}

#[test]
fn zero_support_rows_get_uniform_probabilities() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "cat.csv");
    fs::write(&data, "f1,label\n1,a\n2,b\n").unwrap();
    let (model, _) = train(&dir, &data, &["--encoding", "onehot", "--fock", "3"], "m.json");
    let query = p(&dir, "q.csv");
    fs::write(&query, "f1,label\n3,a\n1,a\n").unwrap();
    let o = ok(qmc(&["predict", "--model", s(&model), "--data", s(&query)]));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(rows[0].starts_with("0,a,0.5,0.5,"), "{}", rows[0]);
    assert!(rows[0].ends_with(",1"));
    assert!(rows[1].starts_with("1,a,1.0,0.0,"), "{}", rows[1]);
    assert!(stderr(&o).contains("zero support"));
}

#[test]
fn empty_input_gives_header_and_warning() {
    let dir = TempDir::new().unwrap();
    let data = moons(&dir, 40);
    let (model, _) = train(&dir, &data, &["--encoding", "coherent", "--fock", "4"], "m.json");
    let empty = p(&dir, "empty.csv");
    fs::write(&empty, "f1,f2,label\n").unwrap();
    let o = ok(qmc(&["predict", "--model", s(&model), "--data", s(&empty)]));
    assert_eq!(stdout(&o), "row,label,p_0,p_1,support,zero_support\n");
    assert!(stderr(&o).contains("warning"));
    let o = ok(qmc(&["evaluate", "--model", s(&model), "--data", s(&empty)]));
    assert_eq!(json(&o)["n"], 0);
}

#[test]
fn feature_count_mismatch_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let data = moons(&dir, 40);
    let (model, _) = train(&dir, &data, &["--encoding", "coherent", "--fock", "4"], "m.json");
    let wide = p(&dir, "wide.csv");
    fs::write(&wide, "f1,f2,f3,label\n1,2,3,0\n").unwrap();
    let o = qmc(&["predict", "--model", s(&model), "--data", s(&wide)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("schema error"));
}

#[test]
fn binary_and_json_models_predict_identically() {
    let dir = TempDir::new().unwrap();
    let data = moons(&dir, 120);
    let flags = ["--encoding", "rff", "--fock", "6", "--gamma", "20"];
    let (json_model, _) = train(&dir, &data, &flags, "m.json");
    let mut bin_flags = flags.to_vec();
    bin_flags.push("--binary");
    let (bin_model, _) = train(&dir, &data, &bin_flags, "m.bin");
    assert_eq!(&fs::read(&bin_model).unwrap()[..4], b"QMC1");
    let a = ok(qmc(&["predict", "--model", s(&json_model), "--data", s(&data)]));
    let b = ok(qmc(&["predict", "--model", s(&bin_model), "--data", s(&data)]));
    assert_eq!(a.stdout, b.stdout);
    let naive = ok(qmc(&["predict", "--model", s(&json_model), "--data", s(&data), "--path", "naive"]));
    assert_eq!(stdout(&naive).lines().count(), 121);
}

#[test]
fn heatmap_grid_and_image() {
    let dir = TempDir::new().unwrap();
    let data = moons(&dir, 100);
    let (model, _) = train(&dir, &data, &["--encoding", "coherent", "--fock", "6"], "m.json");
    let (grid, ppm) = (p(&dir, "grid.csv"), p(&dir, "grid.ppm"));
    ok(qmc(&["heatmap", "--model", s(&model), "--grid", "100", "--out", s(&grid), "--ppm", s(&ppm)]));
    let text = fs::read_to_string(&grid).unwrap();
    assert_eq!(text.lines().next(), Some("x1,x2,p_class0"));
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 10000);
    for row in &rows {
        let v: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    let image = fs::read(&ppm).unwrap();
    let header = b"P6\n100 100\n255\n";
    assert_eq!(&image[..header.len()], header);
    assert_eq!(image.len(), header.len() + 3 * 10000);
}

#[test]
fn heatmap_separates_blobs() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "blobs.csv");
    // class "left" around (-1, 0), class "right" around (1, 0), deterministic jitter
    let mut csv = String::from("f1,f2,label\n");
    for i in 0..60 {
        let t = i as f64;
        let (dx, dy) = (0.3 * (t * 1.7).sin(), 0.6 * (t * 0.9).cos());
        csv.push_str(&format!("{},{},left\n", -1.0 + dx, dy));
        csv.push_str(&format!("{},{},right\n", 1.0 + dx, dy));
    }
    fs::write(&data, csv).unwrap();
    let (model, _) = train(&dir, &data, &["--encoding", "softmax", "--fock", "8", "--beta", "20"], "m.json");
    let o = ok(qmc(&[
        "heatmap", "--model", s(&model), "--grid", "40", "--xmin", "-2", "--xmax", "2", "--ymin", "-1", "--ymax", "1",
    ]));
    let text = stdout(&o);
    let (mut correct, mut total) = (0, 0);
    for row in text.lines().skip(1) {
        let f: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        if f[0] == 0.0 {
            continue;
        }
        total += 1;
        // class 0 is "left", the first label in the file
        if (f[0] < 0.0) == (f[2] >= 0.5) {
            correct += 1;
        }
    }
    assert!(correct as f64 >= 0.95 * total as f64, "{correct}/{total}");
}

#[test]
fn heatmap_needs_two_features() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "one.csv");
    fs::write(&data, "f1,label\n0.1,a\n0.9,b\n0.5,a\n").unwrap();
    let (model, _) = train(&dir, &data, &["--encoding", "softmax", "--fock", "4"], "m.json");
    let o = qmc(&["heatmap", "--model", s(&model), "--grid", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("2-feature"));
}

#[test]
fn verify_passes_and_is_deterministic() {
    let a = ok(qmc(&["verify", "--seed", "7"]));
    let b = ok(qmc(&["verify", "--seed", "7"]));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    for name in ["bayes-equivalence", "kernel-form/coherent", "fast-vs-naive", "coherent-closed-form", "density-invariants"] {
        assert!(text.contains(&format!("PASS {name}")), "{text}");
    }
}

#[test]
fn verify_fails_on_injected_fault() {
    let o = qmc(&["verify", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL bayes-equivalence"));
    assert!(stderr(&o).contains("failed checks"));
}

#[test]
fn bench_reports_json() {
    let o = ok(qmc(&[
        "bench", "--sizes", "40,80", "--repeats", "1", "--fock", "4", "--predict-fock", "4", "--queries", "2",
    ]));
    let v = json(&o);
    assert_eq!(v["encoder"], "coherent");
    assert_eq!(v["mode"], "mixed");
    assert_eq!(v["train"]["k"], 16);
    assert_eq!(v["train"]["points"].as_array().unwrap().len(), 2);
    assert!(v["train_ratios"]["80/40"].as_f64().unwrap() > 0.0);
    assert_eq!(v["predict"]["k"], 16);
    assert!(v["predict"]["speedup"].as_f64().unwrap() > 0.0);
}

#[test]
fn thread_cap_is_validated() {
    ok(qmc_env(&["verify", "--seed", "1"], "QMC_THREADS", "1"));
    assert_eq!(qmc_env(&["verify"], "QMC_THREADS", "zero").status.code(), Some(2));
}

#[test]
fn missing_files_are_io_errors() {
    let dir = TempDir::new().unwrap();
    let o = qmc(&["evaluate", "--model", s(&p(&dir, "nope.json")), "--data", s(&p(&dir, "nope.csv"))]);
    assert_eq!(o.status.code(), Some(3));
}
