use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use repsim_core::store::{
    write_array, write_tensor, ActivationTensor, LayerEntry, Manifest, TensorShape,
};
use serde_json::Value;

fn repsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repsim"))
        .args(args)
        .env_remove("REPSIM_SEED")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

// Deterministic, well-spread values without pulling in an RNG.
fn hash_noise(i: usize, salt: f64) -> f64 {
    let x = ((i as f64 + salt) * 12.9898).sin() * 43758.5453;
    x - x.floor() - 0.5
}

fn tensor(name: &str, shape: TensorShape, salt: f64) -> ActivationTensor<f32> {
    let values = (0..shape.len())
        .map(|i| hash_noise(i, salt) as f32)
        .collect();
    ActivationTensor::new(name, shape, values).unwrap()
}

fn checkpoint(dir: &Path, model: &str, tag: &str, salt: f64) -> PathBuf {
    let shapes = [
        ("conv1", TensorShape::new(200, 2, 2, 8)),
        ("conv2", TensorShape::new(200, 1, 1, 6)),
    ];
    let mut layers = Vec::new();
    for (k, (name, shape)) in shapes.into_iter().enumerate() {
        let file = format!("{model}_{tag}_{name}.npy");
        write_tensor(&tensor(name, shape, salt + k as f64), &dir.join(&file)).unwrap();
        layers.push(LayerEntry {
            name: name.into(),
            path: file.into(),
            shape,
        });
    }
    let path = dir.join(format!("{model}_{tag}.json"));
    Manifest::new(model, tag, 3, "synthetic", layers, dir)
        .unwrap()
        .save(&path)
        .unwrap();
    path
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn dump(dir: &Path, name: &str, model: &str, rows: &[(&str, usize, usize)]) -> PathBuf {
    let mut text = format!("{{\"model_id\":\"{model}\",\"num_classes\":3}}\n");
    for (id, truth, pred) in rows {
        let mut scores = [0.05; 3];
        scores[*pred] = 0.9;
        text.push_str(&format!(
            "{{\"example_id\":\"{id}\",\"true\":{truth},\"pred\":{pred},\"scores\":[{},{},{}]}}\n",
            scores[0], scores[1], scores[2]
        ));
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

// Same hand-counted fixture as the core tests: 5 both right, 1 only a, 2 only b, 2 both wrong.
fn ten_example_dumps(dir: &Path) -> (PathBuf, PathBuf) {
    let a_ok = [1, 1, 1, 1, 0, 0, 0, 1, 0, 1];
    let b_ok = [1, 1, 0, 1, 0, 1, 0, 1, 1, 1];
    let truth = [0usize, 1, 2, 0, 1, 2, 0, 1, 2, 0];
    let ids: Vec<String> = (0..10).map(|i| format!("img{i:02}")).collect();
    let rows = |ok: &[i32; 10]| -> Vec<(&str, usize, usize)> {
        (0..10)
            .map(|i| {
                let pred = if ok[i] == 1 {
                    truth[i]
                } else {
                    (truth[i] + 1 + i % 2) % 3
                };
                (ids[i].as_str(), truth[i], pred)
            })
            .collect()
    };
    (
        dump(dir, "a.jsonl", "ft-imagenet", &rows(&a_ok)),
        dump(dir, "b.jsonl", "ft-radimagenet", &rows(&b_ok)),
    )
}

#[test]
fn identical_manifests_give_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    let m = checkpoint(dir.path(), "imagenet", "pre", 0.0);
    let out = dir.path().join("r.csv");
    let res = repsim(&[
        "cca",
        "--a",
        s(&m),
        "--b",
        s(&m),
        "--out",
        s(&out),
        "--repeats",
        "2",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mean = header.iter().position(|h| *h == "mean").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let rho: f64 = row[mean].parse().unwrap();
        assert!((rho - 1.0).abs() < 1e-6, "{row:?}");
    }
}

#[test]
fn json_report_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let a = checkpoint(dir.path(), "imagenet", "pre", 0.0);
    let b = checkpoint(dir.path(), "radimagenet", "pre", 50.0);
    let out = dir.path().join("r.json");
    let res = repsim(&[
        "cca",
        "--a",
        s(&a),
        "--b",
        s(&b),
        "--out",
        s(&out),
        "--seed",
        "11",
        "--jobs",
        "2",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(
        report["comparison_label"],
        "imagenet:pre vs radimagenet:pre"
    );
    let fold = &report["metadata"]["folds"][0];
    assert_eq!(fold["plan"]["seed"], 11);
    assert_eq!(fold["manifest_seed_a"], 3);
    let rho = report["layers"][0]["mean"].as_f64().unwrap();
    assert!(rho > 0.0 && rho < 0.6, "independent noise gave {rho}");
}

#[test]
fn missing_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = checkpoint(dir.path(), "imagenet", "pre", 0.0);
    let res = repsim(&["cca", "--a", s(&m), "--out", "r.csv"]);
    assert_eq!(res.status.code(), Some(2));

    let res = repsim(&[
        "cca",
        "--a",
        s(&m),
        "--b",
        s(&m),
        "--out",
        s(&dir.path().join("r.txt")),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_json(&res)["error"], "usage");

    let res = repsim(&[
        "cca",
        "--a",
        s(&m),
        "--b",
        s(&m),
        "--out",
        "r.csv",
        "--target-rows",
        "100",
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = checkpoint(dir.path(), "imagenet", "pre", 0.0);
    let b = checkpoint(dir.path(), "radimagenet", "pre", 50.0);
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let res = repsim(&[
            "cca",
            "--a",
            s(&a),
            "--b",
            s(&b),
            "--out",
            s(&out),
            "--seed",
            "7",
            "--jobs",
            jobs,
        ]);
        assert!(res.status.success());
        fs::read(out).unwrap()
    };
    let first = run("r1.json", "1");
    assert_eq!(first, run("r2.json", "1"));
    assert_eq!(first, run("r3.json", "4"));
    assert_eq!(run("c1.csv", "1"), run("c2.csv", "3"));
}

#[test]
fn seed_from_environment_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let a = checkpoint(dir.path(), "imagenet", "pre", 0.0);
    let b = checkpoint(dir.path(), "radimagenet", "pre", 50.0);
    let run = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_repsim"));
        cmd.env_remove("REPSIM_SEED")
            .args(["cca", "--a", s(&a), "--b", s(&b), "--out", s(&out)]);
        if let Some(v) = env {
            cmd.env("REPSIM_SEED", v);
        }
        if let Some(v) = flag {
            cmd.args(["--seed", v]);
        }
        assert!(cmd.status().unwrap().success());
        fs::read(out).unwrap()
    };
    let default = run("d.json", None, None);
    assert_eq!(default, run("z.json", None, Some("0")));
    let env9 = run("e.json", Some("9"), None);
    assert_eq!(env9, run("f.json", None, Some("9")));
    assert_ne!(env9, default);
    assert_eq!(run("g.json", Some("9"), Some("0")), default);
}

#[test]
fn predsim_identical_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = ten_example_dumps(dir.path());
    let out = dir.path().join("p.json");
    let res = repsim(&["predsim", "--a", s(&a), "--b", s(&a), "--out", s(&out)]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let report: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["similarity"], 1.0);
}

#[test]
fn predsim_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = ten_example_dumps(dir.path());
    let out = dir.path().join("p.json");
    let res = repsim(&["predsim", "--a", s(&a), "--b", s(&b), "--out", s(&out)]);
    assert!(res.status.success());
    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["n_examples"], 10);
    assert_eq!(report["similarity"], 0.7);
    assert_eq!(report["accuracy_a"], 0.6);
    assert_eq!(report["accuracy_b"], 0.7);
    let counts = &report["joint_counts"];
    assert_eq!(
        [
            &counts["both_correct"],
            &counts["a_only"],
            &counts["b_only"],
            &counts["both_wrong"]
        ],
        [5, 1, 2, 2]
    );
    let baseline = report["independence_baseline"].as_f64().unwrap();
    assert!((baseline - 0.54).abs() < 1e-15);
}

#[test]
fn predsim_mismatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    let a = dump(
        dir.path(),
        "a.jsonl",
        "a",
        &[("x1", 0, 0), ("x2", 1, 1), ("x3", 2, 0)],
    );
    let b = dump(
        dir.path(),
        "b.jsonl",
        "b",
        &[("x1", 0, 0), ("x2", 1, 1), ("x4", 2, 2)],
    );
    let res = repsim(&[
        "predsim",
        "--a",
        s(&a),
        "--b",
        s(&b),
        "--out",
        s(&dir.path().join("p.csv")),
    ]);
    assert_eq!(res.status.code(), Some(1));
    let err = stderr_json(&res);
    assert_eq!(err["example_id"], "x3");
    assert!(err["message"].as_str().unwrap().contains("x3"));
}

#[test]
fn auc_command() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = ten_example_dumps(dir.path());
    let out = dir.path().join("auc.csv");
    let res = repsim(&["auc", "--input", s(&a), "--out", s(&out)]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = fs::read_to_string(out).unwrap();
    assert!(csv.starts_with("model_id,num_classes,n,auc,auc_class_0,auc_class_1,auc_class_2\n"));
    assert!(csv.lines().nth(1).unwrap().starts_with("ft-imagenet,3,10,"));
}

#[test]
fn aggregate_stacks_folds() {
    let dir = tempfile::tempdir().unwrap();
    let a = checkpoint(dir.path(), "imagenet", "pre", 0.0);
    let b = checkpoint(dir.path(), "radimagenet", "pre", 50.0);
    let mut inputs = Vec::new();
    for seed in ["1", "2", "3"] {
        let out = dir.path().join(format!("fold{seed}.json"));
        let res = repsim(&[
            "cca",
            "--a",
            s(&a),
            "--b",
            s(&b),
            "--out",
            s(&out),
            "--seed",
            seed,
        ]);
        assert!(res.status.success());
        inputs.push(out);
    }
    let out = dir.path().join("all.json");
    let mut args = vec![
        "aggregate",
        "--out",
        s(&out),
        "--label",
        "three folds",
        "--inputs",
    ];
    args.extend(inputs.iter().map(|p| s(p)));
    let res = repsim(&args);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let report: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["metadata"]["fold_count"], 3);
    assert_eq!(report["layers"][1]["folds"].as_array().unwrap().len(), 3);

    let res = repsim(&[
        "aggregate",
        "--out",
        s(&dir.path().join("x.json")),
        "--inputs",
        "r.csv",
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn validate_valid_manifest_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let m = checkpoint(dir.path(), "imagenet", "pre", 0.0);
    let res = repsim(&["validate", s(&m)]);
    assert!(res.status.success());
    let stdout = String::from_utf8(res.stdout).unwrap();
    let layer_lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with("layer ")).collect();
    assert_eq!(layer_lines.len(), 2);
    assert!(
        layer_lines[0].starts_with("layer conv1 shape=(200, 2, 2, 8)"),
        "{stdout}"
    );

    let (a, _) = ten_example_dumps(dir.path());
    let res = repsim(&["validate", s(&a)]);
    assert!(res.status.success());
    assert!(String::from_utf8(res.stdout)
        .unwrap()
        .contains("examples=10"));
}

#[test]
fn validate_shape_mismatch_names_layer() {
    let dir = tempfile::tempdir().unwrap();
    let m = checkpoint(dir.path(), "imagenet", "pre", 0.0);
    let shape = TensorShape::new(200, 1, 1, 5);
    write_array(
        shape,
        &vec![0.5f32; shape.len()],
        &dir.path().join("imagenet_pre_conv2.npy"),
    )
    .unwrap();
    let res = repsim(&["validate", s(&m)]);
    assert_eq!(res.status.code(), Some(1));
    let err = stderr_json(&res);
    assert_eq!(err["layer"], "conv2");
    assert!(err["message"].as_str().unwrap().contains("conv2"));
}

#[test]
fn validate_nan_reports_flat_index() {
    let dir = tempfile::tempdir().unwrap();
    let m = checkpoint(dir.path(), "imagenet", "pre", 0.0);
    // The writer refuses NaN, so poke one into the payload directly.
    let file = dir.path().join("imagenet_pre_conv1.npy");
    let mut bytes = fs::read(&file).unwrap();
    let payload = bytes.len() - TensorShape::new(200, 2, 2, 8).len() * 4;
    let index = 1234;
    bytes[payload + 4 * index..payload + 4 * index + 4].copy_from_slice(&f32::NAN.to_le_bytes());
    fs::write(&file, bytes).unwrap();

    let res = repsim(&["validate", s(&m)]);
    assert_eq!(res.status.code(), Some(1));
    let err = stderr_json(&res);
    assert_eq!(err["index"], index);
    assert_eq!(err["layer"], "conv1");
}

#[test]
fn validate_bad_dump_label() {
    let dir = tempfile::tempdir().unwrap();
    let path = dump(dir.path(), "bad.jsonl", "m", &[("x1", 0, 0)]);
    let text = fs::read_to_string(&path)
        .unwrap()
        .replace("\"true\":0", "\"true\":7");
    fs::write(&path, text).unwrap();
    let res = repsim(&["validate", s(&path)]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(stderr_json(&res)["example_id"], "x1");
}
