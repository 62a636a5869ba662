mod common;

use std::path::Path;

use oodkit::cli::run_with;
use oodkit::{DatasetSplit, Role};

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["oodkit"];
    argv.extend_from_slice(args);
    let code = run_with(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn synth(dir: &Path) -> String {
    let out = dir.join("synth");
    let (code, stdout, _) = run(&[
        "synth",
        "--out",
        out.to_str().unwrap(),
        "--n-per-cluster",
        "40",
        "--seed",
        "5",
    ]);
    assert_eq!(code, 0);
    stdout.trim().to_string()
}

#[test]
fn synth_writes_four_splits() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = oodkit::Manifest::load(synth(dir.path())).unwrap();
    assert_eq!(manifest.splits.len(), 4);
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path());
    assert_eq!(
        run(&["validate", "--manifest", &path]),
        (0, String::new(), String::new())
    );

    let mut r = common::rng(1);
    let train = common::train_split(&mut r, 20, 4, 2);
    let test = DatasetSplit::new(
        "id_test",
        Role::IdTest,
        common::random_matrix(&mut r, 5, 4, 1.0),
        None,
    )
    .unwrap();
    let odd = common::split(
        "odd",
        Role::OodTest,
        common::random_matrix(&mut r, 5, 3, 1.0),
    );
    let bad = dir.path().join("bad");
    std::fs::create_dir(&bad).unwrap();
    let p = common::write_manifest(&bad, &train, &test, &[&odd]);
    let (code, out, _) = run(&["validate", "--manifest", p.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(out, "dimension mismatch: odd\n");

    let (code, _, err) = run(&["validate", "--manifest", "/nonexistent/manifest.json"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn probe_writes_head_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path());
    let out = dir.path().join("linear");
    let (code, _, err) = run(&[
        "probe",
        "--manifest",
        &path,
        "--out",
        out.to_str().unwrap(),
        "--epochs",
        "10",
    ]);
    assert_eq!(code, 0, "{err}");
    for f in ["head.json", "W.npy", "b.npy", "metrics.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["id_test_accuracy"]["id_test"].as_f64().unwrap() > 0.9);

    let out = dir.path().join("mlp");
    let (code, _, _) = run(&[
        "probe",
        "--manifest",
        &path,
        "--out",
        out.to_str().unwrap(),
        "--probe",
        "mlp",
        "--epochs",
        "3",
        "--hidden",
        "16",
    ]);
    assert_eq!(code, 0);
    let head: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("head.json")).unwrap()).unwrap();
    assert_eq!(head["type"], "mlp");
}

#[test]
fn probe_without_train_labels_is_a_domain_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path());
    let mut m = oodkit::Manifest::load(&path).unwrap();
    m.splits.get_mut("id_train").unwrap().labels = None;
    m.save(&path).unwrap();
    let out = dir.path().join("p");
    let (code, _, err) = run(&["probe", "--manifest", &path, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("id_train requires labels"), "{err}");
}

#[test]
fn eval_reports_requested_methods() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path());
    let out = dir.path().join("eval");
    let (code, stdout, err) = run(&[
        "eval",
        "--manifest",
        &path,
        "--out",
        out.to_str().unwrap(),
        "--methods",
        "msp,knn",
        "--epochs",
        "10",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("MSP") && stdout.contains("KNN"));
    let cells =
        oodkit::evaluator::parse_csv(&std::fs::read(out.join("report.csv")).unwrap()).unwrap();
    let mut methods: Vec<_> = cells.iter().map(|c| c.method.as_str()).collect();
    methods.dedup();
    assert_eq!(methods, ["MSP", "KNN"]);
    assert!(out.join("report.json").exists() && out.join("report.txt").exists());
}

#[test]
fn eval_can_reuse_a_saved_head_and_save_scores() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path());
    let head = dir.path().join("head");
    assert_eq!(
        run(&[
            "probe",
            "--manifest",
            &path,
            "--out",
            head.to_str().unwrap(),
            "--epochs",
            "10"
        ])
        .0,
        0
    );
    let out = dir.path().join("eval");
    let (code, _, err) = run(&[
        "eval",
        "--manifest",
        &path,
        "--out",
        out.to_str().unwrap(),
        "--head",
        head.to_str().unwrap(),
        "--methods",
        "energy",
        "--format",
        "csv",
        "--save-scores",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.join("scores/energy__ood_scattered.npy").exists());
    assert!(!out.join("report.json").exists());
}

#[test]
fn unknown_method_is_a_usage_error_listing_valid_methods() {
    let (code, _, err) = run(&["eval", "--manifest", "m.json", "--methods", "msp,odin"]);
    assert_eq!(code, 2);
    assert!(err.contains("valid methods: msp, maxlogit"), "{err}");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"methods": ["knn"], "scorers": {"k": 3}, "formats": ["json"]}"#,
    )
    .unwrap();
    let out = dir.path().join("eval");
    let (code, _, err) = run(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--manifest",
        &path,
        "--out",
        out.to_str().unwrap(),
        "--k",
        "7",
    ]);
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["scorers"]["k"], 7);
    assert_eq!(report["config"]["methods"], serde_json::json!(["knn"]));
    assert!(!out.join("report.csv").exists());
}

#[test]
fn eval_csv_is_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path());
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = dir.path().join(format!("e{i}"));
        let (code, _, err) = run(&[
            "--threads",
            threads,
            "eval",
            "--manifest",
            &path,
            "--out",
            out.to_str().unwrap(),
            "--epochs",
            "10",
            "--seed",
            "3",
        ]);
        assert_eq!(code, 0, "{err}");
        outputs.push(std::fs::read(out.join("report.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn geometry_default_covers_every_method_and_both_regimes() {
    let (code, out, err) = run(&["geometry", "--n-per-cluster", "50"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("ood_concentrated") && out.contains("ood_scattered"));
    for m in oodkit::Method::ALL {
        assert!(out.contains(m.label()), "{m}");
    }
}

#[test]
fn geometry_seed_sweep_prints_medians() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let (code, stdout, err) = run(&[
        "geometry",
        "--methods",
        "msp,knn",
        "--seeds",
        "3",
        "--n-per-cluster",
        "40",
        "--out",
        out.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("median over 3 seeds"), "{stdout}");
    assert_eq!(
        oodkit::evaluator::parse_csv(&std::fs::read(out.join("geometry.csv")).unwrap())
            .unwrap()
            .len(),
        4
    );
}

#[test]
fn missing_required_inputs_are_usage_errors() {
    assert_eq!(run(&["eval"]).0, 2);
    assert_eq!(run(&["synth"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["--help"]).0, 0);
}
