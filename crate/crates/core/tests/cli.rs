use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn modfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modfl")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn generate_is_deterministic_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let out = modfl(&["generate", "--benchmark", "bipartite", "--instances", "27", "--nodes", "8", "--seed", "7", "--out", s(d)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let files = dir_bytes(&a);
    assert_eq!(files.len(), 28);
    assert!(files.iter().any(|(n, _)| n == "manifest.json"));
    assert_eq!(files, dir_bytes(&b));
}

#[test]
fn usage_and_runtime_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = modfl(&["generate", "--benchmark", "bipartite", "--instances", "0", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("instances"));
    assert_eq!(modfl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(modfl(&["generate", "--benchmark", "bipartite", "--nodes", "7", "--out", s(tmp.path())]).status.code(), Some(1));
    let missing = tmp.path().join("missing");
    let out = modfl(&["train", "--data", s(&missing), "--out", s(&tmp.path().join("run"))]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "benchmark = \"ad\"\ninstances = 3\nnd = 10\nnc = 4\nk = 2\ndelta = [0.5, 0.3]\nthr = 0.1\n").unwrap();
    let data = tmp.path().join("ad");
    let out = modfl(&["generate", "--config", s(&cfg), "--out", s(&data), "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(data.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 4") && manifest.contains("\"nd\": 10"));
    fs::write(&cfg, "benchmark = \"ad\"\nndd = 10\n").unwrap();
    let out = modfl(&["generate", "--config", s(&cfg), "--out", s(&data)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ndd"));
}

#[test]
fn train_and_evaluate_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n);
    let out = modfl(&["generate", "--benchmark", "bipartite", "--instances", "8", "--nodes", "10", "--rho", "0.3", "--seed", "2", "--out", s(&p("data"))]);
    assert!(out.status.success());
    let train = |dir: &str, extra: &[&str]| {
        let (data, d) = (tmp.path().join("data"), tmp.path().join(dir));
        let mut args = vec!["train", "--data", s(&data), "--epochs", "3", "--out", s(&d)];
        args.extend(extra);
        let out = modfl(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    train("modfl", &[]);
    train("two", &["--method", "twostage"]);
    train("ablate", &["--ablate", "pareto_set"]);

    for f in ["checkpoint.json", "train_log.jsonl", "resolved_config.json", "summary.json"] {
        assert!(p("modfl").join(f).exists(), "{f}");
    }
    let resolved = fs::read_to_string(p("modfl").join("resolved_config.json")).unwrap();
    assert!(resolved.contains("\"version\"") && resolved.contains("\"seed\""));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("two").join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["counters"]["dslp_calls"], 0);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("modfl").join("summary.json")).unwrap()).unwrap();
    assert!(summary["counters"]["dslp_calls"].as_u64().unwrap() > 0);
    let log = fs::read_to_string(p("ablate").join("train_log.jsonl")).unwrap();
    assert!(log.lines().all(|l| l.contains("\"method\":\"w/o Pareto Set Loss\"")));

    let out = modfl(&[
        "evaluate", "--data", s(&p("data")), "--out", s(&p("eval")),
        "--checkpoint", s(&p("two")), "--checkpoint", s(&p("modfl").join("checkpoint.json")), "--oracle", "--split", "all",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(p("eval").join("metrics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "method,GD,MPFE,HAR,r1,r2,r");
    assert!(rows[1].starts_with("TwoStage,") && rows[2].starts_with("MoDFL,"));
    assert!(rows[3].starts_with("Oracle,0.000000,0.000000,1.000000,"), "{}", rows[3]);
    let per: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("eval").join("per_instance.json")).unwrap()).unwrap();
    assert_eq!(per.as_array().unwrap().len(), 3);

    // shape mismatch against a dataset with three objectives
    let out = modfl(&["generate", "--benchmark", "bipartite", "--instances", "4", "--nodes", "10", "--third-objective", "--out", s(&p("three"))]);
    assert!(out.status.success());
    let out = modfl(&["evaluate", "--data", s(&p("three")), "--out", s(&p("eval3")), "--checkpoint", s(&p("modfl"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("objectives"));
    let out = modfl(&["evaluate", "--data", s(&p("data")), "--out", s(&p("eval4"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_reports_every_suite() {
    let out = modfl(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("dslp-gradients") && text.contains("8 suites, 0 failed"));
    assert!(text.lines().filter(|l| l.starts_with("PASS")).all(|l| l.contains('s')));
}
