//! The `carol` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn carol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carol"))
        .args(args)
        .env_remove("CAROL_EMBED_ENDPOINT")
        .env_remove("CAROL_LLM_ENDPOINT")
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = carol(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let ctx = fixtures().join("context.txt");
    let pool = fixtures().join("pool_dense_sparse.jsonl");
    let text = format!(
        "{body}\n[paths]\ncontext = {:?}\npool = {:?}\n",
        ctx.display().to_string(),
        pool.display().to_string()
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn zero_steps_give_empty_response_and_zero_information() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[chain]\nt_max = 0");
    let out = dir.path().join("out");
    run_ok(&["--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "mitigate"]);
    assert_eq!(fs::read_to_string(out.join("response.txt")).unwrap(), "");
    assert_eq!(fs::read_to_string(out.join("trace.jsonl")).unwrap(), "");
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["final_eval"]["mutual_info"], 0.0);
    assert!(report["hallucination_score"].is_null());
    assert_eq!(report["config"]["chain"]["t_max"], 0);
}

#[test]
fn rejection_is_recorded_with_the_directive() {
    // After "Paris is the capital of France" is accepted, a contradicting
    // unit has a large negative gain; beta = 50 makes rejection certain.
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("pool.jsonl");
    fs::write(
        &pool,
        "{\"text\": \"Paris is the capital of France\", \"weight\": 1}\n{\"text\": \"The Eiffel Tower is located in Rome\", \"weight\": 1}\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "--context",
        fixtures().join("context.txt").to_str().unwrap(),
        "--pool",
        pool.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--seed",
        "3",
        "mitigate",
    ]);
    let trace = fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let rejected: Vec<Value> = trace
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|r| r["accepted"] == false)
        .collect();
    assert!(!rejected.is_empty());
    for r in &rejected {
        assert_eq!(r["revision_applied"], "Revise the previous statement as it is not contrasted.");
    }

    let cfg = write_config(dir.path(), "[chain]\nbeta = 50.0\nt_max = 20\ntau_override = 20");
    let mut records: Vec<Value> = Vec::new();
    for seed in 0..8 {
        let out2 = dir.path().join(format!("out-{seed}"));
        let seed = seed.to_string();
        run_ok(&["--config", cfg.to_str().unwrap(), "--pool", pool.to_str().unwrap(), "--seed", &seed, "--out-dir", out2.to_str().unwrap(), "mitigate"]);
        let trace = fs::read_to_string(out2.join("trace.jsonl")).unwrap();
        records.push(Value::Null);
        records.extend(trace.lines().map(|l| serde_json::from_str::<Value>(l).unwrap()));
    }
    // Once only Paris is held, proposing Rome splits the context and must be rejected.
    let rome = "The Eiffel Tower is located in Rome";
    let mut held: Vec<String> = Vec::new();
    let mut checked = 0;
    for r in &records {
        if r.is_null() {
            held.clear();
            continue;
        }
        let candidate = r["candidate"].as_str().unwrap().to_string();
        if candidate == rome && !held.is_empty() && !held.iter().any(|h| h == rome) {
            assert!(r["delta_f"].as_f64().unwrap() < 0.0);
            assert_eq!(r["accepted"], false);
            assert!(r["revision_applied"].is_string());
            checked += 1;
        }
        if r["accepted"] == true {
            held.push(candidate);
        }
    }
    assert!(checked > 0);
}

#[test]
fn mitigate_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures().join("mock_run.toml");
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        run_ok(&["--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "mitigate"]);
        outputs.push(
            ["response.txt", "trace.jsonl", "report.json"]
                .map(|f| fs::read(out.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn analyze_at_zero_beta_has_zero_curvature_and_a_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[analysis]\nbeta = 0.0\nmax_steps = 256\nreplicas = 200");
    let out = dir.path().join("out");
    run_ok(&["--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "analyze"]);
    let report = read_json(&out.join("mixing_report.json"));
    assert_eq!(report["beta"], 0.0);
    assert_eq!(report["report"]["gamma_bar"], 0.0);
    assert!(report["report"]["denominator_positive"].as_bool().unwrap());
    let tmix = report["report"]["empirical_tmix"].as_f64().unwrap();
    assert!(tmix <= report["report"]["tau_theorem"].as_f64().unwrap());
    let csv = fs::read_to_string(out.join("tv_curve.csv")).unwrap();
    assert!(csv.starts_with("step,tv_exact,tv_simulated\n0,"));
}

#[test]
fn analyze_reports_vacuous_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[analysis]\nmax_steps = 128\nreplicas = 100");
    let out = dir.path().join("out");
    let pool = fixtures().join("pool_paraphrase.jsonl");
    run_ok(&["--config", cfg.to_str().unwrap(), "--pool", pool.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "analyze"]);
    let report = read_json(&out.join("mixing_report.json"));
    assert_eq!(report["report"]["denominator_positive"], false);
    assert!(report["report"]["tau_theorem"].is_null());
}

#[test]
fn context_build_then_show() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = dir.path().join("ctx.jsonl");
    let stdout = run_ok(&[
        "--context",
        ctx.to_str().unwrap(),
        "context",
        "build",
        "--input",
        fixtures().join("context.txt").to_str().unwrap(),
    ]);
    assert!(stdout.contains("10 axioms"));
    let shown = run_ok(&["--context", ctx.to_str().unwrap(), "context", "show"]);
    assert!(shown.starts_with("embedder: builtin-hash"));
    assert!(shown.contains("ax-0001\tParis is the capital of France"));
}

#[test]
fn cluster_and_detect_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    run_ok(&["--out-dir", o, "cluster", "--greedy", "2"]);
    let clustering = read_json(&out.join("clustering.json"));
    assert_eq!(clustering["medoids"].as_array().unwrap().len(), 2);
    assert_eq!(clustering["assignment"].as_object().unwrap().len(), 10);

    run_ok(&["--out-dir", o, "--seed", "5", "detect"]);
    let report = read_json(&out.join("detection_report.json"));
    assert_eq!(report["items"], 100);
    assert_eq!(report["methods"].as_array().unwrap().len(), 2);
    assert!(out.join("roc_semantic-entropy.csv").exists());
    assert!(out.join("roc_token-entropy.csv").exists());
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[chain]\nbetta = 1.0\n").unwrap();
    let out = carol(&["--config", bad.to_str().unwrap(), "mitigate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("chain.betta"));

    let out = carol(&["--context", "/nonexistent/ctx.jsonl", "context", "show"]);
    assert_eq!(out.status.code(), Some(4));

    let garbage = dir.path().join("ctx.jsonl");
    fs::write(&garbage, "{not json}\n").unwrap();
    let out = carol(&["--context", garbage.to_str().unwrap(), "context", "show"]);
    assert_eq!(out.status.code(), Some(1));

    let remote = dir.path().join("remote.toml");
    fs::write(&remote, "[proposal]\nkind = \"external-http\"\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\nmodel = \"m\"\ntimeout_secs = 2\n").unwrap();
    let out = carol(&["--config", remote.to_str().unwrap(), "--out-dir", dir.path().join("o").to_str().unwrap(), "mitigate"]);
    assert_eq!(out.status.code(), Some(3));
}
