use std::path::Path;
use std::process::Command;

fn emergelex(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_emergelex")).args(args).output().unwrap()
}

fn small_config(dir: &Path) -> String {
    let cfg = dir.join("small.toml");
    std::fs::write(&cfg, format!("iterations = 3\nseeds = [1, 2]\nout = {:?}\n", dir.join("out"))).unwrap();
    cfg.display().to_string()
}

fn stage(cfg: &str, cmd: &str, extra: &[&str]) -> String {
    let mut args = vec![cmd, "--config", cfg];
    args.extend_from_slice(extra);
    let o = emergelex(&args);
    assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = emergelex(&["gen-data", "--config", "/nonexistent/x.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(emergelex(&["train", "--variant", "bogus"]).status.code(), Some(2));
    assert_eq!(emergelex(&["train", "--seed-set", "9-1"]).status.code(), Some(2));
    assert_eq!(emergelex(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn stages_need_their_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert_eq!(emergelex(&["train", "--config", &cfg]).status.code(), Some(2));
    stage(&cfg, "gen-data", &[]);
    assert_eq!(emergelex(&["eval", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(emergelex(&["report", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn default_split_and_repeatable_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = stage(&cfg, "gen-data", &[]);
    assert!(out.contains("40 scenes (30 train, 10 test)"), "{out}");
    let path = dir.path().join("out/data/seed-001.jsonl");
    let first = std::fs::read(&path).unwrap();
    stage(&cfg, "gen-data", &[]);
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn full_pipeline_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    stage(&cfg, "gen-data", &[]);
    stage(&cfg, "train", &[]);

    let trace = std::fs::read_to_string(out.join("train/no-comm/seed-001/trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 3);
    for line in trace.lines() {
        let r: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(r["a_to_b"]["accepted"], 0);
        assert_eq!(r["b_to_a"]["accepted"], 0);
    }

    stage(&cfg, "eval", &[]);
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eval/proposed.json")).unwrap()).unwrap();
    for k in ["kappa_a", "kappa_p", "kappa_o", "kappa_c", "ear", "nmi_a", "mse_test_a", "welch_p_a"] {
        assert!(eval["summary"][k]["mean"].is_number(), "{k}");
    }
    stage(&cfg, "report", &[]);
    let tables = std::fs::read_to_string(out.join("report/tables.md")).unwrap();
    assert!(tables.contains("| variant | κ_a | κ_p | κ_o | κ_c | EAR |"));
    let first = std::fs::read(out.join("report/tables.tsv")).unwrap();
    stage(&cfg, "report", &[]);
    assert_eq!(std::fs::read(out.join("report/tables.tsv")).unwrap(), first);

    for v in ["proposed", "h2h-g"] {
        let m = std::fs::read_to_string(out.join(format!("report/plots/{v}/seed-002/theta_word_category_a.tsv"))).unwrap();
        let rows: Vec<&str> = m.lines().collect();
        assert_eq!(rows.len(), 1 + 13);
        assert!(rows.iter().all(|r| r.split('\t').count() == 1 + 40));
    }
    let wm = std::fs::read_to_string(out.join("report/plots/proposed/seed-001/theta_word_modality_b.tsv")).unwrap();
    assert_eq!(wm.lines().count(), 14);
    assert!(wm.lines().all(|r| r.split('\t').count() == 5));
}

#[test]
fn variant_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    stage(&cfg, "gen-data", &["--seed-set", "2"]);
    let out = stage(&cfg, "train", &["--seed-set", "2", "--variant", "no-mec"]);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("no-mec seed 2"));
    assert!(!dir.path().join("out/data/seed-001.jsonl").exists());
}
