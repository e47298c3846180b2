use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mdiqct"));
    c.env_remove("MDIQCT_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn schema(name: &str) -> jsonschema::JSONSchema {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("schema")
        .join(format!("{name}.schema.json"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&v).unwrap()
}

fn assert_valid(name: &str, doc: &Value) {
    let s = schema(name);
    if let Err(errors) = s.validate(doc) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("{name} output violates schema: {msgs:?}\n{doc}");
    };
}

fn stdout_json(args: &[&str]) -> Value {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn tables_json_matches_schema_and_values() {
    let doc = stdout_json(&["tables", "--y", "0.9"]);
    assert_valid("tables", &doc);
    let diag = doc["verification"]["psi-plus"][0][0].as_f64().unwrap();
    assert!((diag - 0.18).abs() < 1e-12);
    let t2 = doc["coherent"]["plus"]["psi-plus"][0].as_f64().unwrap();
    assert!((t2 - 0.8).abs() < 1e-12);
    assert_eq!(doc["zero_cells"]["psi-plus"][0][2], Value::Bool(true));
}

#[test]
fn tables_rejects_bad_y() {
    let o = run(&["tables", "--y", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn run_lines_match_schema() {
    for extra in [
        &[][..],
        &["--adversary", "alice-individual"][..],
        &["--adversary", "alice-coherent", "--sent", "minus", "--target", "1"][..],
        &["--adversary", "bob-med"][..],
        &["--mode", "baseline", "--adversary", "alice-blinding"][..],
        &[
            "--mode",
            "mdi-weak-coherent",
            "--mu-a",
            "0.5",
            "--mu-b",
            "0.5",
            "--pulses",
            "50",
            "--length",
            "10",
        ][..],
    ] {
        let mut args = vec!["run", "--runs", "40", "--seed", "2"];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let text = String::from_utf8(o.stdout).unwrap();
        assert_eq!(text.lines().count(), 40);
        for line in text.lines() {
            assert_valid("transcript", &serde_json::from_str(line).unwrap());
        }
    }
}

#[test]
fn attack_estimate_sweep_fair_match_schemas() {
    let a = stdout_json(&[
        "attack",
        "--adversary",
        "alice-individual",
        "--trials",
        "50000",
        "--seed",
        "3",
    ]);
    assert_valid("attack", &a);
    assert!(a["success_given_correct_guess"].as_f64().unwrap() == 1.0);
    let e = stdout_json(&[
        "estimate",
        "--scenario",
        "table-cell",
        "--alice",
        "01",
        "--bob",
        "10",
        "--trials",
        "20000",
    ]);
    assert_valid("estimate", &e);
    let s = stdout_json(&["sweep", "--lmin", "0", "--lmax", "50", "--step", "10"]);
    assert_valid("sweep", &s);
    assert_eq!(s["points"].as_array().unwrap().len(), 6);
    let f = stdout_json(&["fair"]);
    assert_valid("fair", &f);
    assert!((f["y"].as_f64().unwrap() - 0.9).abs() < 1e-9);
    assert!((f["bias"].as_f64().unwrap() - 0.4).abs() < 1e-9);
}

#[test]
fn attack_individual_million_trials() {
    let a = stdout_json(&[
        "attack",
        "--adversary",
        "alice-individual",
        "--trials",
        "1000000",
        "--seed",
        "3",
    ]);
    assert!((a["success"].as_f64().unwrap() - 0.75).abs() < 0.002);
}

#[test]
fn sweep_csv_has_eleven_rows() {
    let o = run(&[
        "sweep", "--lmin", "0", "--lmax", "50", "--step", "5", "--eta", "0.1", "--dark", "1e-4", "--format", "csv",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "length_km,pr_h,dark_dark_fraction");
    assert_eq!(lines.len(), 12);
    let first: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((first - 8.1e-9).abs() < 1e-20);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| run(args).status.code();
    assert_eq!(code(&["fair"]), Some(0));
    assert_eq!(code(&["nonsense"]), Some(2));
    assert_eq!(code(&["fair", "--unknown"]), Some(2));
    assert_eq!(code(&["fair", "--tolerance", "0"]), Some(2));
    assert_eq!(code(&["attack"]), Some(2));
    assert_eq!(code(&["attack", "--adversary", "mallory"]), Some(2));
    assert_eq!(code(&["estimate", "--scenario", "nope"]), Some(2));
    assert_eq!(code(&["run", "--adversary", "alice-blinding"]), Some(2));
    assert_eq!(
        code(&["attack", "--adversary", "alice-coherent", "--mode", "baseline"]),
        Some(2)
    );
    assert_eq!(code(&["run", "--mu-a", "0.5"]), Some(2));
    assert_eq!(code(&["sweep", "--step", "-1"]), Some(2));
    assert_eq!(code(&["run", "--threads", "0"]), Some(2));
    assert_eq!(code(&["run", "--eta", "0", "--max-rounds", "3"]), Some(1));
}

#[test]
fn usage_errors_leave_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tables.json");
    let o = bin()
        .args(["tables", "--y", "1.5", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let o = bin()
        .args(["run", "--eta", "0", "--max-rounds", "3", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn config_file_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"y": 0.8, "format": "csv"}"#);
    let cfg = cfg.to_str().unwrap();
    let o = run(&["tables", "--config", cfg]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("table,outcome"));
    // 2y(1−y) at y = 0.8.
    let cell: f64 = text
        .lines()
        .find(|l| l.starts_with("verification,psi-plus,00,00,"))
        .and_then(|l| l.split(',').nth(4))
        .unwrap()
        .parse()
        .unwrap();
    assert!((cell - 0.32).abs() < 1e-12, "{cell}");
    let flag = stdout_json(&["tables", "--config", cfg, "--y", "0.9", "--format", "json"]);
    assert_eq!(flag["y"].as_f64(), Some(0.9));

    let bad = write_config(dir.path(), r#"{"why": 0.8}"#);
    assert_eq!(
        run(&["tables", "--config", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["tables", "--config", "/nonexistent/c.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn seed_env_is_the_default_seed() {
    let args = ["run", "--runs", "20"];
    let with_env = bin().args(args).env("MDIQCT_SEED", "11").output().unwrap();
    let with_flag = run(&["run", "--runs", "20", "--seed", "11"]);
    let default = run(&args);
    assert_eq!(with_env.stdout, with_flag.stdout);
    assert_ne!(with_env.stdout, default.stdout);
    let flag_wins = bin()
        .args(["run", "--runs", "20", "--seed", "0"])
        .env("MDIQCT_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(flag_wins.stdout, default.stdout);
    let bad = bin().args(args).env("MDIQCT_SEED", "abc").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn text_formats_render() {
    for args in [
        &["tables", "--format", "text"][..],
        &["run", "--runs", "3", "--format", "text"][..],
        &[
            "attack",
            "--adversary",
            "bob-med",
            "--trials",
            "1000",
            "--format",
            "text",
        ][..],
        &[
            "estimate",
            "--scenario",
            "honest-coin-uniformity",
            "--trials",
            "1000",
            "--format",
            "text",
        ][..],
        &["sweep", "--format", "text"][..],
        &["fair", "--format", "text"][..],
    ] {
        let o = run(args);
        assert!(o.status.success(), "{args:?}");
        assert!(!o.stdout.is_empty());
    }
}

#[test]
fn single_run_replays_from_its_index() {
    let many = String::from_utf8(run(&["run", "--runs", "5", "--seed", "4"]).stdout).unwrap();
    let one = String::from_utf8(run(&["run", "--runs", "1", "--seed", "4"]).stdout).unwrap();
    assert_eq!(many.lines().next(), one.lines().next());
}
