use std::path::Path;
use std::process::{Command, Output};

fn meshkey(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshkey"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn build_mesh_writes_design_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = meshkey(&["build", "--scheme", "mesh", "--q", "3", "--out", "mesh3.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("mesh3.json")).unwrap()).unwrap();
    let blocks = v["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), 169);
    assert!(blocks.iter().all(|b| b.as_array().unwrap().len() == 8));
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("mesh3.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "build");
    assert_eq!(m["params"]["build"]["q"], 3);
}

#[test]
fn build_td_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let o = meshkey(&["build", "--scheme", "td", "--q", "3", "--k", "4"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["blocks"].as_array().unwrap().len(), 9);

    let o = meshkey(&["build", "--scheme", "td", "--q", "3", "--k", "5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("k must satisfy 2 ≤ k ≤ q"));
}

#[test]
fn build_rejects_bad_q_and_memory() {
    let dir = tempfile::tempdir().unwrap();
    let o = meshkey(&["build", "--scheme", "sbibd", "--q", "6"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = meshkey(&["build", "--scheme", "mesh", "--q", "3", "--memory", "7"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("memory bound"));
}

#[test]
fn verify_expectations() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    meshkey(&["build", "--scheme", "mesh", "--q", "2", "--out", "m2.json"], p);
    let o = meshkey(&["verify", "m2.json", "--expect-lambdas", "7,9"], p);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("λ₁ certified by enumeration: 7"));

    let o = meshkey(&["verify", "m2.json", "--expect-lambdas", "49,9"], p);
    assert_eq!(o.status.code(), Some(1));

    meshkey(&["build", "--scheme", "sbibd", "--q", "3", "--out", "s3.json"], p);
    let o = meshkey(&["verify", "s3.json", "--expect-lambdas", "1", "--expect-v", "13", "--expect-k", "4"], p);
    assert!(o.status.success());
    assert!(stdout(&o).contains("sbibd"));

    let text = std::fs::read_to_string(p.join("s3.json")).unwrap();
    std::fs::write(p.join("trunc.json"), &text[..text.len() / 2]).unwrap();
    assert_eq!(meshkey(&["verify", "trunc.json"], p).status.code(), Some(2));
    assert_eq!(meshkey(&["verify", "missing.json"], p).status.code(), Some(2));
}

#[test]
fn analyze_examples() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = meshkey(&["analyze", "--metric", "scalability", "--ring", "10"], p);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l == "proposed,4,10,scalability,,441,paper"));

    let o = meshkey(&["analyze", "--metric", "resilience", "--schemes", "sbibd", "--q", "4", "--x-max", "1"], p);
    let rows: Vec<String> = stdout(&o).lines().map(String::from).collect();
    let v: f64 = rows.last().unwrap().split(',').nth(5).unwrap().parse().unwrap();
    assert!((v - 5.0 / 21.0).abs() < 1e-15);

    let o = meshkey(&["analyze", "--metric", "connectivity", "--schemes", "proposed", "--q", "2"], p);
    let out = stdout(&o);
    assert!(out.contains("proposed,2,6,connectivity,,0.2857142857142857,paper"));
    assert!(out.contains("proposed,2,6,connectivity,,0.25,exact"));

    let o = meshkey(
        &["analyze", "--metric", "connectivity", "--schemes", "proposed", "--q", "2", "--paper-faithful"],
        p,
    );
    assert!(!stdout(&o).contains("exact"));
}

#[test]
fn analyze_flag_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let both = meshkey(&["analyze", "--metric", "scalability", "--q", "3", "--ring", "10"], p);
    assert_eq!(both.status.code(), Some(2));
    let bad = meshkey(&["analyze", "--metric", "latency", "--q", "3"], p);
    assert_eq!(bad.status.code(), Some(1));
    // one infeasible scheme is skipped with a warning
    let o = meshkey(&["analyze", "--metric", "scalability", "--schemes", "ukp_star,proposed", "--q", "3"], p);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning: skipped ukp_star"));
}

#[test]
fn simulate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let args = ["simulate", "--q", "2", "--x", "0", "--trials", "1000", "--seed", "7", "--out", "s.csv"];
    let o = meshkey(&args, p);
    assert!(o.status.success());
    let first = std::fs::read_to_string(p.join("s.csv")).unwrap();
    assert_eq!(first, "q,x,trials,semantics,seed,estimate,stderr\n2,0,1000,union,7,0,0\n");
    meshkey(&args, p);
    assert_eq!(std::fs::read_to_string(p.join("s.csv")).unwrap(), first);

    let o = meshkey(&["simulate", "--q", "2", "--x", "48", "--trials", "10"], p);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_from_design_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    meshkey(&["build", "--scheme", "mesh", "--q", "2", "--out", "m.json"], p);
    let a = meshkey(&["simulate", "--design", "m.json", "--x", "3,10", "--trials", "500", "--seed", "1"], p);
    let b = meshkey(&["simulate", "--q", "2", "--x", "3,10", "--trials", "500", "--seed", "1"], p);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    meshkey(&["build", "--scheme", "sbibd", "--q", "2", "--out", "s.json"], p);
    let o = meshkey(&["simulate", "--design", "s.json", "--x", "1"], p);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn keys_export_and_secret_gating() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = meshkey(&["keys", "--q", "2"], p);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["devices"].as_array().unwrap().len(), 49);
    assert!(v["devices"][0].get("keys").is_none());

    assert_eq!(meshkey(&["keys", "--q", "2", "--with-secrets"], p).status.code(), Some(2));
    let master = "11".repeat(32);
    let o = meshkey(&["keys", "--q", "2", "--with-secrets", "--master", &master, "--out", "k.json"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(p.join("k.json")).unwrap()).unwrap();
    assert_eq!(v["devices"][0]["keys"].as_array().unwrap().len(), 6);
    let manifest = std::fs::read_to_string(p.join("k.manifest.json")).unwrap();
    assert!(!manifest.contains(&master));

    let o = meshkey(&["keys", "--q", "2", "--with-secrets", "--master", "abcd"], p);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn replay_reproduces_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = meshkey(
        &["analyze", "--metric", "resilience", "--schemes", "proposed,td", "--q", "3", "--x-max", "20", "--out", "r.csv"],
        p,
    );
    assert!(o.status.success());
    let o = meshkey(&["replay", "r.manifest.json", "--out", "again/r.csv"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(p.join("r.csv")).unwrap(),
        std::fs::read(p.join("again/r.csv")).unwrap()
    );
    let m = std::fs::read_to_string(p.join("again/r.manifest.json")).unwrap();
    assert!(m.contains("again/r.csv"));
}
