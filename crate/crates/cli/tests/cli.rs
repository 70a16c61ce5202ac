use std::path::Path;
use std::process::{Command, Output};

fn choquard(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_choquard"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
}

fn config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_in_the_window_exits_zero_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), r#"{"grid": {"points": 16, "length": 16}, "params": {"mu": 0.1, "lambda": 0.1}}"#);
    let out = tmp.path().join("out");
    let run = choquard(&["solve", "--config", &cfg], &out);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let report = json(&out.join("report.json"));
    assert_eq!(report["version"], "choquard 0.1.0");
    assert_eq!(report["config"]["params"]["mu"], 0.1);
    assert_eq!(report["report"]["regime"], "ExistenceWindow");
    assert!(report["report"]["Lambda"].as_f64().unwrap() < 0.0);
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(csv.starts_with("# choquard 0.1.0\n"));
    assert!(csv.contains("\"mu\":0.1"));
    assert!(csv.lines().any(|l| l == "iteration,dt,I,S,Lambda,nehari_rel,equation_rel"));
    assert_eq!(std::fs::metadata(out.join("field.bin")).unwrap().len(), 24 + 8 * 16 * 16 * 16);
    assert_eq!(json(&out.join("field.json"))["version"], "choquard 0.1.0");
}

#[test]
fn critical_and_unbounded_regimes_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    for (p, label) in [(r#""5/3""#, "LowerCritical"), ("3", "UnboundedBelow")] {
        let text = format!(r#"{{"grid": {{"points": 16, "length": 16}}, "params": {{"p": {p}, "mu": 0.1}}, "solver": {{"max_iters": 500}}}}"#);
        let cfg = config(tmp.path(), &text);
        let out = tmp.path().join(label);
        let run = choquard(&["solve", "--config", &cfg], &out);
        assert_eq!(run.status.code(), Some(2), "{label}");
        let report = json(&out.join("report.json"));
        assert_eq!(report["report"]["regime"], label);
        assert!(report["status"].as_str().unwrap().starts_with("regime-flagged"));
        if label == "LowerCritical" {
            assert_eq!(report["contradiction"]["strictly_opposite"], true);
        }
    }
}

#[test]
fn malformed_config_is_rejected_with_position() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "{\n  \"grid\": {\"points\": 16,\n}");
    let run = choquard(&["solve", "--config", &cfg], &tmp.path().join("out"));
    assert_eq!(run.status.code(), Some(1));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("line 3"), "{err}");
    let cfg = config(tmp.path(), r#"{"params": {"alpha": 4.5}}"#);
    let run = choquard(&["classify", "--config", &cfg], &tmp.path().join("out"));
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("alpha"));
}

#[test]
fn flags_override_file_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), r#"{"seed": 3, "c_np": 1.0}"#);
    let out = tmp.path().join("out");
    let run = choquard(&["classify", "--config", &cfg, "--seed", "11", "--grid", "16,12"], &out);
    assert_eq!(run.status.code(), Some(0));
    let doc = json(&out.join("classify.json"));
    assert_eq!(doc["seed"], 11);
    assert_eq!(doc["config"]["grid"]["points"], 16);
    assert_eq!(doc["label"], "ExistenceWindow");
    assert!((doc["thresholds"]["mu_star_l2critical"].as_f64().unwrap() - 7.0 / 6.0).abs() < 1e-12);
    assert_eq!(doc["exponents"]["hls_upper"], 5.0);
}

#[test]
fn exact_classification_from_rational_strings() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), r#"{"params": {"alpha": "2", "s": "1/2", "p": "7/3"}, "c_np": 1.0}"#);
    let out = tmp.path().join("out");
    assert_eq!(choquard(&["classify", "--config", &cfg], &out).status.code(), Some(0));
    let doc = json(&out.join("classify.json"));
    assert_eq!(doc["label"], "L2Critical");
    assert_eq!(doc["exact"], true);
    assert_eq!(doc["exponents_exact"]["l2_critical"], "7/3");
    assert_eq!(doc["exponents_exact"]["lower"], "5/3");
}

#[test]
fn verify_passes_and_detects_a_corrupted_multiplier() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = choquard(&["verify"], &tmp.path().join("clean"));
    let text = String::from_utf8_lossy(&clean.stdout);
    assert_eq!(clean.status.code(), Some(0), "{text}");
    assert!(!text.contains("FAIL"));
    let bad = choquard(&["verify", "--corrupt-multiplier"], &tmp.path().join("bad"));
    assert_eq!(bad.status.code(), Some(1));
    let text = String::from_utf8_lossy(&bad.stdout);
    assert!(text.lines().any(|l| l.starts_with("FAIL oracle_riesz")), "{text}");
    assert_eq!(json(&tmp.path().join("bad/verify.json"))["passed"], false);
}

#[test]
fn sweep_writes_the_published_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        r#"{"grid": {"points": 16, "length": 16}, "params": {"mu": 0.1}, "solver": {"max_iters": 300},
            "sweep": {"p": [1.8, 3], "lambda": [0.05, 0.1]}}"#,
    );
    let out = tmp.path().join("out");
    let run = choquard(&["sweep", "--config", &cfg, "--workers", "2"], &out);
    assert_eq!(run.status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows[0],
        "n,alpha,s,p,lambda,mu,tau,N,L,converged,iters,H,grad,semi,A,S,I,Lambda,delta,nehari_rel,pohozaev_rel,energy_gap_rel,regime"
    );
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("3,2,0.5,1.8,0.05,"));
    assert!(rows[3].contains("UnboundedBelow"));
    assert_eq!(std::fs::read_dir(out.join("rows")).unwrap().count(), 4);
}

#[test]
fn oracle_writes_the_multiplier_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let run = choquard(&["oracle", "--grid", "8,4"], &out);
    assert_eq!(run.status.code(), Some(0));
    let table = std::fs::read_to_string(out.join("riesz_multiplier.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("k1,k2,k3,symbol"));
    assert_eq!(table.lines().count(), 1 + 512);
    assert_eq!(json(&out.join("oracle.json"))["passed"], true);
}
