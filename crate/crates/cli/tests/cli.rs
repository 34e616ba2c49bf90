use std::path::Path;
use std::process::{Command, Output};

fn fracext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracext"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_ELLIPTIC: &str = r#"{"kind":"elliptic","n":1,"s":0.4,"ladder":[4,8,16],
    "data":{"kind":"eig1"},"expected-slope":-0.5,"slope-tol":0.3}"#;

#[test]
fn elliptic_run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_ELLIPTIC);
    let out = dir.path().join("out");
    let o = fracext(&["--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(out.join("elliptic.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "dofs,h_base,M,Y,energy_err,hs_trace_err,est_total"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 7);
        // 17 significant digits: one leading digit and sixteen decimals
        let mantissa = cells[4].split('e').next().unwrap();
        assert_eq!(mantissa.split('.').nth(1).unwrap().len(), 16, "{}", cells[4]);
    }

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["kind"], "elliptic");
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["params"]["seed"], 5);
    assert!(summary["slope"].as_f64().unwrap() < 0.0);
    for key in ["kind", "params", "slope", "slope_tol", "pass"] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn single_thread_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_ELLIPTIC);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = fracext(&["--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "1"]);
        assert_eq!(o.status.code(), Some(0));
        outputs.push(std::fs::read(out.join("elliptic.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn missed_tolerance_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"kind":"elliptic","n":1,"s":0.4,"ladder":[4,8,16],"expected-slope":-3.0,"slope-tol":0.01}"#,
    );
    let out = dir.path().join("out");
    let o = fracext(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"pass\": false"));
}

#[test]
fn bad_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "{ not json",
        r#"{"kind":"elliptic","s":1.5,"ladder":[4,8]}"#,
        r#"{"kind":"parabolic","s":0.5,"gamma":1.5,"steps":[4,8]}"#,
        r#"{"kind":"afem","s":0.5,"theta":0.0}"#,
        r#"{"kind":"elliptic","s":0.5,"ladder":[]}"#,
    ] {
        let cfg = write_config(dir.path(), body);
        let o = fracext(&["--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{body}");
    }
    let o = fracext(&["--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn parabolic_and_mg_tables_have_fixed_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"kind":"parabolic","s":0.5,"gamma":0.5,"steps":[4,8,16],"cells":8,"initial":{"kind":"eig1"}}"#,
    );
    let out = dir.path().join("p");
    assert_eq!(
        fracext(&["--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    let csv = std::fs::read_to_string(out.join("parabolic_k8.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "step,t,trace_l2,energy,ledger");
    // header, the initial state and eight steps
    assert_eq!(csv.lines().count(), 10);

    let cfg = write_config(
        dir.path(),
        r#"{"kind":"mg-bench","n":1,"s-values":[0.5],"ladder":[1,2],"mg-tol":1e-10}"#,
    );
    let out = dir.path().join("m");
    assert_eq!(
        fracext(&["--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    let csv = std::fs::read_to_string(out.join("mg_bench.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "h_base,s,dofs,iters,delta");
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        fracext::experiment::ExperimentConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 5);
}
