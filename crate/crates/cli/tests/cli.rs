use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_apdeploy");

fn toy_config() -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy.toml");
    fs::read_to_string(path).unwrap()
}

/// Toy scenario with a training budget small enough for unit-speed tests.
fn quick_config(dir: &Path, total_steps: usize) -> PathBuf {
    let text = toy_config().replace(
        "total_steps = 16000\neval_every = 1000",
        &format!("total_steps = {total_steps}\nwarmup_steps = 50\nbatch_size = 32\neval_every = 50"),
    );
    assert!(text.contains(&format!("total_steps = {total_steps}")));
    let path = dir.join("quick.toml");
    fs::write(&path, text).unwrap();
    path
}

fn apdeploy(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn write_deployment(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn evaluate_writes_report_and_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let dep = write_deployment(dir.path(), "d.json", r#"{"tx": [[-5, -2.5], [5, 2.5]], "rx": [[5, 2.5]]}"#);
    let out = dir.path().join("out");
    let o = apdeploy(&["evaluate", "--config", s(&cfg), "--deployment", s(&dep), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["objective_value"].as_f64().unwrap() > 0.0);
    assert_eq!(report["per_sample_fim_det"].as_array().unwrap().len(), 8);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "evaluate");
    for name in manifest["outputs"].as_array().unwrap() {
        assert!(out.join(name.as_str().unwrap()).exists(), "{name} listed but missing");
    }
}

#[test]
fn single_pair_deployment_scores_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let dep = write_deployment(dir.path(), "d.json", r#"{"tx": [[1, 1]], "rx": [[-3, 2]]}"#);
    let out = dir.path().join("out");
    let o = apdeploy(&["evaluate", "--config", s(&cfg), "--deployment", s(&dep), "--out-dir", s(&out)]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["objective_value"].as_f64().unwrap(), 0.0);
}

#[test]
fn ap_outside_region_names_the_index() {
    let dir = TempDir::new().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let dep = write_deployment(dir.path(), "d.json", r#"{"tx": [[0, 0], [0, 0]], "rx": [[0, 11]]}"#);
    let o = apdeploy(&["evaluate", "--config", s(&cfg), "--deployment", s(&dep), "--out-dir", s(&dir.path().join("o"))]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("error[validation]") && err.contains("rx[0]"), "{err}");
}

#[test]
fn missing_and_malformed_files_are_categorized() {
    let dir = TempDir::new().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let missing = dir.path().join("none.json");
    let o = apdeploy(&["evaluate", "--config", s(&cfg), "--deployment", s(&missing)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error[not-found]"));

    let bad = write_deployment(dir.path(), "bad.json", "{\"tx\": [[0, 0]],\n \"rx\": [[0, ]]}");
    let o = apdeploy(&["evaluate", "--config", s(&cfg), "--deployment", s(&bad)]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("error[parse]") && err.contains("line 2"), "{err}");

    let broken = dir.path().join("broken.toml");
    fs::write(&broken, toy_config().replace("radius = 5.0", "radius = 5.0\nradios = 1.0")).unwrap();
    let o = apdeploy(&["oracle", "--config", s(&broken)]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("error[parse]") && err.contains("radios"), "{err}");
}

#[test]
fn train_with_zero_steps_writes_empty_curve() {
    let dir = TempDir::new().unwrap();
    let cfg = quick_config(dir.path(), 0);
    let out = dir.path().join("out");
    let o = apdeploy(&["train", "--config", s(&cfg), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("curve.csv")).unwrap(), "step,eval_reward,actor_loss,critic_loss,omega\n");
    for name in ["checkpoint.json", "trace.csv", "report.json", "deployment.svg", "timings.txt"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn checkpoint_restores_the_agent() {
    let dir = TempDir::new().unwrap();
    let cfg = quick_config(dir.path(), 120);
    let out = dir.path().join("out");
    assert!(apdeploy(&["train", "--config", s(&cfg), "--out-dir", s(&out)]).status.success());
    let text = fs::read_to_string(out.join("checkpoint.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let agent: apdeploy_core::AgentState = serde_json::from_value(v["agent"].clone()).unwrap();
    let config: apdeploy_core::SacConfig = serde_json::from_value(v["config"].clone()).unwrap();
    assert_eq!(config.total_steps, 120);
    assert_eq!(agent.actor.dims(), &[4, 64, 32, 12]);
    let again = serde_json::to_value(&agent).unwrap();
    assert_eq!(again, v["agent"]);
}

#[test]
fn sweep_rows_follow_cell_order() {
    let dir = TempDir::new().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let out = dir.path().join("out");
    let o = apdeploy(&[
        "sweep", "--config", s(&cfg), "--solver", "random", "--pairs", "1x1,2x1", "--objectives", "max-sum,comm-only",
        "--out-dir", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let cells: Vec<(&str, &str, &str)> = rows.iter().map(|r| (r[1], r[2], r[3])).collect();
    assert_eq!(
        cells,
        [("1", "1", "max-sum"), ("1", "1", "comm-only"), ("2", "1", "max-sum"), ("2", "1", "comm-only")]
    );
    // single pair: no sensing information at all
    assert_eq!(rows[0][7], "0");
    assert_eq!(rows[0][10], "0");
}

#[test]
fn empty_sweep_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let o = apdeploy(&["sweep", "--config", s(&cfg), "--out-dir", s(&dir.path().join("o"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error[validation]"));
}

#[test]
fn oracle_over_budget_reports_the_count() {
    let dir = TempDir::new().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let o = apdeploy(&["oracle", "--config", s(&cfg), "--out-dir", s(&dir.path().join("o"))]);
    assert!(o.status.success());
    let text = fs::read_to_string(&cfg).unwrap().replace("points_per_axis = 9", "points_per_axis = 9\nmax_evaluations = 1000");
    fs::write(&cfg, text).unwrap();
    let o = apdeploy(&["oracle", "--config", s(&cfg), "--out-dir", s(&dir.path().join("o2"))]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("error[budget]") && err.contains("531441"), "{err}");
}

#[test]
fn unknown_objective_flag_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let o = apdeploy(&["oracle", "--config", s(&cfg), "--objective", "max-average"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("max-average"));
}

fn count_primitives(node: roxmltree::Node) -> usize {
    node.children()
        .filter(|c| c.is_element())
        .map(|c| match c.tag_name().name() {
            "g" => count_primitives(c),
            "circle" | "rect" | "polygon" | "path" | "line" | "polyline" | "ellipse" => 1,
            _ => 0,
        })
        .sum()
}

#[test]
fn deployment_svg_is_valid_and_complete() {
    let dir = TempDir::new().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let dep = write_deployment(dir.path(), "d.json", r#"{"tx": [[-5, -2.5], [5, 2.5]], "rx": [[5, 2.5]]}"#);
    let out = dir.path().join("out");
    assert!(apdeploy(&["evaluate", "--config", s(&cfg), "--deployment", s(&dep), "--out-dir", s(&out)]).status.success());
    let svg = fs::read_to_string(out.join("deployment.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let group = |id: &str| doc.descendants().find(|n| n.attribute("id") == Some(id));
    assert!(group("axes").is_some() && group("legend").is_some());
    // M + N + K + Q + 1 with M = 2, N = 1, K = 1, Q = 8
    assert_eq!(count_primitives(group("data").unwrap()), 2 + 1 + 1 + 8 + 1);
    let tx_glyphs = group("data").unwrap().children().filter(|c| c.attribute("class") == Some("tx")).count();
    let rx_glyphs = group("data").unwrap().children().filter(|c| c.attribute("class") == Some("rx")).count();
    assert_eq!((tx_glyphs, rx_glyphs), (2, 1));
}

#[test]
fn manifest_echo_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = quick_config(dir.path(), 150);
    let first = dir.path().join("first");
    assert!(apdeploy(&["train", "--config", s(&cfg), "--seed", "9", "--out-dir", s(&first)]).status.success());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    let echo = dir.path().join("echo.toml");
    fs::write(&echo, manifest["config"].as_str().unwrap()).unwrap();
    let second = dir.path().join("second");
    assert!(apdeploy(&["train", "--config", s(&echo), "--out-dir", s(&second)]).status.success());
    for name in ["curve.csv", "trace.csv", "checkpoint.json", "report.json"] {
        assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(second.join(name)).unwrap(), "{name}");
    }
}
