//! End-to-end runs of the `robest` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn robest(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robest"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn robest")
}

fn write_config(dir: &Path, cfg: &Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn summary_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap()).collect()
}

#[test]
fn lists_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = robest(&["scenarios", "--list"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["affine", "affine_misidentified", "quadratic", "two_param", "x0_quadratic", "x0_two_param"] {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(name)), "{name} missing");
    }
}

#[test]
fn written_preset_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = robest(&["scenarios", "--write-config", "presets.json"], dir.path());
    assert!(out.status.success());
    let out = robest(&["run", "--config", "presets.json", "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("res");
    for name in ["affine", "affine_misidentified", "quadratic", "two_param", "x0_quadratic", "x0_two_param"] {
        for file in [
            format!("bounds_{name}.json"),
            format!("fig_{name}.svg"),
            format!("traj_{name}.csv"),
        ] {
            assert!(res.join(&file).is_file(), "{file} missing");
        }
    }
    // one row per parameter of interest: 1 + 1 + 1 + 2 + 1 + 2
    let rows = summary_rows(&res.join("summary.csv"));
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.get(15).unwrap().starts_with("ok")));
}

#[test]
fn figure_is_valid_svg_with_every_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &json!({ "scenarios": ["two_param"], "out_dir": "res" }));
    let out = robest(&["run", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("res/fig_two_param.svg")).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    for key in ["ground_truth", "theorem1", "gramian_baseline"] {
        let id = format!("series-{key}");
        assert!(
            doc.descendants().any(|n| n.attribute("id") == Some(id.as_str())),
            "series {key} missing"
        );
    }

    let json: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("res/bounds_two_param.json")).unwrap()).unwrap();
    assert!(json.is_object());
    let header = std::fs::read_to_string(dir.path().join("res/traj_two_param.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("t,x1,"));
    assert!(header.contains("ds_theta1_1") && header.contains("ds_theta2_1"), "{header}");
}

#[test]
fn strict_mode_rejects_nonnegative_log_norm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &json!({ "scenarios": ["affine"], "out_dir": "res" }));
    let out = robest(&["run", "--config", &cfg, "--mode", "strict"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn bad_config_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &json!({ "scenarios": ["affine"], "bogus": 1 }));
    assert_eq!(robest(&["run", "--config", &cfg], dir.path()).status.code(), Some(2));
    let cfg = write_config(dir.path(), &json!({ "scenarios": ["no_such_preset"] }));
    assert_eq!(robest(&["run", "--config", &cfg], dir.path()).status.code(), Some(2));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(robest(&["run", "--config", "absent.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn parameter_free_inline_scenario_is_fully_robust() {
    let dir = tempfile::tempdir().unwrap();
    let constant = |rows: usize, cols: usize, coeff: Value| json!({ "rows": rows, "cols": cols, "terms": [{ "coeff": coeff }] });
    let system = |damping: f64| {
        json!({
            "a": constant(2, 2, json!([[0.0, 1.0], [-4.0, -damping]])),
            "b": constant(2, 1, json!([[0.0], [1.0]])),
            "c": constant(1, 2, json!([[1.0, 0.0]])),
            "x0": constant(2, 1, json!([[1.0], [0.0]])),
        })
    };
    let cfg = write_config(
        dir.path(),
        &json!({
            "scenarios": [{
                "name": "flat",
                "params": [{ "name": "k", "nominal": 2.0 }],
                "truth": system(1.0),
                "estimate": system(1.5),
                "horizon": 10.0,
            }],
            "out_dir": "res",
        }),
    );
    let out = robest(&["run", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = summary_rows(&dir.path().join("res/summary.csv"));
    assert_eq!(rows.len(), 1);
    let r_gt: f64 = rows[0].get(12).unwrap().parse().unwrap();
    let gt: f64 = rows[0].get(7).unwrap().parse().unwrap();
    assert_eq!(gt, 0.0);
    assert_eq!(r_gt, 1.0);
}
