use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn demo_gauge(args: &[&str], paths: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_demo-gauge"));
    cmd.args(args);
    for (flag, p) in paths {
        cmd.arg(flag).arg(p);
    }
    cmd.output().expect("spawn demo-gauge")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn demo_csv(phase: f64, torque: bool) -> String {
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=6).map(|i| format!("q{i}")));
    if torque {
        header.extend((1..=6).map(|i| format!("tau{i}")));
    }
    let mut text = header.join(",") + "\n";
    for k in 0..60 {
        let t = k as f64 * 0.02;
        let mut row = vec![format!("{t}")];
        row.extend((0..6).map(|i| format!("{}", 0.2 * i as f64 + 0.3 * (t + phase + i as f64).sin())));
        if torque {
            row.extend((0..6).map(|i| format!("{}", (t * (i + 1) as f64).cos())));
        }
        text += &(row.join(",") + "\n");
    }
    text
}

/// Writes `sets` (set id → demo file contents) and a manifest referencing them.
fn dataset(dir: &Path, sets: &[(&str, Vec<String>)]) -> PathBuf {
    let mut entries = Vec::new();
    for (id, demos) in sets {
        let mut rels = Vec::new();
        for (i, text) in demos.iter().enumerate() {
            let rel = format!("{id}/demo{}.csv", i + 1);
            fs::create_dir_all(dir.join(id)).unwrap();
            fs::write(dir.join(&rel), text).unwrap();
            rels.push(rel);
        }
        entries.push(json!({ "set_id": id, "user_id": id, "phase_label": "p1", "demos": rels }));
    }
    let path = dir.join("manifest.json");
    fs::write(&path, json!({ "model": "builtin:ur5", "sets": entries }).to_string()).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// A small synthetic dataset with outcomes, written by `synth`.
fn synthetic(dir: &Path, users: usize) -> PathBuf {
    let config = dir.join("gen.json");
    fs::write(&config, json!({ "n_users": users, "demos_per_set": 3 }).to_string()).unwrap();
    let data = dir.join("data");
    let out = demo_gauge(&["synth", "--seed", "5"], &[("--config", &config), ("--out", &data)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    data.join("manifest.json")
}

fn set_config(manifest: &Path, pointer: &str, value: Value) {
    let mut m = read_json(manifest);
    *m.pointer_mut(pointer).expect("config entry") = value;
    fs::write(manifest, m.to_string()).unwrap();
}

#[test]
fn metrics_writes_one_file_per_demo() {
    let tmp = TempDir::new().unwrap();
    let demos = |p: f64| (0..3).map(|i| demo_csv(p + i as f64 * 0.1, true)).collect::<Vec<_>>();
    let manifest = dataset(tmp.path(), &[("a", demos(0.0)), ("b", demos(1.0))]);
    let out_dir = tmp.path().join("out");
    let out = demo_gauge(&["metrics"], &[("--manifest", &manifest), ("--out", &out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let files = tree(&out_dir.join("metrics"));
    assert_eq!(files.len(), 6);
    let m = read_json(&out_dir.join("metrics/b/demo2.json"));
    assert_eq!(m["set_id"], "b");
    assert_eq!(m["demo_id"], "demo2");
    let keys: Vec<&String> = m["metrics"].as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 10);
    assert!(m["metrics"]["q_x"].as_f64().unwrap() > 0.0);
    assert!(m["metrics"]["q_effort"].as_f64().unwrap() > 0.0);
    assert!(m["metrics"]["q_legibility"].is_null());
    assert_eq!(m["flags"]["q_legibility"], "unavailable");
}

#[test]
fn missing_torque_marks_effort_unavailable() {
    let tmp = TempDir::new().unwrap();
    let manifest = dataset(tmp.path(), &[("a", vec![demo_csv(0.0, false), demo_csv(0.5, false)])]);
    let out_dir = tmp.path().join("out");
    let out = demo_gauge(&["metrics"], &[("--manifest", &manifest), ("--out", &out_dir)]);
    assert_eq!(code(&out), 0);
    let m = read_json(&out_dir.join("metrics/a/demo1.json"));
    assert!(m["metrics"]["q_effort"].is_null());
    assert_eq!(m["flags"]["q_effort"], "unavailable");
    assert_eq!(m["flags"]["q_jerk_q"], "ok");
}

#[test]
fn corrupt_demo_gives_partial_exit_and_error_entry() {
    let tmp = TempDir::new().unwrap();
    let mut demos = vec![demo_csv(0.0, true), demo_csv(0.2, true)];
    demos.push("t,q1,q2,q3,q4,q5,q6\n0,1,2,3\n".into());
    let manifest = dataset(tmp.path(), &[("a", demos)]);
    let out_dir = tmp.path().join("out");
    let out = demo_gauge(&["metrics"], &[("--manifest", &manifest), ("--out", &out_dir)]);
    assert_eq!(code(&out), 3);
    let bad = read_json(&out_dir.join("metrics/a/demo3.json"));
    assert!(bad["error"].as_str().unwrap().contains("demo3"), "{bad}");
    assert!(bad.get("metrics").is_none());
    assert!(read_json(&out_dir.join("metrics/a/demo1.json"))["metrics"].is_object());
}

#[test]
fn exit_codes_for_bad_inputs_and_unwritable_output() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("out");

    let missing = demo_gauge(&["metrics"], &[("--manifest", &tmp.path().join("nope.json")), ("--out", &out_dir)]);
    assert_eq!(code(&missing), 2);

    let dup = tmp.path().join("dup.json");
    fs::create_dir_all(tmp.path().join("a")).unwrap();
    fs::write(tmp.path().join("a/d.csv"), demo_csv(0.0, true)).unwrap();
    let set = json!({ "set_id": "a", "user_id": "u", "phase_label": "p", "demos": ["a/d.csv"] });
    fs::write(&dup, json!({ "model": "builtin:ur5", "sets": [set.clone(), set] }).to_string()).unwrap();
    let out = demo_gauge(&["cluster"], &[("--manifest", &dup), ("--out", &out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate set_id a"));

    let manifest = dataset(tmp.path(), &[("b", vec![demo_csv(0.0, true), demo_csv(0.4, true)])]);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = demo_gauge(&["metrics"], &[("--manifest", &manifest), ("--out", &blocker)]);
    assert_eq!(code(&out), 1);

    let bad_dt = demo_gauge(&["metrics", "--dt", "-1"], &[("--manifest", &manifest), ("--out", &out_dir)]);
    assert_eq!(code(&bad_dt), 2);
}

#[test]
fn synth_is_deterministic_and_echoes_seed() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("gen.json");
    fs::write(&config, json!({ "n_users": 4, "demos_per_set": 2 }).to_string()).unwrap();
    let run = |name: &str, seed: &str| {
        let dir = tmp.path().join(name);
        let out = demo_gauge(&["synth", "--seed", seed], &[("--config", &config), ("--out", &dir)]);
        assert_eq!(code(&out), 0);
        dir
    };
    let (a, b, c) = (run("a", "11"), run("b", "11"), run("c", "12"));
    assert_eq!(tree(&a), tree(&b));
    assert_ne!(tree(&a), tree(&c));

    let manifest = read_json(&a.join("manifest.json"));
    assert_eq!(manifest["generator"]["seed"], 11);
    assert_eq!(manifest["config"]["clustering"]["seed"], 11);
    assert_eq!(manifest["sets"].as_array().unwrap().len(), 4);
    let truth = read_json(&a.join("truth.json"));
    assert_eq!(truth["seed"], 11);
    assert_eq!(truth["labels"][0]["regime"], "consistent");
    assert_eq!(truth["labels"][1]["regime"], "inconsistent");
}

#[test]
fn cluster_seed_flag_overrides_manifest() {
    let tmp = TempDir::new().unwrap();
    let manifest = synthetic(tmp.path(), 6);
    let out_dir = tmp.path().join("out");
    let out = demo_gauge(&["cluster", "--seed", "99"], &[("--manifest", &manifest), ("--out", &out_dir)]);
    assert_eq!(code(&out), 0);
    let report = read_json(&out_dir.join("cluster_report.json"));
    let group = &report["groups"][0];
    assert_eq!(group["seed"], 99);
    assert_eq!(group["flags"].as_array().unwrap().len(), 6);
    let csv = fs::read_to_string(out_dir.join("cluster_box.csv")).unwrap();
    assert!(csv.starts_with("group,set_id,cluster,metric,z\n"));
    assert_eq!(csv.lines().count(), 1 + 6 * 10);
}

#[test]
fn evaluate_writes_group_tables() {
    let tmp = TempDir::new().unwrap();
    let manifest = synthetic(tmp.path(), 6);
    let out_dir = tmp.path().join("out");
    let out = demo_gauge(&["evaluate"], &[("--manifest", &manifest), ("--out", &out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&out_dir.join("success_report.json"));
    assert_eq!(report["sets"].as_array().unwrap().len(), 6);
    for s in report["sets"].as_array().unwrap() {
        let g = s["generalization"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&g));
    }
    assert!(out_dir.join("success_sets.csv").is_file());
    assert!(out_dir.join("success_groups.csv").is_file());
}

#[test]
fn empty_candidate_list_gives_intercept_only_model() {
    let tmp = TempDir::new().unwrap();
    let manifest = synthetic(tmp.path(), 8);
    set_config(&manifest, "/config", json!({ "regression": { "candidates": { "terms": [] } } }));
    let out_dir = tmp.path().join("out");
    let out = demo_gauge(&["regress"], &[("--manifest", &manifest), ("--out", &out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let models = read_json(&out_dir.join("models.json"));
    for m in models["models"].as_array().unwrap() {
        assert_eq!(m["model"]["r2"], 0.0);
        assert_eq!(m["model"]["terms"].as_array().unwrap().len(), 0);
        assert_eq!(m["model"]["estimates"].as_array().unwrap().len(), 1);
    }
}

#[test]
fn restricted_candidate_list_is_noted() {
    let tmp = TempDir::new().unwrap();
    let manifest = synthetic(tmp.path(), 8);
    let terms = json!(["x1", "x11", "x1:x11", "x2^2"]);
    set_config(&manifest, "/config", json!({ "regression": { "candidates": { "terms": terms } } }));
    let out_dir = tmp.path().join("out");
    let out = demo_gauge(&["regress"], &[("--manifest", &manifest), ("--out", &out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let models = read_json(&out_dir.join("models.json"));
    assert_eq!(models["key"]["x11"], "consistency");
    assert_eq!(models["key"]["x2"], "q_q");
    for m in models["models"].as_array().unwrap() {
        assert_eq!(m["candidates"], 4);
        assert!(m["model"]["note"].as_str().unwrap().contains("4 term(s)"));
    }
    let corr = fs::read_to_string(out_dir.join("correlation.csv")).unwrap();
    assert!(corr.starts_with("row,col,r\n"));

    set_config(&manifest, "/config/regression/candidates", json!({ "terms": ["x99"] }));
    let out = demo_gauge(&["regress"], &[("--manifest", &manifest), ("--out", &out_dir)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn report_records_input_hashes_and_all_outputs() {
    let tmp = TempDir::new().unwrap();
    let manifest = synthetic(tmp.path(), 6);
    let out_dir = tmp.path().join("out");
    let out = demo_gauge(&["report", "--jobs", "2"], &[("--manifest", &manifest), ("--out", &out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "cluster_report.json",
        "cluster_box.csv",
        "success_report.json",
        "success_sets.csv",
        "success_groups.csv",
        "correlation.csv",
        "models.json",
        "run_report.json",
        "run_stamp.json",
    ] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let run = read_json(&out_dir.join("run_report.json"));
    let inputs = run["inputs"].as_object().unwrap();
    // manifest, model, 6 outcome files, 18 demos
    assert_eq!(inputs.len(), 26);
    assert!(inputs.contains_key("demos/u01_demo/demo01.csv"));
    let digest = inputs["manifest.json"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(run.get("generated_unix_seconds").is_none());
    assert!(read_json(&out_dir.join("run_stamp.json"))["generated_unix_seconds"].is_u64());
}

#[test]
fn missing_outcomes_give_partial_exit() {
    let tmp = TempDir::new().unwrap();
    let manifest = synthetic(tmp.path(), 6);
    let mut m = read_json(&manifest);
    m["sets"][0].as_object_mut().unwrap().remove("outcomes");
    fs::write(&manifest, m.to_string()).unwrap();
    let out_dir = tmp.path().join("out");
    let out = demo_gauge(&["evaluate"], &[("--manifest", &manifest), ("--out", &out_dir)]);
    assert_eq!(code(&out), 3);
    let report = read_json(&out_dir.join("success_report.json"));
    assert_eq!(report["missing_outcomes"], json!(["u01_demo"]));
}
