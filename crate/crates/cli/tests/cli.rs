use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repo_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn posdd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posdd"))
        .args(args)
        .env_remove("POSDD_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Copy a shipped config and its dataset into a scratch directory.
fn shipped(name: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    for ext in ["json", "csv"] {
        let f = format!("{name}.{ext}");
        fs::copy(repo_configs().join(&f), dir.path().join(&f)).unwrap();
    }
    let cfg = dir.path().join(format!("{name}.json"));
    (dir, cfg)
}

fn write_config(dir: &Path, body: &Value) -> PathBuf {
    let p = dir.join("job.json");
    fs::write(&p, serde_json::to_string_pretty(body).unwrap()).unwrap();
    p
}

#[test]
fn shipped_example_is_feasible_and_verified() {
    let (dir, cfg) = shipped("ct_example");
    let o = posdd(&["stabilize", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let res: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/ct_result.json")).unwrap()).unwrap();
    assert_eq!(res["status"], "Feasible");
    let eta = res["eta"].as_f64().unwrap();
    let ver = &res["verification"];
    assert_eq!(ver["passed"], true);
    assert!(ver["max_violation"].as_f64().unwrap() <= eta / 2.0);
    let v: Vec<f64> = res["v"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(fs::read_dir(dir.path().join("out/ct_ensemble")).unwrap().count(), 100);

    let o = posdd(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["passed"], true);
}

#[test]
fn reruns_are_byte_identical() {
    let (dir, cfg) = shipped("ct_example");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = posdd(&["stabilize", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let (dir, cfg) = shipped("p2p_example");
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let o = posdd(&["p2p", "-c", cfg.to_str().unwrap()]);
            assert_eq!(code(&o), 0, "{}", stderr(&o));
            fs::read(dir.path().join("out/p2p_result.json")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn missing_data_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &serde_json::json!({ "data": "nowhere/samples.csv" }));
    let o = posdd(&["stabilize", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nowhere/samples.csv"), "{}", stderr(&o));
}

#[test]
fn unactuated_unstable_plant_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &serde_json::json!({
            "samples": 12,
            "prior": { "a_positive": true },
            "data": "data.csv",
            "output": "result.json",
            "plant": { "a": [[0.2, 0.1], [0.3, -0.5]], "b": [[0.0], [0.0]] }
        }),
    );
    let path = cfg.to_str().unwrap();
    assert_eq!(code(&posdd(&["gen-data", "-c", path])), 0);
    let o = posdd(&["stabilize", "-c", path]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let res: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(res["status"], "Infeasible");
    assert!(res.get("K").is_none());
}

#[test]
fn malformed_config_reports_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &serde_json::json!({ "simulation": { "t_end": "long" } }));
    let o = posdd(&["stabilize", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("simulation.t_end"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), &serde_json::json!({ "eta": 0.0 }));
    let o = posdd(&["stabilize", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("eta"), "{}", stderr(&o));
}

#[test]
fn csv_schema_mismatch_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "t,x1,u1,y1\n0,1,2,3\n").unwrap();
    let cfg = write_config(dir.path(), &serde_json::json!({ "data": "bad.csv" }));
    let o = posdd(&["stabilize", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("header"), "{}", stderr(&o));
}

#[test]
fn seed_sources_and_sample_override() {
    let (dir, cfg) = shipped("ct_example");
    let path = cfg.to_str().unwrap();
    let flag = dir.path().join("flag.csv");
    let o = posdd(&[
        "gen-data",
        "-c",
        path,
        "--seed",
        "7",
        "--T",
        "9",
        "-o",
        flag.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&flag).unwrap();
    assert_eq!(text.lines().count(), 10);

    let env = dir.path().join("env.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_posdd"))
        .args(["gen-data", "-c", path, "--T", "9", "-o", env.to_str().unwrap()])
        .env("POSDD_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(&env).unwrap(), text.as_bytes());
    assert_ne!(
        fs::read(dir.path().join("ct_example.csv")).unwrap()[..],
        text.as_bytes()[..]
    );
}

#[test]
fn mode_must_match_synthesis_command() {
    let (_dir, cfg) = shipped("ct_example");
    let o = posdd(&["lpv", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("mode"), "{}", stderr(&o));
}

#[test]
fn nominal_peak_to_peak() {
    let (dir, cfg) = shipped("p2p_example");
    let out = dir.path().join("nominal.json");
    let v: Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    let mut v = v.as_object().unwrap().clone();
    v.remove("mode");
    let cfg = write_config(dir.path(), &Value::Object(v));
    let o = posdd(&["nominal", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let res: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!((res["gamma"].as_f64().unwrap() - 3.7416).abs() < 1e-3);
}

#[test]
fn failing_certificate_exits_two() {
    let (dir, cfg) = shipped("ct_example");
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"status":"Feasible","v":[0.3,0.3,0.4],"K":[[0,0,0],[0,0,0]],"eta":0.001,"normalize_v":true}"#,
    )
    .unwrap();
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v["result"] = Value::String("bad.json".into());
    let cfg = write_config(dir.path(), &v);
    let o = posdd(&["verify", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn simulate_writes_a_trajectory() {
    let (dir, cfg) = shipped("lpv_example");
    let path = cfg.to_str().unwrap();
    assert_eq!(code(&posdd(&["lpv", "-c", path])), 0);
    let traj = dir.path().join("traj.csv");
    let o = posdd(&["simulate", "-c", path, "-o", traj.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&traj).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,x1,x2,V,th1,th2,th3");
    let last: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|f| f.parse().unwrap())
        .collect();
    assert!(last[1].abs() < 1e-6 && last[2].abs() < 1e-6);
}

#[test]
fn reproduce_experiments() {
    let o = posdd(&["reproduce", "p2p"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    for t in ["20", "30", "50", "80", "120"] {
        assert!(text.lines().any(|l| l.trim_start().starts_with(t)), "{text}");
    }
    assert!(text.contains("non-increasing in T and Metzler prior no worse: true"));

    let o = posdd(&["reproduce", "ct-stab"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout)
        .unwrap()
        .contains("published certificate on the true plant: pass"));

    assert_eq!(code(&posdd(&["reproduce", "unknown"])), 1);
    assert_eq!(code(&posdd(&["frobnicate"])), 1);
}
