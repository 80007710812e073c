use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 5
[suite]
width = 48
height = 32
episode_len = 6
episodes_per_family = 1
families = ["static", "high-motion"]
[train]
train_points = 48
test_points = 4
batch_size = 16
"#;

fn exwarp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exwarp"))
        .args(args)
        .env("EXWARP_THREADS", "2")
        .output()
        .unwrap()
}

fn config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, body).unwrap();
    p
}

fn ok(args: &[&str]) {
    let o = exwarp(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn missing_dataset_is_reported_by_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "datasets = [\"/nonexistent/episode\"]\n");
    let o = exwarp(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("datasets[0]"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[suite]\nwidht = 10\n");
    let o = exwarp(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("widht"));
}

#[test]
fn compare_reports_nominal_frame_rates() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}[compare]\npolicies = [\"S1\", \"S6\"]\n");
    let cfg = config(dir.path(), &body);
    let out = dir.path().join("out");
    ok(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("compare.json")).unwrap()).unwrap();
    let fps = |p: &str| {
        v["rows"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["policy"] == p && r["scenario"] == "all")
            .unwrap()["effective_fps"]
            .as_f64()
            .unwrap()
    };
    assert!((fps("S1") - 60.0).abs() < 1e-9);
    assert!((fps("S6") - 120.0).abs() < 1e-9);
}

#[test]
fn every_command_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}[sweep]\nspeeds = [2.0, 8.0]\nepisodes = 1\n");
    let cfg = config(dir.path(), &body);
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let model = out.join("model.exwq");
    let trained = format!("trained:{}", model.display());
    let commands: Vec<Vec<&str>> = vec![
        vec!["generate", "--config", cfg, "--out", out_s],
        vec!["train", "--config", cfg, "--out", out_s],
        vec!["run", "--config", cfg, "--out", out_s, "--policy", &trained],
        vec!["evaluate", "--config", cfg, "--out", out_s],
        vec!["compare", "--config", cfg, "--out", out_s],
    ];
    let mut snaps = Vec::new();
    for _ in 0..2 {
        if out.exists() {
            fs::remove_dir_all(&out).unwrap();
        }
        for c in &commands {
            ok(c);
        }
        snaps.push(snapshot(&out));
    }
    assert!(snaps[0].contains_key(Path::new("sweep.csv")));
    assert!(snaps[0].contains_key(Path::new("loocv.csv")));
    assert_eq!(snaps[0].keys().collect::<Vec<_>>(), snaps[1].keys().collect::<Vec<_>>());
    for (k, v) in &snaps[0] {
        assert!(snaps[1][k] == *v, "{} differs between runs", k.display());
    }
}
