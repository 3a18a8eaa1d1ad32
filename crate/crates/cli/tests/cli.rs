mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::Stdio;
use std::time::Duration;

use afva_core::pipeline::read_cache_file;
use common::{build, run, text, write_dictionary, SyntheticSpec};
use serde_json::Value;

fn small(n: usize) -> common::Synthetic {
    build(&SyntheticSpec { n, ..Default::default() })
}

#[test]
fn extract_low_level_blocks() {
    let ds = small(3);
    let out = ds.path("f.cache");
    let o = run(&[
        "extract",
        "--manifest",
        ds.manifest.to_str().unwrap(),
        "--blocks",
        "color,gist,lbp",
        "--gist-resolution",
        "32",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let m = read_cache_file(&out).unwrap();
    assert_eq!((m.n_rows(), m.dim()), (3, 597));
    let labels = std::fs::read_to_string(ds.path("f.cache.labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 4);
    assert!(labels.starts_with("id,valence,arousal"));
}

#[test]
fn extract_reports_every_failed_record() {
    let ds = build(&SyntheticSpec {
        n: 3,
        drop_object_files: true,
        ..Default::default()
    });
    let out = ds.path("f.cache");
    let o = run(&[
        "extract",
        "--manifest",
        ds.manifest.to_str().unwrap(),
        "--blocks",
        "object",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o.stderr);
    for i in 0..3 {
        assert!(err.contains(&format!("record r{i:04}:")), "{err}");
    }
    assert!(!out.exists());
}

#[test]
fn extract_is_bit_identical_on_rerun() {
    let ds = small(4);
    let mut bytes = Vec::new();
    for (name, jobs) in [("a.cache", "1"), ("b.cache", "3")] {
        let out = ds.path(name);
        let o = run(&[
            "extract",
            "--manifest",
            ds.manifest.to_str().unwrap(),
            "--gist-resolution",
            "32",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", text(&o.stderr));
        bytes.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

fn extracted(n: usize) -> (common::Synthetic, String) {
    let ds = small(n);
    let cache = ds.path("f.cache");
    let o = run(&[
        "extract",
        "--manifest",
        ds.manifest.to_str().unwrap(),
        "--blocks",
        "color,object",
        "--out",
        cache.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let cache = cache.to_str().unwrap().to_string();
    (ds, cache)
}

#[test]
fn train_defaults_metadata_and_determinism() {
    let (ds, cache) = extracted(12);
    let mut models = Vec::new();
    for name in ["m1", "m2"] {
        let out = ds.path(name);
        let o = run(&[
            "train", "--cache", &cache, "--axis", "arousal", "--hidden", "8", "--epochs", "5", "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", text(&o.stderr));
        let err = text(&o.stderr);
        for line in ["lr=0.0001 (default)", "momentum=0.9 (default)", "batch=1000 (default)"] {
            assert!(err.contains(line), "{err}");
        }
        models.push(std::fs::read(&out).unwrap());
        let meta: Value = serde_json::from_str(&std::fs::read_to_string(ds.path(&format!("{name}.meta.json"))).unwrap()).unwrap();
        assert_eq!(meta["axis"], "arousal");
        assert_eq!(meta["dims"], serde_json::json!([1026, 8, 1]));
        let history = std::fs::read_to_string(ds.path(&format!("{name}.history.csv"))).unwrap();
        assert!(history.starts_with("epoch,train_mse,validation_mse\n"));
    }
    assert_eq!(models[0], models[1]);
    assert_eq!(&models[0][..4], b"AFNN");

    let o = run(&["inspect", "--model", ds.path("m1").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(text(&o.stdout).contains("dims=[1026, 8, 1]"));

    let o = run(&["predict", "--model", ds.path("m1").to_str().unwrap(), "--cache", &cache]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let out = text(&o.stdout);
    assert_eq!(out.lines().count(), 13);
    assert!(out.starts_with("id,arousal\nr0000,"));
}

#[test]
fn train_reports_divergence() {
    let (ds, cache) = extracted(12);
    let o = run(&[
        "train", "--cache", &cache, "--hidden", "8", "--lr", "1e6", "--epochs", "50", "--out",
        ds.path("m").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("diverged at epoch"), "{}", text(&o.stderr));
}

#[test]
fn config_file_env_and_flags() {
    let (ds, cache) = extracted(6);
    let conf = ds.path("afva.conf");
    std::fs::write(&conf, "# training\nlr = 0.002\nmomentum=0.5\nepochs=2\nhidden=4\n").unwrap();
    let o = common::afva()
        .env("AFVA_MOMENTUM", "0.25")
        .args(["train", "--config", conf.to_str().unwrap(), "--cache", &cache, "--epochs", "3", "--out"])
        .arg(ds.path("m"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o.stderr));
    let err = text(&o.stderr);
    assert!(err.contains("lr=0.002 (env)"), "{err}");
    assert!(err.contains("momentum=0.25 (env)"), "{err}");
    assert!(err.contains("epochs=3 (flag)"), "{err}");

    std::fs::write(&conf, "learning_rate=1\n").unwrap();
    let o = run(&["train", "--config", conf.to_str().unwrap(), "--cache", &cache, "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["train", "--cache", &cache, "--out", "x", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cv_five_folds_of_two() {
    let ds = small(10);
    let report = ds.path("cv.json");
    let o = run(&[
        "cv",
        "--manifest",
        ds.manifest.to_str().unwrap(),
        "--blocks",
        "color",
        "--learner",
        "linear",
        "--ridge",
        "0.1",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let folds = r["folds"].as_array().unwrap();
    assert_eq!(folds.len(), 5);
    assert!(folds.iter().all(|f| f["n_test"] == 2 && f["test_mse"].is_f64()));
    assert_eq!(r["k"], 5);
    assert_eq!(r["axis"], "valence");

    let o = run(&["cv", "--manifest", ds.manifest.to_str().unwrap(), "--k", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cv_all_blocks_beat_color_only() {
    let ds = build(&SyntheticSpec {
        n: 400,
        seed: 3,
        label_noise: 0.2,
        ..Default::default()
    });
    let mut mse = Vec::new();
    for blocks in ["all", "color"] {
        let o = run(&[
            "cv",
            "--manifest",
            ds.manifest.to_str().unwrap(),
            "--blocks",
            blocks,
            "--gist-resolution",
            "32",
            "--hidden",
            "32",
            "--lr",
            "3e-6",
            "--batch",
            "16",
            "--epochs",
            "300",
            "--seed",
            "1",
        ]);
        assert!(o.status.success(), "{}", text(&o.stderr));
        let r: Value = serde_json::from_slice(&o.stdout).unwrap();
        mse.push(r["avg_test_mse"].as_f64().unwrap());
    }
    assert!(mse[0] <= mse[1], "{mse:?}");
}

#[test]
fn analyses() {
    let ds = small(10);
    let dict = ds.path("dict.csv");
    write_dictionary(&dict);
    let o = run(&["analyze", "correlate", "--manifest", ds.manifest.to_str().unwrap(), "--dictionary", dict.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((r["r_valence"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((r["r_arousal"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let one = build(&SyntheticSpec { n: 1, ..Default::default() });
    let o = run(&["analyze", "grid", "--manifest", one.manifest.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = text(&o.stdout);
    let cells: std::collections::BTreeSet<(String, String)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<_> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    assert_eq!(cells.len(), 1, "{csv}");

    let out = ds.path("dist.csv");
    let o = run(&["analyze", "dist", "--manifest", ds.manifest.to_str().unwrap(), "--bins", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let total: usize = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 10);
}

#[test]
fn export_labels_from_log() {
    let ds = small(3);
    let log = ds.path("ratings.jsonl");
    let mut lines = String::new();
    for w in 0..5 {
        lines.push_str(&format!(
            "{{\"worker_id\":\"w{w}\",\"image_id\":\"r0001.png\",\"valence\":{},\"arousal\":2,\"timestamp\":1}}\n",
            [4, 5, 6, 5, 5][w]
        ));
    }
    lines.push_str("{\"worker_id\":\"w0\",\"image_id\":\"r0002\",\"valence\":9,\"arousal\":9,\"timestamp\":2}\n");
    lines.push_str("{\"worker_id\":\"w0\",\"image_id\":\"ghost.png\",\"valence\":9,\"arousal\":9,\"timestamp\":2}\n");
    std::fs::write(&log, lines).unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    let out = out_dir.path().join("labeled.jsonl");
    let o = run(&["export-labels", "--manifest", ds.manifest.to_str().unwrap(), "--log", log.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("labeled 1 records; 2 pending; 0 unmatched"), "{}", text(&o.stdout));
    let m = afva_core::Manifest::read(&out).unwrap();
    let label = m.records[1].label.unwrap();
    assert_eq!((label.valence, label.arousal), (5.0, 2.0));
    assert!(m.resolve(&m.records[0].image_path).exists());
}

fn http_get(addr: &str, path: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    let status = resp.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = resp.split("\r\n\r\n").nth(1).unwrap_or("").to_string();
    (status, body)
}

#[cfg(unix)]
#[test]
fn serve_probe_and_sigint() {
    let ds = small(2);
    let log = ds.path("ratings.jsonl");
    let mut child = common::afva()
        .args(["serve", "--listen", "127.0.0.1:0", "--images"])
        .arg(ds.path("images"))
        .arg("--log")
        .arg(&log)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap().to_string();
    let (status, body) = http_get(&addr, "/aggregates");
    assert_eq!(status, 200);
    assert_eq!(body.trim(), "[]");

    let killed = std::process::Command::new("kill")
        .args(["-INT", &child.id().to_string()])
        .status()
        .unwrap();
    assert!(killed.success());
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(ds.path("ratings.jsonl.snapshot.json").exists());
}

#[test]
fn serve_bad_images_path() {
    let ds = small(1);
    let o = run(&["serve", "--listen", "127.0.0.1:0", "--images", ds.path("missing").to_str().unwrap(), "--log", ds.path("l").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("not a directory"));
}

#[test]
fn serve_port_busy() {
    let ds = small(1);
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let o = run(&["serve", "--listen", &addr, "--images", ds.path("images").to_str().unwrap(), "--log", ds.path("l").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("binding"));
}
