use std::path::Path;
use std::process::{Command, Output};

use accel_contours::io::{read_curve_csv, read_lsf, read_pgm, read_run_log};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_accel-contours"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scene_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.pgm"), dir.path().join("b.pgm"));
    for p in [&a, &b] {
        let o = run(&["scene", "--kind", "noisy-rectangle", "--seed", "7", "--out", path_str(p)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let img = read_pgm(&a).unwrap();
    assert_eq!((img.width(), img.height()), (256, 256));
}

#[test]
fn ascii_scene_matches_binary() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.pgm"), dir.path().join("b.pgm"));
    assert_eq!(code(&run(&["scene", "--size", "64", "--out", path_str(&a)])), 0);
    assert_eq!(code(&run(&["scene", "--size", "64", "--ascii", "--out", path_str(&b)])), 0);
    assert_eq!(read_pgm(&a).unwrap(), read_pgm(&b).unwrap());
}

#[test]
fn verify_lists_every_check() {
    let o = run(&["verify"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{text}");
}

#[test]
fn usage_errors_exit_2() {
    let missing = run(&["segment", "--config", "missing.json"]);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing.json"));
    assert_eq!(code(&run(&["segment", "--bogus"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["scene", "--size", "32", "--out", "never.pgm"])), 2);
    assert_eq!(code(&run(&["segment", "--method", "sobolev", "--backend", "levelset"])), 2);
    assert_eq!(code(&run(&["segment", "--init", "{\"shape\":\"blob\"}"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"input\": 3}").unwrap();
    assert_eq!(code(&run(&["segment", "--config", path_str(&bad)])), 2);
}

#[test]
fn unreadable_image_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("cut.pgm");
    std::fs::write(&img, b"P5\n4 4\n255\n\x01\x02").unwrap();
    let o = run(&["segment", "--input", path_str(&img), "--out", path_str(dir.path())]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("offset"));
}

fn write_config(dir: &Path, backend: &str) -> std::path::PathBuf {
    let cfg = dir.join("run.json");
    let text = format!(
        r#"{{
            "input": {{"scene": {{"kind": "disk", "size": 64, "noise_std": 0.1, "seed": 3}}}},
            "method": "accel-const",
            "backend": "{backend}",
            "flow": {{"max_steps": 20, "tau_noise": 0.02, "seed": 5}},
            "init": {{"shape": "circle", "center": [32, 32], "radius": 20}},
            "outputs": "{}"
        }}"#,
        path_str(&dir.join("out"))
    );
    std::fs::write(&cfg, text).unwrap();
    cfg
}

#[test]
fn segment_outputs_parse_back() {
    for backend in ["parametric", "levelset"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), backend);
        let o = run(&["segment", "--config", path_str(&cfg)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let out = dir.path().join("out");
        let log = read_run_log(&out.join("log.csv")).unwrap();
        assert_eq!(log.len(), 20);
        assert!(read_curve_csv(&out.join("contour.csv")).unwrap().len() > 10);
        let svg = std::fs::read_to_string(out.join("overlay.svg")).unwrap();
        assert!(svg.contains("<polyline"));
        if backend == "levelset" {
            let (psi, step) = read_lsf(&out.join("psi.lsf")).unwrap();
            assert_eq!((psi.width(), psi.height(), step), (64, 64, 20));
            assert_eq!(read_pgm(&out.join("psi.pgm")).unwrap().width(), 64);
        }
    }
}

#[test]
fn flags_override_the_config_and_runs_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "levelset");
    let mut logs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(&["segment", "--config", path_str(&cfg), "--steps", "7", "--out", path_str(&out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        logs.push(std::fs::read(out.join("log.csv")).unwrap());
    }
    assert_eq!(logs[0], logs[1]);
    assert_eq!(String::from_utf8_lossy(&logs[0]).lines().count(), 8);
}

#[test]
fn oracle_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let o = run(&["oracle", "--samples", "50", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,r,beta,rho"));
    let radii: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(radii.len(), 50);
    assert!(radii.windows(2).all(|w| w[1] < w[0]), "constant inward force shrinks the circle");
    assert_eq!(code(&run(&["oracle", "--t-end", "0.5", "--out", path_str(&out)])), 2);
}

#[test]
fn compare_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = run(&["compare", "--backend", "parametric", "--steps", "5", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("init,method,backend,energy,steps,stop\n"));
    assert_eq!(text.lines().count(), 7);
}
