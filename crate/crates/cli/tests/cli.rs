use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_christoffel"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn christoffel")
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn json(args: &[&str]) -> Value {
    serde_json::from_slice(&ok(args)).unwrap()
}

fn sample_to(path: &Path, surface: &str, n: usize, seed: u64) {
    ok(&["sample", "--surface", surface, "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", path.to_str().unwrap()]);
}

fn data_rows(bytes: &[u8]) -> Vec<Vec<f64>> {
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let header = text.lines().next().is_some_and(|l| l.starts_with(|c: char| c.is_ascii_alphabetic()));
    text.lines().skip(header as usize).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect()
}

#[test]
fn sample_is_deterministic() {
    let a = ok(&["sample", "--surface", "torus", "--n", "300", "--seed", "5"]);
    let b = ok(&["sample", "--surface", "torus", "--n", "300", "--seed", "5"]);
    let c = ok(&["sample", "--surface", "torus", "--n", "300", "--seed", "6"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn tvscreen_sample_shape() {
    let rows = data_rows(&ok(&["sample", "--surface", "tvscreen", "--n", "20000", "--seed", "1"]));
    assert_eq!(rows.len(), 20000);
    assert!(rows.iter().all(|r| r.len() == 3));
}

#[test]
fn invalid_arguments_exit_2() {
    assert_eq!(run(&["sample", "--surface", "sphere", "--n", "0"]).status.code(), Some(2));
    assert_eq!(run(&["sample", "--surface", "circle", "--p", "3", "--n", "10"]).status.code(), Some(2));
    assert_eq!(run(&["sample", "--surface", "klein", "--n", "10"]).status.code(), Some(2));
}

#[test]
fn rank_curve_selects_surface_dimension() {
    let dir = tempfile::tempdir().unwrap();
    for (surface, dim) in [("sphere", 2), ("cube", 3)] {
        let path = dir.path().join(format!("{surface}.csv"));
        sample_to(&path, surface, 20000, 3);
        let report = json(&["rank-curve", path.to_str().unwrap(), "--degrees", "5..12"]);
        assert_eq!(report["selected_dimension"], dim, "{surface}");
        assert_eq!(report["reliable"], true);
    }
}

#[test]
fn single_point_rank_curve_is_unreliable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    std::fs::write(&path, "x1,x2,x3\n0.1,0.2,0.3\n").unwrap();
    let report = json(&["rank-curve", path.to_str().unwrap(), "--degrees", "1..4"]);
    let ranks: Vec<u64> = report["curve"]["observations"].as_array().unwrap().iter().map(|p| p["rank"].as_u64().unwrap()).collect();
    assert_eq!(ranks, vec![1, 1, 1, 1]);
    assert_eq!(report["reliable"], false);
}

#[test]
fn uniform_circle_density_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("c.csv");
    let grid = dir.path().join("grid.csv");
    sample_to(&cloud, "circle", 50000, 2);
    let report = json(&["density", cloud.to_str().unwrap(), "--surface", "circle", "--degree", "6", "--out", grid.to_str().unwrap()]);
    let lo = report["summary"]["min_value"].as_f64().unwrap();
    let hi = report["summary"]["max_value"].as_f64().unwrap();
    assert!(lo >= 0.8 && hi <= 1.25, "[{lo}, {hi}]");
    let text = std::fs::read_to_string(&grid).unwrap();
    assert!(text.lines().next().unwrap().contains("density"));
    assert_eq!(text.lines().count(), 513);
}

#[test]
fn embedded_angles_match_points() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("c.csv");
    sample_to(&cloud, "circle", 5000, 4);
    let points = data_rows(&std::fs::read(&cloud).unwrap());
    let angles: String = points.iter().map(|r| format!("{:.17e}\n", r[1].atan2(r[0]))).collect();
    let angle_path = dir.path().join("a.csv");
    std::fs::write(&angle_path, format!("theta\n{angles}")).unwrap();
    let out_a = dir.path().join("ga.csv");
    let out_b = dir.path().join("gb.csv");
    ok(&["density", cloud.to_str().unwrap(), "--surface", "circle", "--degree", "5", "--out", out_a.to_str().unwrap()]);
    ok(&["density", angle_path.to_str().unwrap(), "--embed", "circle", "--degree", "5", "--out", out_b.to_str().unwrap()]);
    let a = data_rows(&std::fs::read(&out_a).unwrap());
    let b = data_rows(&std::fs::read(&out_b).unwrap());
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(&b) {
        for (x, y) in ra.iter().zip(rb) {
            assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }
}

#[test]
fn off_surface_density_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("cube.csv");
    sample_to(&cloud, "cube", 500, 1);
    let out = run(&["density", cloud.to_str().unwrap(), "--surface", "sphere"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("membership residual"));
}

#[test]
fn perturbation_deviation_grows_with_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("c.csv");
    sample_to(&cloud, "circle", 20000, 9);
    let args = ["perturb", cloud.to_str().unwrap(), "--degree", "4", "--grid", "24", "--seed", "3"];
    let mut with_sigmas = args.to_vec();
    with_sigmas.extend(["--sigmas", "0.2,0.1,0.05,0.01"]);
    let report = json(&with_sigmas);
    let dev: Vec<f64> = report["levels"].as_array().unwrap().iter().map(|l| l["deviation"].as_f64().unwrap()).collect();
    assert!(dev.windows(2).all(|w| w[1] < w[0]), "{dev:?}");

    let mut zero = args.to_vec();
    zero.extend(["--sigmas", "0"]);
    let report = json(&zero);
    assert_eq!(report["levels"][0]["deviation"].as_f64().unwrap(), 0.0);

    let mut empty = args.to_vec();
    empty.extend(["--sigmas", ""]);
    assert_eq!(run(&empty).status.code(), Some(2));
}

#[test]
fn perturb_out_dir_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("s.csv");
    sample_to(&cloud, "circle", 2000, 1);
    let out = dir.path().join("sweep");
    ok(&["perturb", cloud.to_str().unwrap(), "--sigmas", "0.1,0.01", "--degree", "3", "--grid", "8", "--out-dir", out.to_str().unwrap()]);
    for f in ["reference.csv", "level_00.csv", "level_01.csv", "summary.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert_eq!(data_rows(&std::fs::read(out.join("level_01.csv")).unwrap()).len(), 64);
}

#[test]
fn malformed_csv_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "1,2,3\n4,5\n").unwrap();
    let out = run(&["rank-curve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let missing = run(&["rank-curve", dir.path().join("nope.csv").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn sequential_and_thread_count_do_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("t.csv");
    sample_to(&cloud, "torus", 6000, 2);
    let args = ["rank-curve", cloud.to_str().unwrap(), "--degrees", "2..7"];
    let parallel = ok(&args);
    let mut seq = vec!["--sequential"];
    seq.extend(args);
    assert_eq!(ok(&seq), parallel);
    let one = bin().args(args).env("CHRISTOFFEL_THREADS", "1").output().unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, parallel);
    let bad = bin().args(args).env("CHRISTOFFEL_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn christoffel_eval_from_csv_and_cache_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("s.csv");
    let cache = dir.path().join("m.cmom");
    sample_to(&cloud, "sphere", 4000, 5);
    let pts = ["--x", "0,0,1", "--x", "0.6,0.8,0", "--x", "0.1,0.1,0.1"];
    let mut from_csv = vec!["christoffel-eval", cloud.to_str().unwrap(), "--degree", "3", "--save-moments", cache.to_str().unwrap()];
    from_csv.extend(pts);
    let a = json(&from_csv);
    let mut from_cache = vec!["christoffel-eval", "--moments", cache.to_str().unwrap(), "--degree", "3"];
    from_cache.extend(pts);
    let b = json(&from_cache);
    assert_eq!(a["points"], b["points"]);
    let points = a["points"].as_array().unwrap();
    assert_eq!(points[0]["on_support"], true);
    assert_eq!(points[2]["on_support"], false);
    assert_eq!(points[2]["lambda"].as_f64().unwrap(), 0.0);
    let prod = points[0]["lambda"].as_f64().unwrap() * points[0]["kappa"].as_f64().unwrap();
    assert!((prod - 1.0).abs() < 1e-8);
}

#[test]
fn sampled_files_feed_every_command() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("b.csv");
    sample_to(&cloud, "bitorus", 3000, 8);
    let c = cloud.to_str().unwrap();
    ok(&["rank-curve", c, "--degrees", "1..3"]);
    ok(&["density", c, "--surface", "bitorus", "--degree", "2", "--grid", "6x6"]);
    ok(&["perturb", c, "--sigmas", "0.05", "--degree", "2", "--grid", "3"]);
    ok(&["christoffel-eval", c, "--degree", "2", "--x", "1,0,0,1", "--format", "csv"]);
}
