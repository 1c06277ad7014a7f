use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn dqloam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqloam"))
        .args(args)
        .env_remove("DQLOAM_LOG")
        .output()
        .expect("spawn dqloam")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn lines(p: &Path) -> usize {
    fs::read_to_string(p).unwrap().lines().count()
}

fn run_fixture(out: &Path, extra: &[&str]) -> Output {
    let scene = fixture("box_room.scene");
    let cfg = fixture("fixture.cfg");
    let mut args = vec!["run", "--input", s(&scene), "--format", "synthetic", "--config", s(&cfg), "--output", s(out)];
    args.extend_from_slice(extra);
    dqloam(&args)
}

#[test]
fn missing_input_is_a_usage_error() {
    let o = dqloam(&["run", "--format", "kitti-bin", "--output", "/tmp/unused"]);
    assert_eq!(code(&o), 64);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn bad_format_threads_and_log_level_are_usage_errors() {
    let scene = fixture("box_room.scene");
    assert_eq!(code(&dqloam(&["run", "--input", s(&scene), "--format", "pcd", "--output", "/tmp/unused"])), 64);
    assert_eq!(code(&dqloam(&["--threads", "0", "synth", "--scene", s(&scene), "--output", "/tmp/unused"])), 64);
    let o = Command::new(env!("CARGO_BIN_EXE_dqloam"))
        .args(["synth", "--scene", s(&scene), "--output", "/tmp/unused"])
        .env("DQLOAM_LOG", "trace")
        .output()
        .unwrap();
    assert_eq!(code(&o), 64);
}

#[test]
fn unreadable_input_exits_66() {
    let dir = tempfile::tempdir().unwrap();
    let o = dqloam(&["run", "--input", "/nonexistent/scans", "--format", "kitti-bin", "--output", s(dir.path())]);
    assert_eq!(code(&o), 66);
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = dqloam(&["run", "--input", s(&empty), "--format", "kitti-bin", "--output", s(&dir.path().join("out"))]);
    assert_eq!(code(&o), 66);
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let scene = fixture("box_room.scene");
    let cfg = fixture("unknown_key.cfg");
    let o = dqloam(&["run", "--input", s(&scene), "--format", "synthetic", "--config", s(&cfg), "--output", s(dir.path())]);
    assert_eq!(code(&o), 78);
    assert!(stderr(&o).contains("\"std_windw\""), "{}", stderr(&o));
}

#[test]
fn fixture_run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run_fixture(&out, &["--export-maps"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(lines(&out.join("trajectory_kitti.txt")), 20);
    assert_eq!(lines(&out.join("trajectory_tum.txt")), 20);
    let timing = fs::read_to_string(out.join("timing.csv")).unwrap();
    assert_eq!(timing.lines().next(), Some("scan_index,preproc_ms,descriptor_ms,solve_ms,total_ms"));
    assert_eq!(timing.lines().count(), 21);
    let dense = fs::read_to_string(out.join("dense_map.xyz")).unwrap();
    assert!(dense.lines().count() > 100);
    assert!(dense.lines().all(|l| l.split_whitespace().count() == 3));
    let stds = fs::read_to_string(out.join("std_map.txt")).unwrap();
    assert!(stds.lines().count() > 0);
    assert!(stds.lines().all(|l| l.split_whitespace().count() == 24));
    for l in fs::read_to_string(out.join("trajectory_kitti.txt")).unwrap().lines() {
        assert_eq!(l.split_whitespace().count(), 12);
    }
}

#[test]
fn single_thread_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run_fixture(out, &["--export-maps", "--threads", "1", "--seed", "7"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for name in ["trajectory_kitti.txt", "trajectory_tum.txt", "timing.csv", "dense_map.xyz", "std_map.txt"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn synth_is_deterministic_and_feeds_run_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let scene = fixture("corridor.scene");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = dqloam(&["--seed", "7", "synth", "--scene", s(&scene), "--output", s(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for name in ["times.txt", "groundtruth_kitti.txt", "groundtruth_tum.txt", "velodyne/000000.bin", "velodyne/000019.bin"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_eq!(fs::read_dir(a.join("velodyne")).unwrap().count(), 20);

    let run = dir.path().join("run");
    let o = dqloam(&["run", "--input", s(&a.join("velodyne")), "--format", "kitti-bin", "--output", s(&run)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = dqloam(&["eval", "--traj", s(&run.join("trajectory_tum.txt")), "--gt", s(&a.join("groundtruth_kitti.txt"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let machine = stdout(&o).lines().last().unwrap().to_string();
    let rmse: f64 = machine.rsplit("rmse_m=").next().unwrap().parse().unwrap();
    // 38 m of corridor; a few centimeters of accumulated error is expected.
    assert!(rmse < 0.2, "{machine}");
}

#[test]
fn unobservable_scene_exits_65() {
    let dir = tempfile::tempdir().unwrap();
    let o = dqloam(&["synth", "--scene", s(&fixture("two_planes.scene")), "--output", s(dir.path())]);
    assert_eq!(code(&o), 65);
    assert!(stderr(&o).contains("unobservable"), "{}", stderr(&o));
}

#[test]
fn identical_trajectories_evaluate_to_zero() {
    let gt = fixture("drift_gt.txt");
    let o = dqloam(&["eval", "--traj", s(&gt), "--gt", s(&gt)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().last(), Some("ate_pct=0.000000 are_deg_per_100m=0.000000 rmse_m=0.000000"));
}

/// Ground truth steps 1 m along x; the estimate steps 1.01 m.
#[test]
fn injected_drift_matches_golden_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let o = dqloam(&[
        "eval",
        "--traj",
        s(&fixture("drift_est.txt")),
        "--gt",
        s(&fixture("drift_gt.txt")),
        "--plot-data",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let golden = include_str!("golden/eval_drift.txt");
    assert_eq!(out.lines().last(), golden.lines().next());

    // A segment from frame f covering `len` meters ends at f + len + 1, so its
    // error is 0.01 (len + 1) / len.
    let n = 900usize;
    let mut errs = Vec::new();
    for first in (0..n).step_by(10) {
        for len in (1..=8).map(|k| 100 * k) {
            if first + len + 1 < n {
                errs.push(0.01 * (len + 1) as f64 / len as f64);
            }
        }
    }
    let ate = 100.0 * errs.iter().sum::<f64>() / errs.len() as f64;
    let rmse = (0..n).map(|k| (0.01 * k as f64).powi(2)).sum::<f64>() / n as f64;
    assert_eq!(golden.trim(), format!("ate_pct={ate:.6} are_deg_per_100m=0.000000 rmse_m={:.6}", rmse.sqrt()));

    let xy = fs::read_to_string(dir.path().join("trajectory_xy.csv")).unwrap();
    assert_eq!(xy.lines().next(), Some("x,y"));
    assert_eq!(xy.lines().count(), n + 1);
    assert_eq!(lines(&dir.path().join("groundtruth_xy.csv")), n + 1);
}

#[test]
fn eval_without_association_exits_65() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    fs::write(&a, "0 0 0 0 0 0 0 1\n0.1 1 0 0 0 0 0 1\n").unwrap();
    fs::write(&b, "50 0 0 0 0 0 0 1\n50.1 1 0 0 0 0 0 1\n50.2 2 0 0 0 0 0 1\n").unwrap();
    let o = dqloam(&["eval", "--traj", s(&a), "--gt", s(&b)]);
    assert_eq!(code(&o), 65, "{}", stderr(&o));
}

#[test]
fn corrupt_scan_mid_sequence_exits_2_with_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    let o = dqloam(&["synth", "--scene", s(&fixture("box_room.scene")), "--output", s(&seq)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let scans = seq.join("velodyne");
    for k in 4..20 {
        fs::remove_file(scans.join(format!("{k:06}.bin"))).unwrap();
    }
    fs::write(scans.join("000003.bin"), [0u8; 5]).unwrap();
    let out = dir.path().join("run");
    let o = dqloam(&["run", "--input", s(&scans), "--format", "kitti-bin", "--output", s(&out)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("scan 3"), "{}", stderr(&o));
    assert_eq!(lines(&out.join("trajectory_kitti.txt")), 3);
    assert_eq!(lines(&out.join("timing.csv")), 4);
}

#[test]
fn dump_descriptors_prints_24_numbers_per_line() {
    let o = dqloam(&["dump-descriptors", "--input", s(&fixture("box_room.scene")), "--format", "synthetic", "--scan", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().count() > 0);
    for l in out.lines() {
        assert_eq!(l.split_whitespace().count(), 24, "{l}");
    }
    let o = dqloam(&["dump-descriptors", "--input", s(&fixture("box_room.scene")), "--format", "synthetic", "--scan", "20"]);
    assert_eq!(code(&o), 64);
}
