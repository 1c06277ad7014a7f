use dqloam::dq::UnitDualQuaternion;
use dqloam::io::StampedPose;
use dqloam::pipeline::{Odometry, PipelineConfig};
use dqloam::synth::{box_room_scene, corridor_loop_scene, SyntheticScene};

fn drift(pose: &UnitDualQuaternion) -> (f64, f64) {
    let r = pose.to_rigid();
    (r.translation.norm(), r.angle().to_degrees())
}

#[test]
fn replayed_scan_gives_identity_motion() {
    let room = box_room_scene(1, 0.0, 0);
    let still: Vec<StampedPose> = (0..2)
        .map(|k| StampedPose {
            time: 0.1 * k as f64,
            pose: UnitDualQuaternion::IDENTITY,
        })
        .collect();
    let mut scene = SyntheticScene::new(room.planes.clone(), still);
    scene.sensor = room.sensor.clone();
    let scans = scene.generate().unwrap();
    let mut odo = Odometry::new(PipelineConfig::default());
    for (scan, truth) in &scans {
        odo.process_scan(&scan.cloud, truth.time).unwrap();
    }
    for p in odo.trajectory() {
        let (t, deg) = drift(&p.pose);
        assert!(t < 1e-4 && deg < 0.005, "drifted {t} m, {deg} deg at t={}", p.time);
    }
}

#[test]
fn box_room_relative_motion_is_tracked() {
    let scans = box_room_scene(10, 0.01, 3).generate().unwrap();
    let mut odo = Odometry::new(PipelineConfig::default());
    for (scan, truth) in &scans {
        odo.process_scan(&scan.cloud, truth.time).unwrap();
    }
    let est = odo.trajectory();
    let mut worst = 0.0f64;
    for k in 1..scans.len() {
        let truth = scans[k - 1].1.pose.inverse() * scans[k].1.pose;
        let step = est[k - 1].pose.inverse() * est[k].pose;
        worst = worst.max(drift(&(truth.inverse() * step)).0);
    }
    assert!(worst < 0.02, "worst relative step error {worst} m");
}

/// Per-scan relative motion error over the 100-scan corridor loop.
#[test]
fn corridor_relative_error() {
    let scans = corridor_loop_scene(100, 200.0 / (2.0 * std::f64::consts::PI), 0.01, 7).generate().unwrap();
    let mut odo = Odometry::new(PipelineConfig::default());
    for (scan, truth) in &scans {
        odo.process_scan(&scan.cloud, truth.time).unwrap();
    }
    let est = odo.trajectory();
    let (mut sum_t, mut sum_r, mut max_t, mut max_r, mut worst) = (0.0, 0.0, 0.0f64, 0.0f64, 0);
    for k in 1..scans.len() {
        let truth = scans[k - 1].1.pose.inverse() * scans[k].1.pose;
        let step = est[k - 1].pose.inverse() * est[k].pose;
        let (t, deg) = drift(&(truth.inverse() * step));
        sum_t += t;
        sum_r += deg;
        if t > max_t {
            worst = k;
        }
        max_t = max_t.max(t);
        max_r = max_r.max(deg);
    }
    let n = (scans.len() - 1) as f64;
    let (mean_t, mean_r) = (sum_t / n, sum_r / n);
    println!("mean {mean_t:.4} m {mean_r:.4} deg, max {max_t:.4} m at scan {worst}, {max_r:.4} deg");
    assert!(mean_t < 0.01 && mean_r < 0.05, "mean {mean_t} m {mean_r} deg, max {max_t} m {max_r} deg");
}
