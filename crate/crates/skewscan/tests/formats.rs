use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skewscan::config::RunConfig;
use skewscan::io::{format_poses, parse_poses, read_points, sidecar_path, write_points};
use skewscan::Error;
use skewscan_core::attack::{PerturbMode, Regularizer};
use skewscan_core::geometry::interpolate_track;
use skewscan_core::scene::{generate_scene, generate_trajectory, raycast_sweep, Extents, SensorModel};
use skewscan_core::{Pose, Quat, Sweep};

fn random_poses(rng: &mut ChaCha8Rng, n: usize) -> Vec<Pose> {
    let mut stamp = rng.random_range(-10.0..10.0);
    (0..n)
        .map(|_| {
            stamp += rng.random_range(1e-6..0.5);
            let q = Quat::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            Pose::new([rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3), rng.random_range(-5.0..5.0)], q)
                .unwrap()
                .with_stamp(stamp)
        })
        .collect()
}

#[test]
fn pose_text_round_trip_is_bitwise_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let poses = random_poses(&mut rng, 1000);
    let text = format_poses(&poses).unwrap();
    let back = parse_poses(&text, Path::new("p.txt")).unwrap();
    assert_eq!(back, poses);
    assert_eq!(format_poses(&back).unwrap(), text);
}

#[test]
fn pose_writer_rejects_unordered_stamps() {
    let p = Pose::identity();
    assert!(format_poses(&[p.with_stamp(1.0), p.with_stamp(1.0)]).is_err());
    assert!(format_poses(&[p]).is_err());
}

fn raycast() -> Sweep {
    let scene = generate_scene(9, 5, Extents::default()).unwrap();
    let (a, b) = generate_trajectory(9, 10.0, 0.5, 0.01).unwrap();
    let track = interpolate_track(&a, &b, 64).unwrap();
    raycast_sweep(&scene, &track, &SensorModel::default()).unwrap().0
}

fn narrowed(s: &Sweep) -> Sweep {
    let pts: Vec<[f64; 3]> = s.points().map(|p| p.map(|v| v as f32 as f64)).collect();
    s.with_points(&pts).unwrap()
}

#[test]
fn point_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.bin");
    let sweep = raycast();
    write_points(&sweep, &path).unwrap();
    let back = read_points(&path, None).unwrap();
    assert_eq!(back, narrowed(&sweep));
    let bytes = std::fs::read(&path).unwrap();
    write_points(&back, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(bytes.len(), 16 * sweep.len());
}

#[test]
fn empty_point_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.bin");
    std::fs::write(&path, []).unwrap();
    std::fs::write(sidecar_path(&path), "0\n0\n0\n0\n").unwrap();
    let s = read_points(&path, None).unwrap();
    assert!(s.is_empty());
    assert_eq!(s.packets.len(), 4);
}

#[test]
fn truncated_point_file_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.bin");
    write_points(&raycast(), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
    let err = read_points(&path, None).unwrap_err();
    assert!(matches!(err, Error::Format { .. }));
    assert_eq!(err.exit_code(), 2);
    let msg = err.to_string();
    assert!(msg.contains(&format!("expected {} bytes", bytes.len())), "{msg}");
    assert!(msg.contains(&format!("found {}", bytes.len() - 5)), "{msg}");
}

#[test]
fn missing_sidecar_falls_back_to_azimuth_sectors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.bin");
    let sweep = raycast();
    write_points(&sweep, &path).unwrap();
    std::fs::remove_file(sidecar_path(&path)).unwrap();
    assert!(matches!(read_points(&path, None).unwrap_err(), Error::Io { .. }));
    let s = read_points(&path, Some(8)).unwrap();
    assert_eq!(s.packets.len(), 8);
    assert_eq!(s.len(), sweep.len());
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    let mut cfg = RunConfig { seed: 42, steps: 250, ..RunConfig::default() };
    cfg.attack.mode = PerturbMode::Polynomial;
    cfg.attack.regularizer = Regularizer::Chamfer;
    cfg.attack.lambda_d = 0.1;
    cfg.detector.yaw_set = vec![0.0, 0.3, 1.1];
    cfg.eval.depth_edges = vec![0.0, 20.0, 40.0];
    cfg.save(&path).unwrap();
    let back = RunConfig::load(&path).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.to_toml().unwrap(), cfg.to_toml().unwrap());
}

#[test]
fn config_rejects_bad_types() {
    let e = RunConfig::parse("steps = \"many\"\n", Path::new("c.toml")).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let cfg = RunConfig::parse("steps = 0\n", Path::new("c.toml")).unwrap();
    assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
}
