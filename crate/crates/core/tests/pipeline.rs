use proptest::prelude::*;
use skewscan_core::attack::{
    pgd_attack, smoothness, AttackConfig, AttackProblem, PerturbMode, Perturbation, Regularizer,
};
use skewscan_core::autodiff::Tape;
use skewscan_core::detector::{DetectorConfig, Detection};
use skewscan_core::geometry::interpolate_track;
use skewscan_core::metrics::{average_precision, evaluate, EvalConfig, Scored};
use skewscan_core::scene::{generate_scene, generate_trajectory, raycast_sweep, Extents, SensorModel};
use skewscan_core::sweep::{compensate, distort, partition_packets, sweep_as_function};
use skewscan_core::{Pose, Quat, Sweep};

struct Fixture {
    distorted: Sweep,
    track: skewscan_core::InterpolatedTrack,
    labels: Vec<skewscan_core::detector::Box3D>,
}

fn fixture(seed: u64, steps: usize) -> Fixture {
    let scene = generate_scene(seed, 4, Extents { min_range: 8.0, max_range: 30.0 }).unwrap();
    let (a, b) = generate_trajectory(seed, 10.0, 0.5, 0.01).unwrap();
    let track = interpolate_track(&a, &b, steps).unwrap();
    let sensor = SensorModel { rays_per_degree: 2, ..SensorModel::uniform(16, -20.0, 2.0) };
    let (distorted, labels) = raycast_sweep(&scene, &track, &sensor).unwrap();
    Fixture { distorted, track, labels }
}

fn quat() -> impl Strategy<Value = Quat> {
    prop::array::uniform4(-1.0..1.0f64)
        .prop_filter("non-degenerate", |v| v.iter().map(|x| x * x).sum::<f64>() > 0.01)
        .prop_map(|v| Quat::new(v[0], v[1], v[2], v[3]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compensate_inverts_distort(
        qa in quat(), qb in quat(),
        ta in prop::array::uniform3(-50.0..50.0f64), tb in prop::array::uniform3(-50.0..50.0f64),
        pts in prop::collection::vec(prop::array::uniform3(-60.0..60.0f64), 0..300),
        steps in 2usize..150,
    ) {
        let a = Pose::new(ta, qa).unwrap();
        let b = Pose::new(tb, qb).unwrap();
        let track = interpolate_track(&a, &b, steps).unwrap();
        let sweep = partition_packets(&pts, None, steps, 0.0).unwrap();
        let back = compensate(&distort(&sweep, &track).unwrap(), &track, None).unwrap();
        prop_assert_eq!(back.packet_counts(), sweep.packet_counts());
        for (p, q) in sweep.points().zip(back.points()) {
            for k in 0..3 {
                prop_assert!((p[k] - q[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn taped_compensation_matches_numeric(seed in 0u64..20, scale in 0.0..1.0f64) {
        let f = fixture(seed, 20);
        let mut d = Perturbation::zeros(PerturbMode::Full, 20);
        for (n, (t, r)) in d.t_tilde.iter_mut().zip(&mut d.r_tilde).enumerate() {
            let s = scale * ((n as f64) * 0.7).sin();
            *t = [0.1 * s, -0.05 * s, 0.02 * s];
            r[0][1] = 0.01 * s;
            r[2][2] = -0.005 * s;
        }
        let numeric = compensate(&f.distorted, &f.track, Some(&d)).unwrap();
        let mut tape = Tape::new();
        let vars = d.to_tape(&mut tape);
        let taped = sweep_as_function(&f.distorted, &f.track, &vars, &mut tape).unwrap();
        prop_assert_eq!(taped.values(&tape), numeric.flat_points());
    }
}

#[test]
fn attack_respects_budget_and_mode() {
    let f = fixture(3, 30);
    let det = DetectorConfig::default();
    let problem = AttackProblem { distorted: &f.distorted, track: &f.track, labels: &f.labels, detector: &det };
    for mode in [PerturbMode::Translation, PerturbMode::Rotation, PerturbMode::Full, PerturbMode::Polynomial] {
        let cfg = AttackConfig { mode, iters: 5, ..AttackConfig::default() };
        let out = pgd_attack(problem, &cfg).unwrap();
        let d = &out.perturbation;
        assert_eq!(d.len(), 30);
        assert_eq!(out.trace.loss.len(), 6);
        assert!(d.max_abs_t() <= cfg.eps_t + 1e-12, "{mode:?}");
        assert!(d.max_abs_r() <= cfg.eps_r + 1e-12, "{mode:?}");
        if !mode.moves_rotation() {
            assert_eq!(d.max_abs_r(), 0.0, "{mode:?}");
        }
        if !mode.moves_translation() {
            assert_eq!(d.max_abs_t(), 0.0, "{mode:?}");
        }
    }
}

#[test]
fn attack_is_deterministic_and_lowers_the_loss() {
    let f = fixture(5, 40);
    let det = DetectorConfig::default();
    let problem = AttackProblem { distorted: &f.distorted, track: &f.track, labels: &f.labels, detector: &det };
    let cfg = AttackConfig { iters: 10, ..AttackConfig::default() };
    let a = pgd_attack(problem, &cfg).unwrap();
    let b = pgd_attack(problem, &cfg).unwrap();
    assert_eq!(a, b);
    let first = a.trace.loss[0];
    let best = a.trace.loss.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(best < first, "{:?}", a.trace.loss);
}

#[test]
fn polynomial_offsets_are_smoother_than_discrete() {
    let f = fixture(7, 50);
    let det = DetectorConfig::default();
    let problem = AttackProblem { distorted: &f.distorted, track: &f.track, labels: &f.labels, detector: &det };
    let run = |mode| pgd_attack(problem, &AttackConfig { mode, iters: 8, ..AttackConfig::default() }).unwrap();
    let s_poly = smoothness(&run(PerturbMode::Polynomial).perturbation, 1.0, 1.0, 2.0);
    let s_disc = smoothness(&run(PerturbMode::Translation).perturbation, 1.0, 1.0, 2.0);
    assert!(s_poly < s_disc, "{s_poly} vs {s_disc}");
}

#[test]
fn smoothness_regularizer_reduces_variation() {
    // With alpha equal to eps every sign step jumps between budget vertices,
    // so the penalty needs a finer step to act.
    let f = fixture(2, 40);
    let det = DetectorConfig::default();
    let problem = AttackProblem { distorted: &f.distorted, track: &f.track, labels: &f.labels, detector: &det };
    let base = AttackConfig { mode: PerturbMode::Translation, iters: 20, alpha_t: 0.01, ..AttackConfig::default() };
    let plain = pgd_attack(problem, &base).unwrap().perturbation;
    let reg = AttackConfig { regularizer: Regularizer::Smoothness, lambda_s: 100.0, ..base };
    let smooth = pgd_attack(problem, &reg).unwrap().perturbation;
    let (a, b) = (smoothness(&smooth, 1.0, 1.0, 2.0), smoothness(&plain, 1.0, 1.0, 2.0));
    assert!(a <= b, "{a} vs {b}");
}

#[test]
fn evaluation_of_perfect_detections() {
    let f = fixture(1, 10);
    let dets: Vec<Detection> = f.labels.iter().map(|b| Detection { bbox: *b, score: 0.9 }).collect();
    assert_eq!(average_precision(&dets, &f.labels, 0.7).ap, 1.0);
    let counts = vec![50; f.labels.len()];
    let report = evaluate(
        &[Scored { dets: &dets, gts: &f.labels, gt_points: &counts, det_points: &counts }],
        &EvalConfig::default(),
    );
    assert_eq!(report.ap("all"), Some(1.0));
    assert_eq!(report.per_scene_ap, vec![1.0]);
}
