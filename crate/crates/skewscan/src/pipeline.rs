//! Scene simulation and attack/evaluation runs over seeded scene suites.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use skewscan_core::attack::{
    chamfer, coordinate_attack, lp_distance, random_attack, run_attack, smoothness, AttackConfig,
    AttackProblem, LossTrace, Perturbation, RandomKind, RandomPerturbation,
};
use skewscan_core::detector::{detect, Box3D, Detection, DetectorConfig};
use skewscan_core::geometry::interpolate_track;
use skewscan_core::metrics::{count_points_in_box, evaluate, EvalConfig, EvalReport, RegularizerStats, Scored};
use skewscan_core::scene::{generate_scene, generate_trajectory, raycast_sweep, Extents, Scene, SensorModel};
use skewscan_core::sweep::compensate;
use skewscan_core::{InterpolatedTrack, Pose, Sweep};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// m/s
    pub speed: f64,
    /// Keyframe spacing, s.
    pub duration: f64,
    /// 1/m
    pub curvature: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self { speed: 10.0, duration: 0.5, curvature: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub vehicles: usize,
    pub extents: Extents,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { vehicles: 8, extents: Extents::default() }
    }
}

/// Everything produced for one seeded scene.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub seed: u64,
    pub scene: Scene,
    pub keyframes: (Pose, Pose),
    pub track: InterpolatedTrack,
    /// Raw sweep in capture frames.
    pub distorted: Sweep,
    /// Ground truth in keyframe A.
    pub labels: Vec<Box3D>,
    /// Compensated sweep without perturbation.
    pub clean: Sweep,
}

impl Simulation {
    pub fn problem<'a>(&'a self, detector: &'a DetectorConfig) -> AttackProblem<'a> {
        AttackProblem { distorted: &self.distorted, track: &self.track, labels: &self.labels, detector }
    }
}

pub fn simulate(
    seed: u64,
    scene: &SceneConfig,
    sensor: &SensorModel,
    trajectory: &TrajectoryConfig,
    steps: usize,
) -> Result<Simulation> {
    let world = generate_scene(seed, scene.vehicles, scene.extents)?;
    let (a, b) = generate_trajectory(seed, trajectory.speed, trajectory.duration, trajectory.curvature)?;
    let track = interpolate_track(&a, &b, steps)?;
    let (distorted, labels) = raycast_sweep(&world, &track, sensor)?;
    let clean = compensate(&distorted, &track, None)?;
    Ok(Simulation { seed, scene: world, keyframes: (a, b), track, distorted, labels, clean })
}

/// What to do to a scene before detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AttackSpec {
    Clean,
    Random { noise: RandomKind, sigma_t: f64, sigma_r: f64, config: AttackConfig },
    Flat(AttackConfig),
    Coordinate(AttackConfig),
}

/// Result of attacking and scoring one scene.
#[derive(Debug, Clone)]
pub struct SceneOutcome {
    pub seed: u64,
    /// Compensated sweep fed to the detector.
    pub attacked: Sweep,
    pub detections: Vec<Detection>,
    pub gt_points: Vec<usize>,
    pub det_points: Vec<usize>,
    pub perturbation: Option<Perturbation>,
    pub trace: Option<LossTrace>,
    pub regularizer: RegularizerStats,
}

pub fn attacked_sweep(
    sim: &Simulation,
    spec: &AttackSpec,
    detector: &DetectorConfig,
) -> Result<(Sweep, Option<Perturbation>, Option<LossTrace>)> {
    let problem = sim.problem(detector);
    Ok(match spec {
        AttackSpec::Clean => (sim.clean.clone(), None, None),
        AttackSpec::Random { noise, sigma_t, sigma_r, config } => {
            let cfg = AttackConfig { seed: config.seed ^ sim.seed, ..config.clone() };
            let r = random_attack(*noise, sim.track.len(), sim.clean.len(), *sigma_t, *sigma_r, &cfg)?;
            let swept = r.apply(&problem)?;
            let pert = match r {
                RandomPerturbation::Trajectory(d) => Some(d),
                RandomPerturbation::Points(_) => None,
            };
            (swept, pert, None)
        }
        AttackSpec::Flat(cfg) => {
            let out = run_attack(problem, cfg)?;
            let swept = compensate(&sim.distorted, &sim.track, Some(&out.perturbation))?;
            (swept, Some(out.perturbation), Some(out.trace))
        }
        AttackSpec::Coordinate(cfg) => {
            let (off, trace) = coordinate_attack(problem, cfg)?;
            let pts: Vec<_> = sim
                .clean
                .points()
                .zip(&off)
                .map(|(p, o)| [p[0] + o[0], p[1] + o[1], p[2] + o[2]])
                .collect();
            (sim.clean.with_points(&pts)?, None, Some(trace))
        }
    })
}

pub fn run_scene(
    sim: &Simulation,
    spec: &AttackSpec,
    detector: &DetectorConfig,
    eval: &EvalConfig,
) -> Result<SceneOutcome> {
    let (attacked, perturbation, trace) = attacked_sweep(sim, spec, detector)?;
    let detections = detect(&attacked, detector);
    let clean_pts = sim.clean.flat_points();
    let pts = attacked.flat_points();
    let gt_points = sim.labels.iter().map(|b| count_points_in_box(&clean_pts, b, eval.point_margin)).collect();
    let det_points = detections.iter().map(|d| count_points_in_box(&pts, &d.bbox, eval.point_margin)).collect();
    let regularizer = RegularizerStats {
        smoothness: perturbation.as_ref().map(|d| smoothness(d, 1.0, 1.0, 2.0)),
        lp_distance: Some(lp_distance(&sim.clean, &attacked, 2.0)?),
        chamfer: if sim.clean.is_empty() { None } else { Some(chamfer(&sim.clean, &attacked)?) },
    };
    Ok(SceneOutcome {
        seed: sim.seed,
        attacked,
        detections,
        gt_points,
        det_points,
        perturbation,
        trace,
        regularizer,
    })
}

/// Scored outcomes of every scene plus the pooled report.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub scenes: Vec<SceneOutcome>,
    pub report: EvalReport,
}

impl SuiteResult {
    pub fn mean_regularizer(&self) -> RegularizerStats {
        let mean = |f: &dyn Fn(&RegularizerStats) -> Option<f64>| {
            let v: Vec<f64> = self.scenes.iter().filter_map(|s| f(&s.regularizer)).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        RegularizerStats {
            smoothness: mean(&|r| r.smoothness),
            lp_distance: mean(&|r| r.lp_distance),
            chamfer: mean(&|r| r.chamfer),
        }
    }
}

/// Runs `spec` on every simulation, scenes in parallel, and pools the AP.
pub fn run_suite(
    sims: &[Simulation],
    spec: &AttackSpec,
    detector: &DetectorConfig,
    eval: &EvalConfig,
) -> Result<SuiteResult> {
    let scenes = sims
        .par_iter()
        .map(|s| run_scene(s, spec, detector, eval))
        .collect::<Result<Vec<_>>>()?;
    let scored: Vec<Scored<'_>> = sims
        .iter()
        .zip(&scenes)
        .map(|(s, o)| Scored { dets: &o.detections, gts: &s.labels, gt_points: &o.gt_points, det_points: &o.det_points })
        .collect();
    let mut report = evaluate(&scored, eval);
    let suite = SuiteResult { scenes, report: report.clone() };
    report.regularizer_stats = Some(suite.mean_regularizer());
    Ok(SuiteResult { report, ..suite })
}

/// Simulates `seeds` in parallel.
pub fn simulate_all(
    seeds: &[u64],
    scene: &SceneConfig,
    sensor: &SensorModel,
    trajectory: &TrajectoryConfig,
    steps: usize,
) -> Result<Vec<Simulation>> {
    seeds.par_iter().map(|&s| simulate(s, scene, sensor, trajectory, steps)).collect()
}
