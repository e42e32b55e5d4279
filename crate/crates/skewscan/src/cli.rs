//! Command-line interface.
//!
//! A scene directory written by `simulate` holds `scene.json`, `labels.json`,
//! `poses.txt` (keyframes A and B), `distorted.bin` and `clean.bin` (each
//! with a `.packets` sidecar) and the effective `config.toml`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use skewscan_core::attack::{AttackConfig, PerturbMode, Perturbation, RandomKind, Regularizer};
use skewscan_core::detector::{detect, Box3D, Branch};
use skewscan_core::geometry::interpolate_track;
use skewscan_core::metrics::{count_points_in_box, evaluate, performance_drop, relative_drop, EvalReport, Scored};
use skewscan_core::scene::Scene;
use skewscan_core::sweep::{compensate, distort};
use skewscan_core::{Pose, Sweep};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::pipeline::{run_suite, simulate, simulate_all, AttackSpec, Simulation, SuiteResult};
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "skewscan", version, about = "LiDAR motion distortion and adversarial trajectory perturbation")]
pub struct Cli {
    /// Run configuration (TOML). Defaults apply to every missing key.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the configured one.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scene and trajectory and raycast the distorted sweep.
    Simulate {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Re-express a keyframe-A sweep in its per-packet capture frames.
    Distort(TransformArgs),
    /// Map a distorted sweep back into keyframe A, optionally perturbed.
    Compensate {
        #[command(flatten)]
        args: TransformArgs,
        /// Perturbation JSON written by `attack`.
        #[arg(long)]
        perturbation: Option<PathBuf>,
    },
    /// Attack one scene directory, or a simulated suite when `--input` is absent.
    Attack(AttackArgs),
    /// Score clean against attacked detections.
    Eval(EvalArgs),
    /// Run the attack over a grid of steps, iterations and step sizes.
    SweepParams(SweepArgs),
    /// Render SVG charts from an attack or eval output directory.
    Plot {
        /// Directory holding outputs of `simulate`, `attack` and `eval`.
        #[arg(long)]
        input: PathBuf,
        /// Cap on plotted points per cloud.
        #[arg(long, default_value_t = 20000)]
        max_points: usize,
    },
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub points: PathBuf,
    /// Keyframe poses A and B.
    #[arg(long)]
    pub poses: PathBuf,
    /// Packet count for point files without a sidecar.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Output point file.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Flat,
    Random,
    Coordinate,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Scene directory from `simulate`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Flat)]
    pub method: Method,
    /// Noise of the random baseline.
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    #[command(flatten)]
    pub knobs: AttackKnobs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Points,
    Translation,
    Rotation,
    Full,
}

impl From<NoiseArg> for RandomKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Points => RandomKind::Points,
            NoiseArg::Translation => RandomKind::Translation,
            NoiseArg::Rotation => RandomKind::Rotation,
            NoiseArg::Full => RandomKind::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Translation,
    Rotation,
    Full,
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegArg {
    None,
    Smoothness,
    Lp,
    Chamfer,
}

/// Command-line overrides of the `[attack]` section.
#[derive(Debug, Args, Default)]
pub struct AttackKnobs {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub branch: Option<BranchArg>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub eps_t: Option<f64>,
    #[arg(long)]
    pub eps_r: Option<f64>,
    #[arg(long)]
    pub alpha_t: Option<f64>,
    #[arg(long)]
    pub alpha_r: Option<f64>,
    #[arg(long, value_enum)]
    pub regularizer: Option<RegArg>,
    #[arg(long)]
    pub lambda_s: Option<f64>,
    #[arg(long)]
    pub lambda_d: Option<f64>,
    /// Interpolation steps `N` for simulated scenes.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Scenes in a simulated suite.
    #[arg(long)]
    pub scenes: Option<usize>,
}

impl AttackKnobs {
    fn apply(&self, cfg: &mut RunConfig) {
        let a = &mut cfg.attack;
        if let Some(m) = self.mode {
            a.mode = match m {
                ModeArg::Translation => PerturbMode::Translation,
                ModeArg::Rotation => PerturbMode::Rotation,
                ModeArg::Full => PerturbMode::Full,
                ModeArg::Polynomial => PerturbMode::Polynomial,
            };
        }
        if let Some(b) = self.branch {
            a.branch = match b {
                BranchArg::Classification => Branch::Classification,
                BranchArg::Regression => Branch::Regression,
            };
        }
        if let Some(r) = self.regularizer {
            a.regularizer = match r {
                RegArg::None => Regularizer::None,
                RegArg::Smoothness => Regularizer::Smoothness,
                RegArg::Lp => Regularizer::Lp,
                RegArg::Chamfer => Regularizer::Chamfer,
            };
        }
        set(&mut a.iters, self.iters);
        set(&mut a.eps_t, self.eps_t);
        set(&mut a.eps_r, self.eps_r);
        set(&mut a.alpha_t, self.alpha_t);
        set(&mut a.alpha_r, self.alpha_r);
        set(&mut a.lambda_s, self.lambda_s);
        set(&mut a.lambda_d, self.lambda_d);
        set(&mut cfg.steps, self.steps);
        set(&mut cfg.scenes, self.scenes);
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scene directory from `simulate`.
    #[arg(long, requires = "attacked")]
    pub input: Option<PathBuf>,
    /// Attacked point file to compare with the scene's clean sweep.
    #[arg(long)]
    pub attacked: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Flat)]
    pub method: Method,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    #[command(flatten)]
    pub knobs: AttackKnobs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Interpolation steps `N`.
    #[arg(long, value_delimiter = ',', default_values_t = [25usize, 50, 100, 500, 1000])]
    pub steps: Vec<usize>,
    /// Attack iterations; defaults to the configured value.
    #[arg(long, value_delimiter = ',')]
    pub iters: Vec<usize>,
    /// Translation step sizes; the rotation step scales with it.
    #[arg(long, value_delimiter = ',')]
    pub alpha_t: Vec<f64>,
    #[arg(long)]
    pub scenes: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.output, cli.out.clone());
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Simulate { steps } => {
            set(&mut cfg.steps, *steps);
            cfg.validate()?;
            cmd_simulate(&cfg)
        }
        Command::Distort(a) => cmd_transform(a, None, true),
        Command::Compensate { args, perturbation } => cmd_transform(args, perturbation.as_deref(), false),
        Command::Attack(a) => {
            a.knobs.apply(&mut cfg);
            cfg.validate()?;
            cmd_attack(&cfg, a)
        }
        Command::Eval(a) => {
            a.knobs.apply(&mut cfg);
            cfg.validate()?;
            cmd_eval(&cfg, a)
        }
        Command::SweepParams(a) => {
            set(&mut cfg.scenes, a.scenes);
            if let Some(m) = a.mode {
                AttackKnobs { mode: Some(m), ..Default::default() }.apply(&mut cfg);
            }
            cfg.validate()?;
            cmd_sweep(&cfg, a)
        }
        Command::Plot { input, max_points } => cmd_plot(input, &cfg.output, *max_points),
    }
}

/// Writes a simulated scene in the scene-directory layout.
pub fn save_simulation(sim: &Simulation, dir: &Path) -> Result<()> {
    io::create_dir(dir)?;
    io::write_json(&sim.scene, &dir.join("scene.json"))?;
    io::write_json(&sim.labels, &dir.join("labels.json"))?;
    io::write_poses(&[sim.keyframes.0, sim.keyframes.1], &dir.join("poses.txt"))?;
    io::write_points(&sim.distorted, &dir.join("distorted.bin"))?;
    io::write_points(&sim.clean, &dir.join("clean.bin"))
}

fn keyframes(path: &Path) -> Result<(Pose, Pose)> {
    let poses = io::read_poses(path)?;
    match poses.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::format(path, format!("expected 2 keyframe poses, found {}", poses.len()))),
    }
}

/// Reads a scene directory. The clean sweep is recomputed from the stored
/// distorted sweep.
pub fn load_simulation(dir: &Path, seed: u64) -> Result<Simulation> {
    let scene: Scene = io::read_json(&dir.join("scene.json"))?;
    let labels: Vec<Box3D> = io::read_json(&dir.join("labels.json"))?;
    let (a, b) = keyframes(&dir.join("poses.txt"))?;
    let distorted = io::read_points(&dir.join("distorted.bin"), None)?;
    let track = interpolate_track(&a, &b, distorted.packets.len())?;
    let clean = compensate(&distorted, &track, None)?;
    Ok(Simulation { seed, scene, keyframes: (a, b), track, distorted, labels, clean })
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let sim = simulate(cfg.seed, &cfg.scene, &cfg.sensor, &cfg.trajectory, cfg.steps)?;
    save_simulation(&sim, &cfg.output)?;
    cfg.save(&cfg.output.join("config.toml"))?;
    log::info!("{} points, {} vehicles -> {}", sim.distorted.len(), sim.labels.len(), cfg.output.display());
    Ok(())
}

fn cmd_transform(a: &TransformArgs, perturbation: Option<&Path>, forward: bool) -> Result<()> {
    let sweep = io::read_points(&a.points, a.steps)?;
    let (ka, kb) = keyframes(&a.poses)?;
    let track = interpolate_track(&ka, &kb, sweep.packets.len())?;
    let out = if forward {
        distort(&sweep, &track)?
    } else {
        let delta: Option<Perturbation> = perturbation.map(io::read_json).transpose()?;
        compensate(&sweep, &track, delta.as_ref())?
    };
    if let Some(parent) = a.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        io::create_dir(parent)?;
    }
    io::write_points(&out, &a.output)
}

fn attack_spec(cfg: &RunConfig, method: Method, noise: Option<NoiseArg>) -> AttackSpec {
    let config = AttackConfig { seed: cfg.seed, ..cfg.attack.clone() };
    match method {
        Method::Flat => AttackSpec::Flat(config),
        Method::Coordinate => AttackSpec::Coordinate(config),
        Method::Random => {
            let default = match config.mode {
                PerturbMode::Rotation => NoiseArg::Rotation,
                PerturbMode::Full => NoiseArg::Full,
                _ => NoiseArg::Translation,
            };
            AttackSpec::Random {
                noise: noise.unwrap_or(default).into(),
                sigma_t: config.eps_t,
                sigma_r: config.eps_r,
                config,
            }
        }
    }
}

fn sims_for(cfg: &RunConfig, input: Option<&Path>) -> Result<Vec<Simulation>> {
    match input {
        Some(dir) => Ok(vec![load_simulation(dir, cfg.seed)?]),
        None => simulate_all(&cfg.seeds(), &cfg.scene, &cfg.sensor, &cfg.trajectory, cfg.steps),
    }
}

#[derive(Serialize)]
struct SuiteSummary<'a> {
    seeds: Vec<u64>,
    clean: &'a EvalReport,
    attacked: &'a EvalReport,
}

fn write_suite(dir: &Path, sims: &[Simulation], clean: &SuiteResult, attacked: &SuiteResult, cfg: &RunConfig) -> Result<()> {
    io::create_dir(dir)?;
    let seeds: Vec<u64> = sims.iter().map(|s| s.seed).collect();
    let mut after = attacked.report.clone();
    after.drop = Some(performance_drop(&clean.report, &attacked.report)?);
    io::write_json(&SuiteSummary { seeds: seeds.clone(), clean: &clean.report, attacked: &after }, &dir.join("report.json"))?;
    io::write_text(&report::report_csv(&after), &dir.join("report.csv"))?;
    io::write_text(&report::per_scene_csv(&seeds, &after), &dir.join("per_scene.csv"))?;
    for (name, r) in [("clean", clean), ("attacked", attacked)] {
        let scored = scored(sims, r);
        io::write_text(&report::pr_csv(&report::pr_curve(&scored, &cfg.eval)), &dir.join(format!("pr_{name}.csv")))?;
    }
    Ok(())
}

fn scored<'a>(sims: &'a [Simulation], r: &'a SuiteResult) -> Vec<Scored<'a>> {
    sims.iter()
        .zip(&r.scenes)
        .map(|(s, o)| Scored { dets: &o.detections, gts: &s.labels, gt_points: &o.gt_points, det_points: &o.det_points })
        .collect()
}

fn cmd_attack(cfg: &RunConfig, a: &AttackArgs) -> Result<()> {
    let sims = sims_for(cfg, a.input.as_deref())?;
    let spec = attack_spec(cfg, a.method, a.noise);
    let out = &cfg.output;
    io::create_dir(out)?;
    cfg.save(&out.join("config.toml"))?;
    let clean = run_suite(&sims, &AttackSpec::Clean, &cfg.detector, &cfg.eval)?;
    let attacked = run_suite(&sims, &spec, &cfg.detector, &cfg.eval)?;
    let single = sims.len() == 1;
    for (sim, o) in sims.iter().zip(&attacked.scenes) {
        let dir = if single { out.clone() } else { out.join(format!("scene_{}", sim.seed)) };
        io::create_dir(&dir)?;
        if !single {
            save_simulation(sim, &dir)?;
        }
        if let Some(p) = &o.perturbation {
            io::write_json(p, &dir.join("perturbation.json"))?;
        }
        if let Some(t) = &o.trace {
            io::write_text(&report::trace_csv(t), &dir.join("loss_trace.csv"))?;
        }
        io::write_points(&o.attacked, &dir.join("attacked.bin"))?;
        io::write_text(&report::detections_csv(&o.detections), &dir.join("detections.csv"))?;
    }
    if single {
        io::write_json(&sims[0].labels, &out.join("labels.json"))?;
        io::write_points(&sims[0].clean, &out.join("clean.bin"))?;
    }
    write_suite(out, &sims, &clean, &attacked, cfg)?;
    log::info!(
        "AP {:.4} -> {:.4}",
        clean.report.ap("all").unwrap_or(0.0),
        attacked.report.ap("all").unwrap_or(0.0)
    );
    Ok(())
}

fn score_sweep(sweep: &Sweep, sim: &Simulation, cfg: &RunConfig) -> (Vec<skewscan_core::detector::Detection>, Vec<usize>, Vec<usize>) {
    let dets = detect(sweep, &cfg.detector);
    let clean_pts = sim.clean.flat_points();
    let pts = sweep.flat_points();
    let gt = sim.labels.iter().map(|b| count_points_in_box(&clean_pts, b, cfg.eval.point_margin)).collect();
    let dp = dets.iter().map(|d| count_points_in_box(&pts, &d.bbox, cfg.eval.point_margin)).collect();
    (dets, gt, dp)
}

fn cmd_eval(cfg: &RunConfig, a: &EvalArgs) -> Result<()> {
    let out = &cfg.output;
    match (&a.input, &a.attacked) {
        (Some(dir), Some(attacked_path)) => {
            let sim = load_simulation(dir, cfg.seed)?;
            let attacked = io::read_points(attacked_path, Some(sim.track.len()))?;
            if attacked.len() != sim.clean.len() {
                log::warn!("attacked sweep has {} points, clean has {}", attacked.len(), sim.clean.len());
            }
            let (cd, cg, cp) = score_sweep(&sim.clean, &sim, cfg);
            let (ad, ag, ap) = score_sweep(&attacked, &sim, cfg);
            let before = evaluate(&[Scored { dets: &cd, gts: &sim.labels, gt_points: &cg, det_points: &cp }], &cfg.eval);
            let a_scored = [Scored { dets: &ad, gts: &sim.labels, gt_points: &ag, det_points: &ap }];
            let mut after = evaluate(&a_scored, &cfg.eval);
            after.drop = Some(performance_drop(&before, &after)?);
            io::create_dir(out)?;
            io::write_json(&SuiteSummary { seeds: vec![cfg.seed], clean: &before, attacked: &after }, &out.join("report.json"))?;
            io::write_text(&report::report_csv(&after), &out.join("report.csv"))?;
            let c_scored = [Scored { dets: &cd, gts: &sim.labels, gt_points: &cg, det_points: &cp }];
            io::write_text(&report::pr_csv(&report::pr_curve(&c_scored, &cfg.eval)), &out.join("pr_clean.csv"))?;
            io::write_text(&report::pr_csv(&report::pr_curve(&a_scored, &cfg.eval)), &out.join("pr_attacked.csv"))?;
            Ok(())
        }
        (None, None) => {
            let sims = sims_for(cfg, None)?;
            let spec = attack_spec(cfg, a.method, a.noise);
            let clean = run_suite(&sims, &AttackSpec::Clean, &cfg.detector, &cfg.eval)?;
            let attacked = run_suite(&sims, &spec, &cfg.detector, &cfg.eval)?;
            write_suite(out, &sims, &clean, &attacked, cfg)?;
            cfg.save(&out.join("config.toml"))
        }
        _ => Err(Error::Usage("eval needs both --input and --attacked, or neither".into())),
    }
}

#[derive(Debug, Clone, Serialize)]
struct SweepCell {
    steps: usize,
    iters: usize,
    alpha_t: f64,
    alpha_r: f64,
    clean_ap: f64,
    attacked_ap: f64,
    relative_drop: Option<f64>,
}

fn cmd_sweep(cfg: &RunConfig, a: &SweepArgs) -> Result<()> {
    if a.steps.is_empty() || a.steps.contains(&0) {
        return Err(Error::Usage("--steps needs positive values".into()));
    }
    let iters = if a.iters.is_empty() { vec![cfg.attack.iters] } else { a.iters.clone() };
    let alphas = if a.alpha_t.is_empty() { vec![cfg.attack.alpha_t] } else { a.alpha_t.clone() };
    let mut grid = Vec::new();
    for &n in &a.steps {
        for &it in &iters {
            for &al in &alphas {
                grid.push((n, it, al));
            }
        }
    }
    let out = &cfg.output;
    io::create_dir(out)?;
    cfg.save(&out.join("config.toml"))?;
    let cells = grid
        .par_iter()
        .map(|&(n, it, al)| {
            let mut c = cfg.clone();
            c.steps = n;
            c.attack.iters = it;
            c.attack.alpha_r = cfg.attack.alpha_r * al / cfg.attack.alpha_t;
            c.attack.alpha_t = al;
            c.validate()?;
            let sims = sims_for(&c, None)?;
            let clean = run_suite(&sims, &AttackSpec::Clean, &c.detector, &c.eval)?;
            let attacked = run_suite(&sims, &attack_spec(&c, Method::Flat, None), &c.detector, &c.eval)?;
            let dir = out.join(format!("steps{n}_iters{it}_alpha{al}"));
            write_suite(&dir, &sims, &clean, &attacked, &c)?;
            let (ca, aa) = (clean.report.ap("all").unwrap_or(0.0), attacked.report.ap("all").unwrap_or(0.0));
            log::info!("N={n} iters={it} alpha_t={al}: AP {ca:.4} -> {aa:.4}");
            Ok(SweepCell {
                steps: n,
                iters: it,
                alpha_t: al,
                alpha_r: c.attack.alpha_r,
                clean_ap: ca,
                attacked_ap: aa,
                relative_drop: relative_drop(ca, aa),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("steps,iters,alpha_t,alpha_r,clean_ap,attacked_ap,relative_drop\n");
    for c in &cells {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.steps,
            c.iters,
            c.alpha_t,
            c.alpha_r,
            c.clean_ap,
            c.attacked_ap,
            c.relative_drop.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    io::write_text(&csv, &out.join("sweep.csv"))?;
    io::write_json(&cells, &out.join("sweep.json"))
}

fn cmd_plot(input: &Path, out: &Path, max_points: usize) -> Result<()> {
    io::create_dir(out)?;
    let mut wrote = 0;
    let trace_path = input.join("loss_trace.csv");
    if trace_path.exists() {
        let text = std::fs::read_to_string(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
        let trace = report::parse_trace_csv(&text).ok_or_else(|| Error::format(&trace_path, "malformed loss trace"))?;
        io::write_text(&report::trace_chart(&trace), &out.join("loss.svg"))?;
        wrote += 1;
    }
    let mut curves = Vec::new();
    for name in ["clean", "attacked"] {
        let p = input.join(format!("pr_{name}.csv"));
        if p.exists() {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let c = report::parse_pr_csv(&text).ok_or_else(|| Error::format(&p, "malformed PR curve"))?;
            curves.push((name, c));
        }
    }
    if !curves.is_empty() {
        io::write_text(&report::line_chart("Precision/recall", "recall", "precision", &curves), &out.join("pr.svg"))?;
        wrote += 1;
    }
    let (cp, ap) = (input.join("clean.bin"), input.join("attacked.bin"));
    if cp.exists() && ap.exists() {
        let clean = io::read_points(&cp, None)?.flat_points();
        let attacked = io::read_points(&ap, None)?.flat_points();
        let lp = input.join("labels.json");
        let labels: Vec<Box3D> = if lp.exists() { io::read_json(&lp)? } else { Vec::new() };
        io::write_text(&report::bev_scatter(&clean, &attacked, &labels, max_points), &out.join("bev.svg"))?;
        let mut csv = String::from("set,x,y,z\n");
        for (name, set) in [("clean", &clean), ("perturbed", &attacked)] {
            for p in set.iter() {
                csv.push_str(&format!("{name},{},{},{}\n", p[0], p[1], p[2]));
            }
        }
        io::write_text(&csv, &out.join("bev.csv"))?;
        wrote += 1;
    }
    if wrote == 0 {
        return Err(Error::Usage(format!("nothing to plot in {}", input.display())));
    }
    Ok(())
}
