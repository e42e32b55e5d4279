//! Reference attacks: Gaussian noise and per-point coordinate PGD.

use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::pgd::{project_linf, LossTrace};
use super::{AttackConfig, AttackProblem, PerturbMode, Perturbation};
use crate::autodiff::Tape;
use crate::detector::detector_loss;
use crate::error::{arg_err, num_err, Result};
use crate::geometry::Vec3;
use crate::sweep::{compensate, DiffSweep, Sweep};

/// What the Gaussian baseline perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum RandomKind {
    /// Independent noise on every compensated point coordinate.
    Points,
    Translation,
    Rotation,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RandomPerturbation {
    /// Offsets added to the compensated points, in packet order.
    Points(Vec<Vec3>),
    Trajectory(Perturbation),
}

impl RandomPerturbation {
    /// Compensated sweep under this perturbation.
    pub fn apply(&self, problem: &AttackProblem<'_>) -> Result<Sweep> {
        match self {
            RandomPerturbation::Trajectory(d) => compensate(problem.distorted, problem.track, Some(d)),
            RandomPerturbation::Points(off) => {
                let clean = compensate(problem.distorted, problem.track, None)?;
                let pts: Vec<Vec3> = clean
                    .flat_points()
                    .iter()
                    .zip(off)
                    .map(|(p, o)| [p[0] + o[0], p[1] + o[1], p[2] + o[2]])
                    .collect();
                clean.with_points(&pts)
            }
        }
    }
}

/// Draws zero-mean Gaussian noise with deviation `sigma_t` on translations
/// or point coordinates and `sigma_r` on rotation entries. Trajectory noise
/// is clipped to the budgets in `cfg`; point noise is not.
pub fn random_attack(
    kind: RandomKind,
    steps: usize,
    num_points: usize,
    sigma_t: f64,
    sigma_r: f64,
    cfg: &AttackConfig,
) -> Result<RandomPerturbation> {
    let nt = Normal::new(0.0, sigma_t).map_err(|e| arg_err!("sigma_t: {e}"))?;
    let nr = Normal::new(0.0, sigma_r).map_err(|e| arg_err!("sigma_r: {e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mode = match kind {
        RandomKind::Points => {
            let off = (0..num_points)
                .map(|_| core::array::from_fn(|_| nt.sample(&mut rng)))
                .collect();
            return Ok(RandomPerturbation::Points(off));
        }
        RandomKind::Translation => PerturbMode::Translation,
        RandomKind::Rotation => PerturbMode::Rotation,
        RandomKind::Full => PerturbMode::Full,
    };
    let mut d = Perturbation::zeros(mode, steps);
    if mode.moves_translation() {
        for v in d.t_tilde.iter_mut().flatten() {
            *v = nt.sample(&mut rng);
        }
    }
    if mode.moves_rotation() {
        for v in d.r_tilde.iter_mut().flatten().flatten() {
            *v = nr.sample(&mut rng);
        }
    }
    project_linf(&mut d, cfg.eps_t, cfg.eps_r);
    Ok(RandomPerturbation::Trajectory(d))
}

/// Signed-gradient PGD directly on compensated point coordinates, each
/// offset clipped to `cfg.eps_xyz`.
pub fn coordinate_attack(
    problem: AttackProblem<'_>,
    cfg: &AttackConfig,
) -> Result<(Vec<Vec3>, LossTrace)> {
    cfg.validate()?;
    let clean = compensate(problem.distorted, problem.track, None)?;
    let base = clean.flat_points();
    let mut offsets = alloc::vec![[0.0f64; 3]; base.len()];
    let mut offsets_idx = Vec::with_capacity(clean.packets.len() + 1);
    offsets_idx.push(0);
    for p in &clean.packets {
        offsets_idx.push(offsets_idx.last().copied().unwrap_or(0) + p.len());
    }
    let mut trace = LossTrace::default();
    let mut tape = Tape::new();
    for it in 0..=cfg.iters {
        tape.clear();
        let vals: Vec<f64> = base
            .iter()
            .zip(&offsets)
            .flat_map(|(p, o)| [p[0] + o[0], p[1] + o[1], p[2] + o[2]])
            .collect();
        let leaves = tape.param_group("xyz", &vals);
        let ds = DiffSweep {
            points: leaves.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
            offsets: offsets_idx.clone(),
        };
        let loss = detector_loss(&mut tape, &ds, problem.labels, cfg.branch, problem.detector);
        trace.loss.push(tape.value(loss));
        trace.objective.push(tape.value(loss));
        if it == cfg.iters {
            break;
        }
        let g = tape.backward(loss)?;
        let g = g.group("xyz").unwrap_or(&[]);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(num_err!("non-finite gradient at iteration {it}"));
        }
        for (o, gc) in offsets.iter_mut().zip(g.chunks(3)) {
            for k in 0..3 {
                let s = if gc[k] > 0.0 {
                    1.0
                } else if gc[k] < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                o[k] = (o[k] - cfg.alpha_xyz * s).clamp(-cfg.eps_xyz, cfg.eps_xyz);
            }
        }
    }
    Ok((offsets, trace))
}
