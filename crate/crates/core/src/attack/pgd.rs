//! Projected signed-gradient descent on trajectory offsets.

use alloc::vec::Vec;

use super::regularize::{diff_chamfer, diff_lp_distance, diff_smoothness};
use super::{AttackConfig, AttackProblem, PerturbMode, Perturbation, Regularizer};
use crate::autodiff::{GradientSet, Tape, Var};
use crate::detector::detector_loss;
use crate::error::{num_err, Result};
use crate::geometry::Vec3;
use crate::kdtree::KdTree;
use crate::sweep::{compensate, sweep_as_function, DeltaVars, DiffSweep};

/// Clips every translation entry to `[-eps_t, eps_t]` and every rotation
/// entry to `[-eps_r, eps_r]`.
pub fn project_linf(delta: &mut Perturbation, eps_t: f64, eps_r: f64) {
    for v in delta.t_tilde.iter_mut().flatten() {
        *v = v.clamp(-eps_t, eps_t);
    }
    for v in delta.r_tilde.iter_mut().flatten().flatten() {
        *v = v.clamp(-eps_r, eps_r);
    }
}

/// Translation offsets of a cubic in `s = n / (N − 1)`.
pub fn poly_eval(beta: &[[f64; 3]; 4], steps: usize) -> Vec<Vec3> {
    let denom = steps.saturating_sub(1).max(1) as f64;
    (0..steps)
        .map(|n| {
            let s = n as f64 / denom;
            let pw = [1.0, s, s * s, s * s * s];
            core::array::from_fn(|i| (0..4).map(|k| beta[k][i] * pw[k]).sum())
        })
        .collect()
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Clean compensated points and their search tree, reused across iterations.
pub struct ObjectiveContext<'a> {
    pub problem: AttackProblem<'a>,
    pub clean: Vec<Vec3>,
}

impl<'a> ObjectiveContext<'a> {
    pub fn new(problem: AttackProblem<'a>) -> Result<Self> {
        let clean = compensate(problem.distorted, problem.track, None)?.flat_points();
        Ok(Self { problem, clean })
    }
}

/// Adds the configured regularizer to `loss`. Returns the objective node.
pub fn attack_objective(
    tape: &mut Tape,
    loss: Var,
    delta: &DeltaVars,
    perturbed: &DiffSweep,
    clean: &[Vec3],
    clean_tree: Option<&KdTree<'_>>,
    cfg: &AttackConfig,
) -> Result<Var> {
    let reg = match cfg.regularizer {
        Regularizer::None => return Ok(loss),
        Regularizer::Smoothness => {
            let s = diff_smoothness(tape, delta, cfg.lambda_t, cfg.lambda_r, cfg.p);
            (s, cfg.lambda_s)
        }
        Regularizer::Lp => (diff_lp_distance(tape, clean, perturbed, cfg.p)?, cfg.lambda_d),
        Regularizer::Chamfer => {
            let built;
            let tree = match clean_tree {
                Some(t) => t,
                None => {
                    built = KdTree::build(clean);
                    &built
                }
            };
            (diff_chamfer(tape, clean, tree, perturbed)?, cfg.lambda_d)
        }
    };
    Ok(tape.linear(0.0, &[(loss, 1.0), (reg.0, reg.1)]))
}

/// Loss values over the iterations of an attack. Entry 0 is the clean
/// start, entry `k` the value after update `k`.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossTrace {
    /// Detector attack loss `-L`.
    pub loss: Vec<f64>,
    /// Loss plus weighted regularizer.
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub perturbation: Perturbation,
    pub trace: LossTrace,
}

struct Evaluated {
    loss: f64,
    objective: f64,
    grads: Option<GradientSet>,
}

/// Records the full objective for `delta` and optionally backpropagates.
fn evaluate(
    tape: &mut Tape,
    ctx: &ObjectiveContext<'_>,
    tree: Option<&KdTree<'_>>,
    delta: &Perturbation,
    poly: bool,
    cfg: &AttackConfig,
    grad: bool,
) -> Result<Evaluated> {
    tape.clear();
    let p = &ctx.problem;
    let vars = if poly { poly_vars(tape, &delta.beta, p.track.len()) } else { delta.to_tape(tape) };
    let ds = sweep_as_function(p.distorted, p.track, &vars, tape)?;
    let loss = detector_loss(tape, &ds, p.labels, cfg.branch, p.detector);
    let obj = attack_objective(tape, loss, &vars, &ds, &ctx.clean, tree, cfg)?;
    let grads = if grad { Some(GradientSet::from_gradients(&tape.backward(obj)?)) } else { None };
    Ok(Evaluated { loss: tape.value(loss), objective: tape.value(obj), grads })
}

/// Translation offsets as a cubic of the leaf group `"beta"`; rotation
/// offsets are constant zero.
fn poly_vars(tape: &mut Tape, beta: &[[f64; 3]; 4], steps: usize) -> DeltaVars {
    let flat: Vec<f64> = beta.iter().flatten().copied().collect();
    let b = tape.param_group("beta", &flat);
    poly_delta_vars(tape, &b, steps)
}

/// Builds per-step offsets from 12 coefficient nodes laid out like
/// [`Perturbation::beta`] flattened row by row.
pub fn poly_delta_vars(tape: &mut Tape, beta: &[Var], steps: usize) -> DeltaVars {
    assert_eq!(beta.len(), 12, "polynomial offsets take 12 coefficients");
    let zero = tape.constant(0.0);
    let denom = steps.saturating_sub(1).max(1) as f64;
    let t = (0..steps)
        .map(|n| {
            let s = n as f64 / denom;
            let pw = [1.0, s, s * s, s * s * s];
            core::array::from_fn(|i| {
                let terms: Vec<(Var, f64)> = (0..4).map(|k| (beta[k * 3 + i], pw[k])).collect();
                tape.linear(0.0, &terms)
            })
        })
        .collect();
    DeltaVars { t, r: alloc::vec![[[zero; 3]; 3]; steps] }
}

fn check_finite(g: &GradientSet, iter: usize) -> Result<()> {
    let ok = g.d_delta.iter().flatten().chain(g.d_beta.iter().flatten()).all(|v| v.is_finite());
    if ok {
        Ok(())
    } else {
        Err(num_err!("non-finite gradient at iteration {iter}"))
    }
}

fn tree_for<'c>(ctx: &'c ObjectiveContext<'_>, cfg: &AttackConfig) -> Option<KdTree<'c>> {
    (cfg.regularizer == Regularizer::Chamfer).then(|| KdTree::build(&ctx.clean))
}

/// Per-step PGD on `t̃` and/or `R̃` depending on `cfg.mode`.
///
/// `δ ← clip(δ − α·sgn(∇δ))`, starting from zero. Entries the mode does
/// not move stay at zero.
pub fn pgd_attack(problem: AttackProblem<'_>, cfg: &AttackConfig) -> Result<AttackOutcome> {
    cfg.validate()?;
    if cfg.mode == PerturbMode::Polynomial {
        return pgd_poly_attack(problem, cfg);
    }
    let ctx = ObjectiveContext::new(problem)?;
    let tree = tree_for(&ctx, cfg);
    let steps = problem.track.len();
    let mut delta = Perturbation::zeros(cfg.mode, steps);
    let mut trace = LossTrace::default();
    let mut tape = Tape::new();
    for it in 0..cfg.iters {
        let ev = evaluate(&mut tape, &ctx, tree.as_ref(), &delta, false, cfg, true)?;
        trace.loss.push(ev.loss);
        trace.objective.push(ev.objective);
        let g = ev.grads.expect("gradients requested");
        check_finite(&g, it)?;
        for (n, row) in g.d_delta.iter().enumerate() {
            if cfg.mode.moves_translation() {
                for (t, &g) in delta.t_tilde[n].iter_mut().zip(&row[..3]) {
                    *t -= cfg.alpha_t * sgn(g);
                }
            }
            if cfg.mode.moves_rotation() {
                for i in 0..9 {
                    delta.r_tilde[n][i / 3][i % 3] -= cfg.alpha_r * sgn(row[3 + i]);
                }
            }
        }
        project_linf(&mut delta, cfg.eps_t, cfg.eps_r);
    }
    let ev = evaluate(&mut tape, &ctx, tree.as_ref(), &delta, false, cfg, false)?;
    trace.loss.push(ev.loss);
    trace.objective.push(ev.objective);
    Ok(AttackOutcome { perturbation: delta, trace })
}

/// PGD on the cubic coefficients of the translation offsets.
///
/// After each signed step the coefficients are rescaled so the evaluated
/// offsets stay within `eps_t` in ℓ∞.
pub fn pgd_poly_attack(problem: AttackProblem<'_>, cfg: &AttackConfig) -> Result<AttackOutcome> {
    cfg.validate()?;
    let ctx = ObjectiveContext::new(problem)?;
    let tree = tree_for(&ctx, cfg);
    let steps = problem.track.len();
    let mut delta = Perturbation::zeros(PerturbMode::Polynomial, steps);
    let mut trace = LossTrace::default();
    let mut tape = Tape::new();
    for it in 0..cfg.iters {
        let ev = evaluate(&mut tape, &ctx, tree.as_ref(), &delta, true, cfg, true)?;
        trace.loss.push(ev.loss);
        trace.objective.push(ev.objective);
        let g = ev.grads.expect("gradients requested");
        check_finite(&g, it)?;
        for k in 0..4 {
            for i in 0..3 {
                delta.beta[k][i] -= cfg.alpha_t * sgn(g.d_beta[k][i]);
            }
        }
        let t = poly_eval(&delta.beta, steps);
        let peak = t.iter().flatten().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
        if peak > cfg.eps_t {
            let s = cfg.eps_t / peak;
            delta.beta.iter_mut().flatten().for_each(|b| *b *= s);
        }
        delta.t_tilde = poly_eval(&delta.beta, steps);
    }
    let ev = evaluate(&mut tape, &ctx, tree.as_ref(), &delta, true, cfg, false)?;
    trace.loss.push(ev.loss);
    trace.objective.push(ev.objective);
    Ok(AttackOutcome { perturbation: delta, trace })
}

/// Dispatches on `cfg.mode`.
pub fn run_attack(problem: AttackProblem<'_>, cfg: &AttackConfig) -> Result<AttackOutcome> {
    pgd_attack(problem, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::PerturbMode;

    #[test]
    fn projection_is_idempotent_and_bounded() {
        let mut d = Perturbation::zeros(PerturbMode::Full, 3);
        d.t_tilde = alloc::vec![[0.5, -0.05, -3.0], [0.1, 0.0, 0.2], [-0.1, 1e-3, 7.0]];
        d.r_tilde[1] = [[0.5, -0.02, 0.0], [0.001, 0.0, 0.0], [0.0, 0.0, -1.0]];
        project_linf(&mut d, 0.1, 0.01);
        assert!(d.max_abs_t() <= 0.1 && d.max_abs_r() <= 0.01);
        assert_eq!(d.t_tilde[0], [0.1, -0.05, -0.1]);
        let once = d.clone();
        project_linf(&mut d, 0.1, 0.01);
        assert_eq!(d, once);
    }

    #[test]
    fn poly_eval_endpoints() {
        let beta = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0], [1.0, 1.0, 1.0]];
        let t = poly_eval(&beta, 5);
        assert_eq!(t[0], [1.0, 0.0, 0.0]);
        assert_eq!(t[4], [2.0, 3.0, 4.0]);
        let s: f64 = 0.25;
        assert!((t[1][2] - (3.0 * s * s + s * s * s)).abs() < 1e-15);
    }

    #[test]
    fn sign_of_zero_is_zero() {
        assert_eq!(sgn(0.0), 0.0);
        assert_eq!(sgn(-0.0), 0.0);
        assert_eq!(sgn(-2.0), -1.0);
    }
}
