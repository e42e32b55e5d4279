//! Trajectory smoothness and point-cloud distances, in plain and taped form.

use alloc::vec::Vec;

use super::Perturbation;
use crate::autodiff::{Tape, Var};
use crate::error::{arg_err, Result};
use crate::geometry::{norm, sub, Vec3};
use crate::kdtree::KdTree;
use crate::math;
use crate::sweep::{DeltaVars, DiffSweep, Sweep};

fn pnorm_sum(terms: impl Iterator<Item = f64>, p: f64) -> f64 {
    let s: f64 = terms.map(|x| if p == 2.0 { x * x } else { math::powf(x, p) }).sum();
    if p == 2.0 {
        math::sqrt(s)
    } else {
        math::powf(s, 1.0 / p)
    }
}

/// `λ_t (Σ_n ‖t̃(n) − t̃(n−1)‖₂^p)^{1/p} + λ_R (Σ_n ‖R̃(n) − R̃(n−1)‖_F^p)^{1/p}`.
pub fn smoothness(delta: &Perturbation, lambda_t: f64, lambda_r: f64, p: f64) -> f64 {
    let dt = delta.t_tilde.windows(2).map(|w| norm(sub(w[1], w[0])));
    let dr = delta.r_tilde.windows(2).map(|w| {
        let s: f64 = (0..9)
            .map(|i| {
                let d = w[1][i / 3][i % 3] - w[0][i / 3][i % 3];
                d * d
            })
            .sum();
        math::sqrt(s)
    });
    lambda_t * pnorm_sum(dt, p) + lambda_r * pnorm_sum(dr, p)
}

/// `(Σ_k ‖d_k‖^p)^{1/p}` over difference vectors given as tape handles.
/// For `p = 2` the inner norms are never formed, which keeps the all-zero
/// start away from the kink of each inner square root.
fn diff_pnorm_sum(tape: &mut Tape, diffs: &[Vec<Var>], p: f64) -> Var {
    let mut parts = Vec::with_capacity(diffs.len());
    for d in diffs {
        let sq = tape.dot(d, d);
        parts.push(if p == 2.0 {
            sq
        } else {
            let n = tape.sqrt(sq);
            tape.powf(n, p)
        });
    }
    let total = tape.sum(&parts);
    if p == 2.0 {
        tape.sqrt(total)
    } else {
        tape.powf(total, 1.0 / p)
    }
}

/// Taped [`smoothness`].
pub fn diff_smoothness(tape: &mut Tape, delta: &DeltaVars, lambda_t: f64, lambda_r: f64, p: f64) -> Var {
    let mut dt = Vec::new();
    let mut dr = Vec::new();
    for n in 1..delta.len() {
        dt.push((0..3).map(|i| tape.sub(delta.t[n][i], delta.t[n - 1][i])).collect());
        dr.push(
            (0..9)
                .map(|i| tape.sub(delta.r[n][i / 3][i % 3], delta.r[n - 1][i / 3][i % 3]))
                .collect(),
        );
    }
    let st = diff_pnorm_sum(tape, &dt, p);
    let sr = diff_pnorm_sum(tape, &dr, p);
    tape.linear(0.0, &[(st, lambda_t), (sr, lambda_r)])
}

/// `(mean_i ‖a_i − b_i‖₂^p)^{1/p}` over corresponding points.
pub fn lp_distance_points(a: &[Vec3], b: &[Vec3], p: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(arg_err!("point sets differ in size: {} vs {}", a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    if !(p >= 1.0) {
        return Err(arg_err!("norm order p must be at least 1"));
    }
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = norm(sub(*x, *y));
            if p == 2.0 {
                d * d
            } else {
                math::powf(d, p)
            }
        })
        .sum();
    Ok(math::powf(s / a.len() as f64, 1.0 / p))
}

/// ℓp distance between two sweeps with identical packet layout.
pub fn lp_distance(a: &Sweep, b: &Sweep, p: f64) -> Result<f64> {
    if a.packet_counts() != b.packet_counts() {
        return Err(arg_err!("sweeps have different packet layouts"));
    }
    lp_distance_points(&a.flat_points(), &b.flat_points(), p)
}

/// Taped ℓp distance from `clean` to the perturbed sweep.
pub fn diff_lp_distance(tape: &mut Tape, clean: &[Vec3], perturbed: &DiffSweep, p: f64) -> Result<Var> {
    if clean.len() != perturbed.len() {
        return Err(arg_err!("point sets differ in size: {} vs {}", clean.len(), perturbed.len()));
    }
    if clean.is_empty() {
        return Ok(tape.constant(0.0));
    }
    let m = clean.len() as f64;
    let mut parts = Vec::with_capacity(clean.len());
    for (c, v) in clean.iter().zip(&perturbed.points) {
        let d: Vec<Var> = (0..3).map(|k| tape.add_const(v[k], -c[k])).collect();
        let sq = tape.dot(&d, &d);
        parts.push(if p == 2.0 {
            sq
        } else {
            let n = tape.sqrt(sq);
            tape.powf(n, p)
        });
    }
    let total = tape.sum(&parts);
    let mean = tape.mul_const(total, 1.0 / m);
    Ok(if p == 2.0 { tape.sqrt(mean) } else { tape.powf(mean, 1.0 / p) })
}

fn mean_nn(from: &[Vec3], to: &KdTree<'_>) -> f64 {
    let s: f64 = from.iter().map(|q| math::sqrt(to.nearest(q).map_or(0.0, |(_, d)| d))).sum();
    s / from.len() as f64
}

/// Sum of the two mean nearest-neighbour distances between point sets.
pub fn chamfer_points(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(arg_err!("chamfer distance needs two non-empty point sets"));
    }
    let (ta, tb) = (KdTree::build(a), KdTree::build(b));
    Ok(mean_nn(a, &tb) + mean_nn(b, &ta))
}

pub fn chamfer(a: &Sweep, b: &Sweep) -> Result<f64> {
    chamfer_points(&a.flat_points(), &b.flat_points())
}

/// Taped chamfer distance. Nearest-neighbour correspondences are found on
/// current values and held fixed; only the distances are differentiated.
pub fn diff_chamfer(
    tape: &mut Tape,
    clean: &[Vec3],
    clean_tree: &KdTree<'_>,
    perturbed: &DiffSweep,
) -> Result<Var> {
    if clean.is_empty() || perturbed.is_empty() {
        return Err(arg_err!("chamfer distance needs two non-empty point sets"));
    }
    let values = perturbed.values(tape);
    let ptree = KdTree::build(&values);
    let mut fwd = Vec::with_capacity(clean.len());
    for c in clean {
        let (j, _) = ptree.nearest(c).expect("non-empty");
        fwd.push(point_dist(tape, &perturbed.points[j], c));
    }
    let mut bwd = Vec::with_capacity(values.len());
    for (v, pv) in perturbed.points.iter().zip(&values) {
        let (j, _) = clean_tree.nearest(pv).expect("non-empty");
        bwd.push(point_dist(tape, v, &clean[j]));
    }
    let a = tape.sum(&fwd);
    let b = tape.sum(&bwd);
    Ok(tape.linear(0.0, &[(a, 1.0 / fwd.len() as f64), (b, 1.0 / bwd.len() as f64)]))
}

fn point_dist(tape: &mut Tape, v: &[Var; 3], c: &Vec3) -> Var {
    let d: Vec<Var> = (0..3).map(|k| tape.add_const(v[k], -c[k])).collect();
    let sq = tape.dot(&d, &d);
    tape.sqrt(sq)
}
