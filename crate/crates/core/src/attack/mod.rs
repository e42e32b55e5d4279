//! Adversarial trajectory perturbation.
//!
//! A [`Perturbation`] holds one additive offset per packet: a 3x3 rotation
//! block `R̃(n)` and a translation `t̃(n)`, added entrywise to the frame-`n`
//! to keyframe-A transform during motion compensation. The rotation block is
//! not re-orthonormalized. In polynomial mode `t̃(n)` is a cubic in
//! normalized time `s = n / (N − 1)` with coefficients `beta`.

use alloc::vec::Vec;

use crate::autodiff::Tape;
use crate::detector::{Box3D, Branch, DetectorConfig};
use crate::error::{arg_err, Result};
use crate::geometry::{InterpolatedTrack, Mat3, Vec3};
use crate::sweep::{DeltaVars, Sweep};

mod baseline;
mod pgd;
mod regularize;

pub use baseline::{coordinate_attack, random_attack, RandomKind, RandomPerturbation};
pub use pgd::{
    attack_objective, pgd_attack, pgd_poly_attack, poly_delta_vars, poly_eval, project_linf, run_attack,
    AttackOutcome, LossTrace, ObjectiveContext,
};
pub use regularize::{
    chamfer, chamfer_points, diff_chamfer, diff_lp_distance, diff_smoothness, lp_distance,
    lp_distance_points, smoothness,
};

/// Which parts of the trajectory an attack may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PerturbMode {
    Translation,
    Rotation,
    Full,
    Polynomial,
}

impl PerturbMode {
    pub fn moves_translation(self) -> bool {
        !matches!(self, PerturbMode::Rotation)
    }

    pub fn moves_rotation(self) -> bool {
        matches!(self, PerturbMode::Rotation | PerturbMode::Full)
    }
}

/// Regularizer added to the attack objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Regularizer {
    None,
    /// Total variation of consecutive offsets, weighted by `lambda_s`.
    Smoothness,
    /// Per-point ℓp distance to the clean sweep, weighted by `lambda_d`.
    Lp,
    /// Chamfer distance to the clean sweep, weighted by `lambda_d`.
    Chamfer,
}

/// Per-packet trajectory offsets.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Perturbation {
    pub mode: PerturbMode,
    pub t_tilde: Vec<Vec3>,
    pub r_tilde: Vec<Mat3>,
    /// Rows are the coefficients of `1, s, s², s³`; columns are x, y, z.
    pub beta: [[f64; 3]; 4],
}

impl Perturbation {
    pub fn zeros(mode: PerturbMode, steps: usize) -> Self {
        Self {
            mode,
            t_tilde: alloc::vec![[0.0; 3]; steps],
            r_tilde: alloc::vec![[[0.0; 3]; 3]; steps],
            beta: [[0.0; 3]; 4],
        }
    }

    pub fn len(&self) -> usize {
        self.t_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_tilde.is_empty()
    }

    pub(crate) fn check_len(&self, steps: usize) -> Result<()> {
        if self.t_tilde.len() != steps || self.r_tilde.len() != steps {
            return Err(arg_err!(
                "perturbation has {} steps, expected {steps}",
                self.t_tilde.len()
            ));
        }
        Ok(())
    }

    pub fn max_abs_t(&self) -> f64 {
        self.t_tilde.iter().flatten().fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }

    pub fn max_abs_r(&self) -> f64 {
        self.r_tilde.iter().flatten().flatten().fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }

    /// Records every offset entry as a leaf: group `"delta.t"` (N×3) and
    /// `"delta.r"` (N×9, row-major per step).
    pub fn to_tape(&self, tape: &mut Tape) -> DeltaVars {
        let tv: Vec<f64> = self.t_tilde.iter().flatten().copied().collect();
        let rv: Vec<f64> = self.r_tilde.iter().flatten().flatten().copied().collect();
        let t = tape.param_group("delta.t", &tv);
        let r = tape.param_group("delta.r", &rv);
        DeltaVars {
            t: t.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
            r: r
                .chunks(9)
                .map(|c| [[c[0], c[1], c[2]], [c[3], c[4], c[5]], [c[6], c[7], c[8]]])
                .collect(),
        }
    }
}

/// Attack hyperparameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AttackConfig {
    pub mode: PerturbMode,
    pub branch: Branch,
    /// ℓ∞ budget on translation offsets, m.
    pub eps_t: f64,
    /// ℓ∞ budget on rotation-block entries.
    pub eps_r: f64,
    /// Signed-gradient step on translation offsets (and on `beta`), m.
    pub alpha_t: f64,
    pub alpha_r: f64,
    pub iters: usize,
    pub regularizer: Regularizer,
    pub lambda_s: f64,
    pub lambda_d: f64,
    pub lambda_t: f64,
    pub lambda_r: f64,
    /// Norm order for the smoothness and ℓp regularizers.
    pub p: f64,
    /// Per-coordinate budget of the point-coordinate baseline, m.
    pub eps_xyz: f64,
    /// Step of the point-coordinate baseline, m.
    pub alpha_xyz: f64,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            mode: PerturbMode::Full,
            branch: Branch::Classification,
            eps_t: 0.1,
            eps_r: 0.01,
            alpha_t: 0.1,
            alpha_r: 0.01,
            iters: 20,
            regularizer: Regularizer::None,
            lambda_s: 0.0,
            lambda_d: 0.0,
            lambda_t: 1.0,
            lambda_r: 1.0,
            p: 2.0,
            eps_xyz: 0.1,
            alpha_xyz: 0.01,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("eps_t", self.eps_t),
            ("eps_r", self.eps_r),
            ("alpha_t", self.alpha_t),
            ("alpha_r", self.alpha_r),
            ("eps_xyz", self.eps_xyz),
            ("alpha_xyz", self.alpha_xyz),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(arg_err!("{name} must be positive, got {v}"));
            }
        }
        if self.iters == 0 {
            return Err(arg_err!("iters must be positive"));
        }
        if !(self.p >= 1.0) {
            return Err(arg_err!("norm order p must be at least 1"));
        }
        for (name, v) in [
            ("lambda_s", self.lambda_s),
            ("lambda_d", self.lambda_d),
            ("lambda_t", self.lambda_t),
            ("lambda_r", self.lambda_r),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(arg_err!("{name} must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Inputs shared by every attack on one scene.
#[derive(Debug, Clone, Copy)]
pub struct AttackProblem<'a> {
    /// Sweep in capture frames.
    pub distorted: &'a Sweep,
    pub track: &'a InterpolatedTrack,
    /// Ground-truth boxes in keyframe A.
    pub labels: &'a [Box3D],
    pub detector: &'a DetectorConfig,
}
