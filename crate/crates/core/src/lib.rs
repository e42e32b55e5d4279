//! Motion-distortion simulation and adversarial trajectory perturbation for
//! spinning LiDAR.
//!
//! A sweep is split into `N` azimuth packets, each captured at its own pose
//! interpolated between two keyframes. Motion compensation maps every packet
//! back into the first keyframe, which makes the compensated point cloud a
//! differentiable function of the per-packet transforms. The [`attack`]
//! module perturbs those transforms with projected gradient descent against
//! the differentiable [`detector`], and [`metrics`] scores the damage.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. File formats and the command line live in the `skewscan` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod attack;
pub mod autodiff;
pub mod detector;
pub mod geometry;
pub mod kdtree;
pub mod metrics;
pub mod scene;
pub mod sweep;

mod error;
mod math;

pub use crate::error::{Error, Result};
pub use crate::geometry::{InterpolatedTrack, Pose, Quat, RigidTransform, Vec3};
pub use crate::sweep::{Packet, Sweep, SweepFrame};
