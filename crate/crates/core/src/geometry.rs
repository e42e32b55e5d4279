//! Quaternions, rigid transforms and two-keyframe pose interpolation.
//!
//! Convention: the transform built from a [`Pose`] maps points expressed in
//! that pose's sensor frame into the world frame. With `T_wn` for frame `n`
//! and `T_wa` for keyframe A, `relative_transform(T_wn, T_wa)` is the map
//! from keyframe-A coordinates into frame-`n` coordinates.

use alloc::vec::Vec;

use crate::error::{arg_err, Result};
use crate::math;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Slerp falls back to normalized linear interpolation below this angle.
pub const SLERP_MIN_ANGLE: f64 = 1e-7;

/// Tolerance on |q| accepted by [`quat_to_rotmat`].
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    math::sqrt(dot(a, a))
}

#[inline]
pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Quaternion stored as `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = norm(axis);
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let s = math::sin(0.5 * angle) / n;
        Self::new(math::cos(0.5 * angle), axis[0] * s, axis[1] * s, axis[2] * s)
    }

    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_axis_angle([0.0, 0.0, 1.0], yaw)
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.dot(self))
    }

    pub fn dot(&self, o: &Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    fn scaled(&self, s: f64) -> Quat {
        Quat::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    fn plus(&self, o: &Quat) -> Quat {
        Quat::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }

    /// Unit quaternion with `w >= 0`; `None` for a zero or non-finite input.
    pub fn normalized(&self) -> Option<Quat> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return None;
        }
        let q = self.scaled(1.0 / n);
        Some(if q.w < 0.0 { q.scaled(-1.0) } else { q })
    }

    /// Hamilton product `self * o`.
    pub fn mul(&self, o: &Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    pub fn conjugate(&self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Geodesic angle between two unit quaternions as rotations, in [0, pi].
    pub fn angle_to(&self, o: &Quat) -> f64 {
        let d = libm::fabs(self.dot(o)).min(1.0);
        2.0 * math::acos(d)
    }

    /// Heading about +z, assuming the rotation is (close to) yaw-only.
    pub fn yaw(&self) -> f64 {
        math::atan2(
            2.0 * (self.w * self.z + self.x * self.y),
            1.0 - 2.0 * (self.y * self.y + self.z * self.z),
        )
    }
}

/// A keyframe pose: sensor position and orientation in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose {
    pub t: Vec3,
    pub q: Quat,
    pub stamp: Option<f64>,
}

impl Pose {
    /// Builds a pose, normalizing `q` and canonicalizing it to `w >= 0`.
    pub fn new(t: Vec3, q: Quat) -> Result<Self> {
        let q = q
            .normalized()
            .ok_or_else(|| arg_err!("quaternion {:?} cannot be normalized", q))?;
        Ok(Self { t, q, stamp: None })
    }

    pub fn with_stamp(mut self, stamp: f64) -> Self {
        self.stamp = Some(stamp);
        self
    }

    pub fn identity() -> Self {
        Self { t: [0.0; 3], q: Quat::IDENTITY, stamp: None }
    }
}

/// Rotation matrix plus translation. Maps `p` to `R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RigidTransform {
    pub r: Mat3,
    pub t: Vec3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform { r: IDENTITY3, t: [0.0; 3] };

    pub fn new(r: Mat3, t: Vec3) -> Self {
        Self { r, t }
    }

    pub fn translation(t: Vec3) -> Self {
        Self { r: IDENTITY3, t }
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        add(mat_vec(&self.r, p), self.t)
    }

    /// Closed-form rigid inverse `(R^T, -R^T t)`.
    pub fn inverse(&self) -> Self {
        let rt = transpose(&self.r);
        let t = mat_vec(&rt, self.t);
        Self { r: rt, t: [-t[0], -t[1], -t[2]] }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            r: mat_mul(&self.r, &other.r),
            t: self.apply(other.t),
        }
    }

    /// Homogeneous 4x4 matrix, row-major.
    pub fn to_matrix4(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for (row, (r, t)) in m.iter_mut().zip(self.r.iter().zip(self.t)) {
            row[..3].copy_from_slice(r);
            row[3] = t;
        }
        m[3][3] = 1.0;
        m
    }

    /// Largest entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max(libm::fabs(self.r[i][j] - other.r[i][j]));
            }
            d = d.max(libm::fabs(self.t[i] - other.t[i]));
        }
        d
    }
}

/// Linear interpolation of the translation at step `n` of `steps`.
pub fn lerp_translation(ta: Vec3, tb: Vec3, steps: usize, n: usize) -> Result<Vec3> {
    if steps < 2 {
        return Err(arg_err!("interpolation needs at least 2 steps, got {steps}"));
    }
    if n >= steps {
        return Err(arg_err!("step index {n} out of range for {steps} steps"));
    }
    let f = n as f64 / steps as f64;
    Ok([
        ta[0] + (tb[0] - ta[0]) * f,
        ta[1] + (tb[1] - ta[1]) * f,
        ta[2] + (tb[2] - ta[2]) * f,
    ])
}

/// Shortest-arc spherical linear interpolation at fraction `u`.
///
/// Nearly identical endpoints (angle below [`SLERP_MIN_ANGLE`]) use
/// normalized linear interpolation instead.
pub fn slerp(qa: Quat, qb: Quat, u: f64) -> Quat {
    let mut qb = qb;
    let mut d = qa.dot(&qb);
    if d < 0.0 {
        qb = qb.scaled(-1.0);
        d = -d;
    }
    let theta = math::acos(d.min(1.0));
    let q = if theta < SLERP_MIN_ANGLE {
        qa.scaled(1.0 - u).plus(&qb.scaled(u))
    } else {
        let s = math::sin(theta);
        qa.scaled(math::sin((1.0 - u) * theta) / s)
            .plus(&qb.scaled(math::sin(u * theta) / s))
    };
    let n = q.norm();
    q.scaled(1.0 / n)
}

/// Standard unit-quaternion rotation matrix.
pub fn quat_to_rotmat(q: Quat) -> Result<Mat3> {
    let n = q.norm();
    if !(libm::fabs(n - 1.0) <= UNIT_TOLERANCE) {
        return Err(arg_err!("quaternion norm {n} is not 1"));
    }
    let Quat { w, x, y, z } = q;
    Ok([
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ])
}

pub fn pose_to_transform(p: &Pose) -> Result<RigidTransform> {
    Ok(RigidTransform::new(quat_to_rotmat(p.q)?, p.t))
}

/// `ta⁻¹ ∘ tb`. With `ta = T_wn`, `tb = T_wa` this is the keyframe-A to
/// frame-`n` transform.
pub fn relative_transform(ta: &RigidTransform, tb: &RigidTransform) -> RigidTransform {
    ta.inverse().compose(tb)
}

/// The `N` intermediate sensor poses between two keyframes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterpolatedTrack {
    transforms: Vec<RigidTransform>,
}

impl InterpolatedTrack {
    /// Wraps frame-to-world transforms, one per packet.
    pub fn from_transforms(transforms: Vec<RigidTransform>) -> Result<Self> {
        if transforms.is_empty() {
            return Err(arg_err!("a track needs at least one transform"));
        }
        Ok(Self { transforms })
    }

    /// `n` copies of the same pose (stationary sensor).
    pub fn stationary(pose: &RigidTransform, n: usize) -> Self {
        Self { transforms: alloc::vec![*pose; n.max(1)] }
    }

    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }

    /// Frame-to-world transform of frame `n`.
    pub fn frame(&self, n: usize) -> &RigidTransform {
        &self.transforms[n]
    }

    pub fn transforms(&self) -> &[RigidTransform] {
        &self.transforms
    }

    /// Keyframe-A to frame-`n` transform.
    pub fn a_to_frame(&self, n: usize) -> RigidTransform {
        relative_transform(&self.transforms[n], &self.transforms[0])
    }

    /// Frame-`n` to keyframe-A transform, the inverse of [`Self::a_to_frame`].
    pub fn frame_to_a(&self, n: usize) -> RigidTransform {
        relative_transform(&self.transforms[0], &self.transforms[n])
    }
}

/// Interpolates `steps` frame transforms from keyframe `a` toward `b`.
pub fn interpolate_track(a: &Pose, b: &Pose, steps: usize) -> Result<InterpolatedTrack> {
    if steps < 2 {
        return Err(arg_err!("interpolation needs at least 2 steps, got {steps}"));
    }
    let mut transforms = Vec::with_capacity(steps);
    for n in 0..steps {
        let t = lerp_translation(a.t, b.t, steps, n)?;
        let q = slerp(a.q, b.q, n as f64 / steps as f64);
        transforms.push(RigidTransform::new(quat_to_rotmat(q)?, t));
    }
    Ok(InterpolatedTrack { transforms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
    use proptest::prelude::*;

    fn rodrigues(axis: Vec3, angle: f64, v: Vec3) -> Vec3 {
        // Independent axis-angle rotation of v.
        let k = scale(axis, 1.0 / norm(axis));
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        add(
            add(scale(v, c), scale(cross(k, v), s)),
            scale(k, dot(k, v) * (1.0 - c)),
        )
    }

    fn mat4_mul(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        m
    }

    fn mat4_inv_gauss(m: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
        let mut a = *m;
        let mut inv = [[0.0; 4]; 4];
        for (i, row) in inv.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for c in 0..4 {
            let p = (c..4)
                .max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())
                .unwrap();
            a.swap(c, p);
            inv.swap(c, p);
            let d = a[c][c];
            for j in 0..4 {
                a[c][j] /= d;
                inv[c][j] /= d;
            }
            for r in 0..4 {
                if r != c {
                    let f = a[r][c];
                    for j in 0..4 {
                        a[r][j] -= f * a[c][j];
                        inv[r][j] -= f * inv[c][j];
                    }
                }
            }
        }
        inv
    }

    fn random_quat() -> impl Strategy<Value = Quat> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| Quat::new(w, x, y, z).normalized().unwrap())
    }

    #[test]
    fn lerp_examples() {
        assert_eq!(lerp_translation([0.0; 3], [10.0, 0.0, 0.0], 100, 50).unwrap(), [5.0, 0.0, 0.0]);
        assert_eq!(lerp_translation([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 7, 4).unwrap(), [1.0, 2.0, 3.0]);
        let t = lerp_translation([0.0; 3], [1.5, 0.0, 0.0], 100, 99).unwrap();
        assert_abs_diff_eq!(t[0], 1.485, epsilon = 1e-12);
        assert!(lerp_translation([0.0; 3], [1.0; 3], 10, 10).is_err());
        assert!(lerp_translation([0.0; 3], [1.0; 3], 1, 0).is_err());
    }

    #[test]
    fn slerp_examples() {
        let q = Quat::from_axis_angle([1.0, 2.0, 3.0], 0.7);
        let s = slerp(q, q, 0.3);
        assert_abs_diff_eq!(s.angle_to(&q), 0.0, epsilon = 1e-9);

        let qa = Quat::IDENTITY;
        let qb = Quat::from_yaw(FRAC_PI_2);
        assert_abs_diff_eq!(slerp(qa, qb, 0.0).angle_to(&qa), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(slerp(qa, qb, 1.0).angle_to(&qb), 0.0, epsilon = 1e-7);
        let mid = slerp(qa, qb, 0.5);
        assert_abs_diff_eq!(mid.yaw(), FRAC_PI_4, epsilon = 1e-12);
        assert_abs_diff_eq!(mid.angle_to(&Quat::from_yaw(FRAC_PI_4)), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn slerp_takes_shortest_arc() {
        let qa = Quat::from_yaw(0.1);
        let qb = Quat::from_yaw(0.3);
        let flipped = Quat::new(-qb.w, -qb.x, -qb.y, -qb.z);
        let mid = slerp(qa, flipped, 0.5);
        assert_abs_diff_eq!(mid.angle_to(&Quat::from_yaw(0.2)), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn slerp_small_angle_falls_back() {
        let qa = Quat::from_yaw(0.2);
        let qb = Quat::from_yaw(0.2 + 1e-9);
        let q = slerp(qa, qb, 0.5);
        assert!(q.w.is_finite());
        assert_abs_diff_eq!(q.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rotmat_examples() {
        assert_eq!(quat_to_rotmat(Quat::IDENTITY).unwrap(), IDENTITY3);
        let m = quat_to_rotmat(Quat::from_axis_angle([1.0, 0.0, 0.0], PI)).unwrap();
        let expect = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(m[i][j], expect[i][j], epsilon = 1e-12);
            }
        }
        assert!(quat_to_rotmat(Quat::new(1.1, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn pose_constructor_canonicalizes() {
        let p = Pose::new([0.0; 3], Quat::new(-2.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(p.q, Quat::IDENTITY);
        assert!(Pose::new([0.0; 3], Quat::new(0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn pose_transform_examples() {
        assert_eq!(pose_to_transform(&Pose::identity()).unwrap(), RigidTransform::IDENTITY);
        let p = Pose::new([1.0, 0.0, 0.0], Quat::IDENTITY).unwrap();
        let t = pose_to_transform(&p).unwrap();
        assert_eq!(t.apply([0.0, 2.0, 0.0]), [1.0, 2.0, 0.0]);
    }

    #[test]
    fn relative_transform_examples() {
        let t = pose_to_transform(
            &Pose::new([1.0, -2.0, 0.5], Quat::from_axis_angle([0.3, 0.1, 1.0], 0.8)).unwrap(),
        )
        .unwrap();
        assert!(relative_transform(&t, &t).max_abs_diff(&RigidTransform::IDENTITY) < 1e-12);
        assert!(relative_transform(&RigidTransform::IDENTITY, &t).max_abs_diff(&t) < 1e-15);
    }

    #[test]
    fn interpolate_track_examples() {
        let a = Pose::new([0.0, 0.0, 1.8], Quat::IDENTITY).unwrap();
        let same = interpolate_track(&a, &a, 5).unwrap();
        assert_eq!(same.len(), 5);
        assert!(same.transforms().iter().all(|t| *t == same.transforms()[0]));
        assert!(interpolate_track(&a, &a, 1).is_err());

        let b = Pose::new([15.0, 0.0, 1.8], Quat::IDENTITY).unwrap();
        let track = interpolate_track(&a, &b, 100).unwrap();
        assert_eq!(track.len(), 100);
        assert_eq!(*track.frame(0), pose_to_transform(&a).unwrap());
        for n in 1..100 {
            let step = sub(track.frame(n).t, track.frame(n - 1).t);
            assert_abs_diff_eq!(step[0], 0.15, epsilon = 1e-12);
            assert_eq!(step[1], 0.0);
            assert_eq!(step[2], 0.0);
        }
    }

    #[test]
    fn track_last_frame_matches_direct_evaluation() {
        let a = Pose::new([0.0, 0.0, 1.8], Quat::from_yaw(0.1)).unwrap();
        let b = Pose::new([4.0, 1.0, 1.8], Quat::from_yaw(0.4)).unwrap();
        let n = 50;
        let track = interpolate_track(&a, &b, n).unwrap();
        let u = (n - 1) as f64 / n as f64;
        let direct = RigidTransform::new(
            quat_to_rotmat(Quat::from_yaw(0.1 + 0.3 * u)).unwrap(),
            [4.0 * u, u, 1.8],
        );
        assert!(track.frame(n - 1).max_abs_diff(&direct) < 1e-9);
        // One more step would land on B.
        let b_t = pose_to_transform(&b).unwrap();
        assert!(track.frame(n - 1).max_abs_diff(&b_t) < 0.1);
    }

    proptest! {
        #[test]
        fn slerp_stays_unit(qa in random_quat(), qb in random_quat(), u in 0.0..=1.0f64) {
            prop_assert!((slerp(qa, qb, u).norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn slerp_angle_is_additive(qa in random_quat(), qb in random_quat(), u in 0.0..=1.0f64) {
            let theta = qa.angle_to(&qb);
            let q = slerp(qa, qb, u);
            prop_assert!((qa.angle_to(&q) - u * theta).abs() < 1e-7);
        }

        #[test]
        fn rotmat_matches_axis_angle(
            ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in -1.0..1.0f64, angle in -3.1..3.1f64,
        ) {
            prop_assume!(ax * ax + ay * ay + az * az > 1e-3);
            let axis = [ax, ay, az];
            let m = quat_to_rotmat(Quat::from_axis_angle(axis, angle)).unwrap();
            for e in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
                let a = mat_vec(&m, e);
                let b = rodrigues(axis, angle, e);
                for k in 0..3 {
                    prop_assert!((a[k] - b[k]).abs() < 1e-12);
                }
            }
            let rtr = mat_mul(&transpose(&m), &m);
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((rtr[i][j] - IDENTITY3[i][j]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn transform_inverse_composes_to_identity(
            q in random_quat(), tx in -50.0..50.0f64, ty in -50.0..50.0f64, tz in -5.0..5.0f64,
        ) {
            let t = pose_to_transform(&Pose::new([tx, ty, tz], q).unwrap()).unwrap();
            let id = t.compose(&t.inverse());
            prop_assert!(id.max_abs_diff(&RigidTransform::IDENTITY) < 1e-9);
            let inv4 = mat4_inv_gauss(&t.to_matrix4());
            let got = t.inverse().to_matrix4();
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((inv4[i][j] - got[i][j]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn relative_transform_matches_homogeneous_oracle(
            qa in random_quat(), qb in random_quat(),
            ta in prop::array::uniform3(-20.0..20.0f64),
            tb in prop::array::uniform3(-20.0..20.0f64),
            p in prop::array::uniform3(-30.0..30.0f64),
        ) {
            let a = pose_to_transform(&Pose::new(ta, qa).unwrap()).unwrap();
            let b = pose_to_transform(&Pose::new(tb, qb).unwrap()).unwrap();
            let rel = relative_transform(&a, &b);
            let m = mat4_mul(&mat4_inv_gauss(&a.to_matrix4()), &b.to_matrix4());
            let ph = [p[0], p[1], p[2], 1.0];
            let got = rel.apply(p);
            for i in 0..3 {
                let want: f64 = (0..4).map(|k| m[i][k] * ph[k]).sum();
                prop_assert!((got[i] - want).abs() < 1e-9);
            }
            let round = rel.compose(&rel.inverse());
            prop_assert!(round.max_abs_diff(&RigidTransform::IDENTITY) < 1e-9);
        }
    }
}
