//! Synthetic driving scenes and a spinning-LiDAR raycaster.
//!
//! World frame: ground plane at `z = ground_z` (0 by default), sensor mounted
//! [`SENSOR_HEIGHT`] above it. The raycaster casts every ray of packet `n`
//! from pose `n`, so its output is natively motion-distorted.

use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::detector::Box3D;
use crate::error::{arg_err, Error, Result};
use crate::geometry::{mat_vec, InterpolatedTrack, Pose, Quat, Vec3};
use crate::math;
use crate::metrics::iou3d;
use crate::sweep::{Packet, Sweep, SweepFrame};

/// Sensor height above the ground plane, m.
pub const SENSOR_HEIGHT: f64 = 1.8;

const NOMINAL_SIZE: Vec3 = [4.5, 1.9, 1.7];
const PLACEMENT_TRIES_PER_VEHICLE: usize = 500;
/// Free space kept between placed vehicles, m.
const PLACEMENT_GAP: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Vehicle {
    pub id: u32,
    pub bbox: Box3D,
}

/// Placement annulus around the world origin, bird's-eye distances in m.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Extents {
    /// Every box footprint stays at least this far from the origin.
    pub min_range: f64,
    /// Box centers lie within this distance of the origin.
    pub max_range: f64,
}

impl Default for Extents {
    fn default() -> Self {
        Self { min_range: 10.0, max_range: 45.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scene {
    pub vehicles: Vec<Vehicle>,
    /// Ground plane height in the world frame, m.
    pub ground_z: f64,
    pub extents: Extents,
    pub seed: u64,
}

impl Scene {
    pub fn boxes(&self) -> Vec<Box3D> {
        self.vehicles.iter().map(|v| v.bbox).collect()
    }
}

/// Rejection-samples `n_vehicles` car-sized boxes resting on the ground with
/// uniform heading and non-overlapping footprints.
pub fn generate_scene(seed: u64, n_vehicles: usize, extents: Extents) -> Result<Scene> {
    if !(extents.min_range >= 0.0 && extents.max_range > extents.min_range) {
        return Err(arg_err!(
            "extents need 0 <= min_range < max_range, got {} and {}",
            extents.min_range,
            extents.max_range
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0f64, 1.0).map_err(|e| arg_err!("{e}"))?;
    let jitter = Uniform::new_inclusive(0.95f64, 1.05).map_err(|e| arg_err!("{e}"))?;
    let mut vehicles: Vec<Vehicle> = Vec::with_capacity(n_vehicles);
    let mut tries = 0;
    while vehicles.len() < n_vehicles {
        if tries == PLACEMENT_TRIES_PER_VEHICLE * n_vehicles {
            return Err(Error::Placement { placed: vehicles.len(), requested: n_vehicles });
        }
        tries += 1;
        let size: Vec3 = core::array::from_fn(|k| NOMINAL_SIZE[k] * jitter.sample(&mut rng));
        let yaw = (2.0 * unit.sample(&mut rng) - 1.0) * core::f64::consts::PI;
        let az = 2.0 * core::f64::consts::PI * unit.sample(&mut rng);
        let radius = 0.5 * math::sqrt(size[0] * size[0] + size[1] * size[1]);
        let lo = extents.min_range + radius;
        if lo > extents.max_range {
            continue;
        }
        // Uniform over the annulus area.
        let r = math::sqrt(lo * lo + unit.sample(&mut rng) * (extents.max_range * extents.max_range - lo * lo));
        let center = [r * math::cos(az), r * math::sin(az), 0.5 * size[2]];
        let bbox = Box3D::new(center, size, yaw)?;
        let padded = Box3D::new(center, [size[0] + PLACEMENT_GAP, size[1] + PLACEMENT_GAP, size[2]], yaw)?;
        if vehicles.iter().any(|v| iou3d(&padded, &v.bbox) > 0.0) {
            continue;
        }
        vehicles.push(Vehicle { id: vehicles.len() as u32, bbox });
    }
    Ok(Scene { vehicles, ground_z: 0.0, extents, seed })
}

/// Spinning multi-beam LiDAR.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SensorModel {
    /// Beam elevations in degrees, strictly increasing.
    pub elevations_deg: Vec<f64>,
    pub max_range: f64,
    /// Revolutions per second.
    pub rotation_rate_hz: f64,
    /// Azimuth resolution; rays are cast at `k / rays_per_degree` degrees.
    pub rays_per_degree: u32,
    /// Emit returns from the ground plane.
    pub ground: bool,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self::uniform(32, -25.0, 5.0)
    }
}

impl SensorModel {
    /// `beams` elevations evenly spaced over `[lo_deg, hi_deg]`.
    pub fn uniform(beams: usize, lo_deg: f64, hi_deg: f64) -> Self {
        let step = if beams > 1 { (hi_deg - lo_deg) / (beams - 1) as f64 } else { 0.0 };
        Self {
            elevations_deg: (0..beams).map(|i| lo_deg + step * i as f64).collect(),
            max_range: 70.0,
            rotation_rate_hz: 2.0,
            rays_per_degree: 4,
            ground: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.elevations_deg.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(arg_err!("beam elevations must be strictly increasing"));
        }
        if self.elevations_deg.iter().any(|e| !(e.abs() < 90.0)) {
            return Err(arg_err!("beam elevations must lie in (-90, 90) degrees"));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(arg_err!("max_range must be positive"));
        }
        if !(self.rotation_rate_hz > 0.0) {
            return Err(arg_err!("rotation_rate_hz must be positive"));
        }
        if self.rays_per_degree == 0 {
            return Err(arg_err!("rays_per_degree must be positive"));
        }
        Ok(())
    }

    /// Seconds per revolution.
    pub fn sweep_duration(&self) -> f64 {
        1.0 / self.rotation_rate_hz
    }
}

/// Keyframe poses of a constant-speed circular arc. The start pose sits at
/// the origin, [`SENSOR_HEIGHT`] above ground, with a heading drawn from
/// `seed`; the end pose is `duration` seconds later.
pub fn generate_trajectory(seed: u64, speed: f64, duration: f64, curvature: f64) -> Result<(Pose, Pose)> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(arg_err!("duration must be positive, got {duration}"));
    }
    if !speed.is_finite() || !curvature.is_finite() {
        return Err(arg_err!("speed and curvature must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0f64, 1.0).map_err(|e| arg_err!("{e}"))?;
    let h0 = (2.0 * unit.sample(&mut rng) - 1.0) * core::f64::consts::PI;
    let s = speed * duration;
    let dh = curvature * s;
    let (dx, dy) = if libm::fabs(dh) < 1e-12 {
        (s * math::cos(h0), s * math::sin(h0))
    } else {
        (
            (math::sin(h0 + dh) - math::sin(h0)) / curvature,
            (math::cos(h0) - math::cos(h0 + dh)) / curvature,
        )
    };
    let a = Pose::new([0.0, 0.0, SENSOR_HEIGHT], Quat::from_yaw(h0))?.with_stamp(0.0);
    let b = Pose::new([dx, dy, SENSOR_HEIGHT], Quat::from_yaw(h0 + dh))?.with_stamp(duration);
    Ok((a, b))
}

/// Entry distance of a ray into a box via the slab test in the box frame.
/// Rays starting inside the box report no hit.
pub fn ray_box(origin: &Vec3, dir: &Vec3, bbox: &Box3D) -> Option<f64> {
    let o = bbox.to_local(origin);
    let (s, c) = (math::sin(bbox.yaw), math::cos(bbox.yaw));
    let d = [c * dir[0] + s * dir[1], -s * dir[0] + c * dir[1], dir[2]];
    let h = bbox.half();
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..3 {
        if d[k] == 0.0 {
            if libm::fabs(o[k]) > h[k] {
                return None;
            }
            continue;
        }
        let a = (-h[k] - o[k]) / d[k];
        let b = (h[k] - o[k]) / d[k];
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t0 <= t1 && t0 > 0.0).then_some(t0)
}

/// Casts one revolution. Packet `n` holds the returns of azimuths in
/// `[n, n+1) · 360/N` degrees cast from pose `n`, expressed in frame `n`.
/// Labels are the scene boxes in keyframe A.
pub fn raycast_sweep(
    scene: &Scene,
    track: &InterpolatedTrack,
    sensor: &SensorModel,
) -> Result<(Sweep, Vec<Box3D>)> {
    sensor.validate()?;
    let n = track.len();
    if n == 0 {
        return Err(arg_err!("track has no steps"));
    }
    let total = 360 * sensor.rays_per_degree as usize;
    let elev: Vec<(f64, f64)> = sensor
        .elevations_deg
        .iter()
        .map(|e| {
            let r = e.to_radians();
            (math::cos(r), math::sin(r))
        })
        .collect();
    let mut packets = Vec::with_capacity(n);
    for k in 0..n {
        let pose = track.frame(k);
        let lo_ray = (k * total).div_ceil(n);
        let hi_ray = ((k + 1) * total).div_ceil(n);
        let sector = (360.0 * k as f64 / n as f64, 360.0 * (k + 1) as f64 / n as f64);
        let mut packet = Packet::empty(k, sector);
        for ray in lo_ray..hi_ray {
            let az = (ray as f64 / sensor.rays_per_degree as f64).to_radians();
            let (sa, ca) = (math::sin(az), math::cos(az));
            for &(ce, se) in &elev {
                let local = [ce * ca, ce * sa, se];
                let dir = mat_vec(&pose.r, local);
                let mut best = sensor.max_range;
                let mut hit = false;
                for v in &scene.vehicles {
                    if let Some(t) = ray_box(&pose.t, &dir, &v.bbox) {
                        if t <= best {
                            best = t;
                            hit = true;
                        }
                    }
                }
                if sensor.ground && dir[2] < 0.0 {
                    let t = (scene.ground_z - pose.t[2]) / dir[2];
                    if t > 0.0 && t < best {
                        best = t;
                        hit = true;
                    }
                }
                if hit {
                    packet.points.push([best * local[0], best * local[1], best * local[2]]);
                    packet.intensity.push(0.0);
                }
            }
        }
        packets.push(packet);
    }
    let inv_a = track.frame(0).inverse();
    let heading_a = math::atan2(track.frame(0).r[1][0], track.frame(0).r[0][0]);
    let labels = scene
        .vehicles
        .iter()
        .map(|v| Box3D::new(inv_a.apply(v.bbox.center), v.bbox.size, v.bbox.yaw - heading_a))
        .collect::<Result<Vec<_>>>()?;
    Ok((Sweep::new(packets, SweepFrame::CaptureFrames), labels))
}
