//! Packet partitioning, motion-distortion simulation and motion
//! compensation, both numeric and recorded on an autodiff tape.

use alloc::vec::Vec;

use crate::attack::Perturbation;
use crate::autodiff::{Tape, Var};
use crate::error::{arg_err, Result};
use crate::geometry::{InterpolatedTrack, Mat3, RigidTransform, Vec3};
use crate::math;

/// Which coordinate frames the packets of a sweep are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SweepFrame {
    /// Every packet in the keyframe-A sensor frame (compensated).
    KeyframeA,
    /// Packet `n` in the frame of interpolated pose `n` (distorted).
    CaptureFrames,
}

impl SweepFrame {
    pub fn tag(self) -> &'static str {
        match self {
            SweepFrame::KeyframeA => "keyframe-A",
            SweepFrame::CaptureFrames => "capture-frames",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "keyframe-A" => Some(SweepFrame::KeyframeA),
            "capture-frames" => Some(SweepFrame::CaptureFrames),
            _ => None,
        }
    }
}

/// Points returned during one azimuth sector.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Packet {
    pub frame_index: usize,
    /// Azimuth sector `[lo, hi)` in degrees.
    pub azimuth_range: (f64, f64),
    pub points: Vec<Vec3>,
    /// One value per point; passes through every transform untouched.
    pub intensity: Vec<f32>,
}

impl Packet {
    pub fn empty(frame_index: usize, azimuth_range: (f64, f64)) -> Self {
        Self { frame_index, azimuth_range, points: Vec::new(), intensity: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A full revolution stored as `N` packets in `frame_index` order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sweep {
    pub packets: Vec<Packet>,
    pub frame: SweepFrame,
}

impl Sweep {
    pub fn new(packets: Vec<Packet>, frame: SweepFrame) -> Self {
        Self { packets, frame }
    }

    /// Total point count `m`.
    pub fn len(&self) -> usize {
        self.packets.iter().map(Packet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.iter().all(Packet::is_empty)
    }

    pub fn packet_counts(&self) -> Vec<usize> {
        self.packets.iter().map(Packet::len).collect()
    }

    /// All points in packet order.
    pub fn points(&self) -> impl Iterator<Item = &Vec3> + '_ {
        self.packets.iter().flat_map(|p| p.points.iter())
    }

    pub fn flat_points(&self) -> Vec<Vec3> {
        self.points().copied().collect()
    }

    /// Replaces point coordinates in packet order, keeping the structure.
    pub fn with_points(&self, points: &[Vec3]) -> Result<Sweep> {
        if points.len() != self.len() {
            return Err(arg_err!("expected {} points, got {}", self.len(), points.len()));
        }
        let mut out = self.clone();
        let mut k = 0;
        for p in &mut out.packets {
            let m = p.points.len();
            p.points.copy_from_slice(&points[k..k + m]);
            k += m;
        }
        Ok(out)
    }
}

/// Sensor-frame azimuth of `p` in degrees, counter-clockwise from +x, in [0, 360).
pub fn azimuth_deg(p: &Vec3) -> f64 {
    let a = math::atan2(p[1], p[0]).to_degrees();
    if a < 0.0 {
        a + 360.0
    } else {
        a
    }
}

fn packet_index(az: f64, start: f64, n: usize) -> usize {
    let width = 360.0 / n as f64;
    let mut rel = libm::fmod(az - start, 360.0);
    if rel < 0.0 {
        rel += 360.0;
    }
    let k = math::floor(rel / width) as usize;
    k.min(n - 1)
}

/// Splits a keyframe-A sweep into `n` packets by azimuth sector, starting at
/// `start_azimuth` degrees. Sector `k` covers `[start + k·360/n, start + (k+1)·360/n)`.
pub fn partition_packets(
    points: &[Vec3],
    intensity: Option<&[f32]>,
    n: usize,
    start_azimuth: f64,
) -> Result<Sweep> {
    if n == 0 {
        return Err(arg_err!("packet count must be positive"));
    }
    if let Some(i) = intensity {
        if i.len() != points.len() {
            return Err(arg_err!("{} intensities for {} points", i.len(), points.len()));
        }
    }
    let width = 360.0 / n as f64;
    let mut packets: Vec<Packet> = (0..n)
        .map(|k| {
            let lo = start_azimuth + k as f64 * width;
            Packet::empty(k, (lo, lo + width))
        })
        .collect();
    for (i, p) in points.iter().enumerate() {
        let k = packet_index(azimuth_deg(p), start_azimuth, n);
        packets[k].points.push(*p);
        packets[k].intensity.push(intensity.map_or(0.0, |v| v[i]));
    }
    Ok(Sweep::new(packets, SweepFrame::KeyframeA))
}

fn check_lengths(sweep: &Sweep, track: &InterpolatedTrack) -> Result<()> {
    if sweep.packets.len() != track.len() {
        return Err(arg_err!(
            "sweep has {} packets but the track has {} frames",
            sweep.packets.len(),
            track.len()
        ));
    }
    Ok(())
}

/// Re-expresses packet `n` of a keyframe-A sweep in capture frame `n`.
pub fn distort(sweep_at_a: &Sweep, track: &InterpolatedTrack) -> Result<Sweep> {
    if sweep_at_a.frame != SweepFrame::KeyframeA {
        return Err(arg_err!("distort expects a keyframe-A sweep"));
    }
    check_lengths(sweep_at_a, track)?;
    let mut out = sweep_at_a.clone();
    out.frame = SweepFrame::CaptureFrames;
    for (n, packet) in out.packets.iter_mut().enumerate() {
        let t = track.a_to_frame(n);
        for p in &mut packet.points {
            *p = t.apply(*p);
        }
    }
    Ok(out)
}

#[inline]
fn perturbed_apply(t: &RigidTransform, dr: &Mat3, dt: &Vec3, p: Vec3) -> Vec3 {
    let base = t.apply(p);
    core::array::from_fn(|i| {
        base[i] + p[0] * dr[i][0] + p[1] * dr[i][1] + p[2] * dr[i][2] + dt[i]
    })
}

/// Maps every packet back into keyframe A. With `delta`, the rotation and
/// translation offsets of step `n` are added entrywise to the frame-`n` to
/// keyframe-A transform before it is applied.
pub fn compensate(
    distorted: &Sweep,
    track: &InterpolatedTrack,
    delta: Option<&Perturbation>,
) -> Result<Sweep> {
    if distorted.frame != SweepFrame::CaptureFrames {
        return Err(arg_err!("compensate expects a capture-frames sweep"));
    }
    check_lengths(distorted, track)?;
    if let Some(d) = delta {
        d.check_len(track.len())?;
    }
    let mut out = distorted.clone();
    out.frame = SweepFrame::KeyframeA;
    for (n, packet) in out.packets.iter_mut().enumerate() {
        let t = track.frame_to_a(n);
        match delta {
            None => {
                for p in &mut packet.points {
                    *p = t.apply(*p);
                }
            }
            Some(d) => {
                let (dr, dt) = (&d.r_tilde[n], &d.t_tilde[n]);
                for p in &mut packet.points {
                    *p = perturbed_apply(&t, dr, dt, *p);
                }
            }
        }
    }
    Ok(out)
}

/// Tape handles for a per-step perturbation.
#[derive(Debug, Clone)]
pub struct DeltaVars {
    pub t: Vec<[Var; 3]>,
    pub r: Vec<[[Var; 3]; 3]>,
}

impl DeltaVars {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Compensated sweep whose coordinates are tape nodes.
#[derive(Debug, Clone)]
pub struct DiffSweep {
    /// Points in packet order.
    pub points: Vec<[Var; 3]>,
    /// `offsets[n]..offsets[n+1]` indexes packet `n`.
    pub offsets: Vec<usize>,
}

impl DiffSweep {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self, tape: &Tape) -> Vec<Vec3> {
        self.points
            .iter()
            .map(|p| [tape.value(p[0]), tape.value(p[1]), tape.value(p[2])])
            .collect()
    }
}

/// Motion compensation recorded on `tape`, so the output coordinates are
/// differentiable in the perturbation handles. Values are bitwise equal to
/// [`compensate`] with the same perturbation.
pub fn sweep_as_function(
    distorted: &Sweep,
    track: &InterpolatedTrack,
    delta: &DeltaVars,
    tape: &mut Tape,
) -> Result<DiffSweep> {
    if distorted.frame != SweepFrame::CaptureFrames {
        return Err(arg_err!("sweep_as_function expects a capture-frames sweep"));
    }
    check_lengths(distorted, track)?;
    if delta.len() != track.len() || delta.r.len() != track.len() {
        return Err(arg_err!(
            "perturbation has {} steps, track has {}",
            delta.len(),
            track.len()
        ));
    }
    let mut points = Vec::with_capacity(distorted.len());
    let mut offsets = Vec::with_capacity(distorted.packets.len() + 1);
    offsets.push(0);
    for (n, packet) in distorted.packets.iter().enumerate() {
        let t = track.frame_to_a(n);
        let (dr, dt) = (&delta.r[n], &delta.t[n]);
        for &p in &packet.points {
            let base = t.apply(p);
            let out: [Var; 3] = core::array::from_fn(|i| {
                tape.linear(
                    base[i],
                    &[(dr[i][0], p[0]), (dr[i][1], p[1]), (dr[i][2], p[2]), (dt[i], 1.0)],
                )
            });
            points.push(out);
        }
        offsets.push(points.len());
    }
    Ok(DiffSweep { points, offsets })
}
