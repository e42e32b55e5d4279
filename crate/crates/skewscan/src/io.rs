//! Pose text files, point binaries with their packet sidecar, and JSON
//! helpers.
//!
//! Pose files hold one pose per line, `stamp tx ty tz qw qx qy qz`, with `#`
//! starting a comment. Point files are consecutive little-endian `f32`
//! records `x y z intensity`; the sidecar `<file>.packets` lists the sweep
//! frame and one packet count per line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use skewscan_core::geometry::UNIT_TOLERANCE;
use skewscan_core::sweep::partition_packets;
use skewscan_core::{Packet, Pose, Quat, Sweep, SweepFrame};

use crate::error::{Error, Result};

const RECORD_BYTES: usize = 16;

pub fn parse_poses(text: &str, path: &Path) -> Result<Vec<Pose>> {
    let mut poses: Vec<Pose> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::format(path, format!("line {line_no}: {msg}"));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", fields.len())));
        }
        let mut v = [0.0f64; 8];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| err(format!("cannot parse {f:?} as a number")))?;
            if !slot.is_finite() {
                return Err(err(format!("non-finite value {f:?}")));
            }
        }
        let q = Quat::new(v[4], v[5], v[6], v[7]);
        if (q.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(err(format!("quaternion norm {} is not 1", q.norm())));
        }
        if let Some(prev) = poses.last().and_then(|p| p.stamp) {
            if v[0] <= prev {
                return Err(err(format!("stamp {} does not increase past {prev}", v[0])));
            }
        }
        poses.push(Pose { t: [v[1], v[2], v[3]], q, stamp: Some(v[0]) });
    }
    Ok(poses)
}

pub fn read_poses(path: &Path) -> Result<Vec<Pose>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_poses(&text, path)
}

/// Formats poses with 17 significant digits, enough to reproduce every value.
pub fn format_poses(poses: &[Pose]) -> Result<String> {
    let mut out = String::from("# stamp tx ty tz qw qx qy qz\n");
    let mut prev = f64::NEG_INFINITY;
    for (i, p) in poses.iter().enumerate() {
        let stamp = p.stamp.ok_or_else(|| Error::Usage(format!("pose {i} has no stamp")))?;
        if stamp <= prev {
            return Err(Error::Usage(format!("pose {i}: stamps must strictly increase")));
        }
        prev = stamp;
        let vals = [stamp, p.t[0], p.t[1], p.t[2], p.q.w, p.q.x, p.q.y, p.q.z];
        let line: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    Ok(out)
}

pub fn write_poses(poses: &[Pose], path: &Path) -> Result<()> {
    std::fs::write(path, format_poses(poses)?).map_err(|e| Error::io(path, e))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".packets");
    PathBuf::from(s)
}

fn parse_sidecar(text: &str, path: &Path) -> Result<(SweepFrame, Vec<usize>)> {
    let mut frame = SweepFrame::KeyframeA;
    let mut counts = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(tag) = line.strip_prefix("frame ") {
            frame = SweepFrame::from_tag(tag.trim())
                .ok_or_else(|| Error::format(path, format!("line {}: unknown frame {tag:?}", i + 1)))?;
            continue;
        }
        counts.push(
            line.parse()
                .map_err(|_| Error::format(path, format!("line {}: bad packet count {line:?}", i + 1)))?,
        );
    }
    if counts.is_empty() {
        return Err(Error::format(path, "no packet counts"));
    }
    Ok((frame, counts))
}

/// Decodes a point file. `packets` comes from the sidecar.
pub fn decode_points(bytes: &[u8], packets: &str, path: &Path) -> Result<Sweep> {
    let side = sidecar_path(path);
    let (frame, counts) = parse_sidecar(packets, &side)?;
    let total: usize = counts.iter().sum();
    if bytes.len() != total * RECORD_BYTES {
        return Err(Error::format(
            path,
            format!(
                "expected {} bytes for {total} points, found {}",
                total * RECORD_BYTES,
                bytes.len()
            ),
        ));
    }
    let mut records = bytes.chunks_exact(RECORD_BYTES).map(|r| {
        let f = |k: usize| f32::from_le_bytes(r[4 * k..4 * k + 4].try_into().unwrap());
        ([f(0) as f64, f(1) as f64, f(2) as f64], f(3))
    });
    let n = counts.len();
    let packets = counts
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let mut p = Packet::empty(k, (360.0 * k as f64 / n as f64, 360.0 * (k + 1) as f64 / n as f64));
            for (xyz, i) in records.by_ref().take(m) {
                p.points.push(xyz);
                p.intensity.push(i);
            }
            p
        })
        .collect();
    Ok(Sweep::new(packets, frame))
}

fn decode_records(bytes: &[u8], path: &Path) -> Result<(Vec<[f64; 3]>, Vec<f32>)> {
    if !bytes.len().is_multiple_of(RECORD_BYTES) {
        let whole = bytes.len() / RECORD_BYTES * RECORD_BYTES;
        return Err(Error::format(
            path,
            format!("expected a multiple of {RECORD_BYTES} bytes, found {} ({whole} usable)", bytes.len()),
        ));
    }
    let mut xyz = Vec::with_capacity(bytes.len() / RECORD_BYTES);
    let mut intensity = Vec::with_capacity(bytes.len() / RECORD_BYTES);
    for r in bytes.chunks_exact(RECORD_BYTES) {
        let f = |k: usize| f32::from_le_bytes(r[4 * k..4 * k + 4].try_into().unwrap());
        xyz.push([f(0) as f64, f(1) as f64, f(2) as f64]);
        intensity.push(f(3));
    }
    Ok((xyz, intensity))
}

/// Reads a point file and its sidecar. Without a sidecar the points are
/// taken to be in keyframe A and split into `fallback_packets` azimuth
/// sectors, which is only approximate for real captures.
pub fn read_points(path: &Path, fallback_packets: Option<usize>) -> Result<Sweep> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    match std::fs::read_to_string(&side) {
        Ok(text) => decode_points(&bytes, &text, path),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let n = fallback_packets.ok_or_else(|| Error::io(&side, e))?;
            log::warn!("{}: no sidecar, partitioning into {n} packets by azimuth", path.display());
            let (xyz, intensity) = decode_records(&bytes, path)?;
            Ok(partition_packets(&xyz, Some(&intensity), n, 0.0)?)
        }
        Err(e) => Err(Error::io(&side, e)),
    }
}

/// Encodes the sweep as `(point bytes, sidecar text)`. Coordinates are
/// narrowed to `f32`.
pub fn encode_points(sweep: &Sweep) -> (Vec<u8>, String) {
    let mut bytes = Vec::with_capacity(sweep.len() * RECORD_BYTES);
    for packet in &sweep.packets {
        for (p, i) in packet.points.iter().zip(&packet.intensity) {
            for v in [p[0] as f32, p[1] as f32, p[2] as f32, *i] {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let mut side = format!("# packet point counts\nframe {}\n", sweep.frame.tag());
    for packet in &sweep.packets {
        writeln!(side, "{}", packet.len()).unwrap();
    }
    (bytes, side)
}

pub fn write_points(sweep: &Sweep, path: &Path) -> Result<()> {
    let (bytes, side) = encode_points(sweep);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let sp = sidecar_path(path);
    std::fs::write(&sp, side).map_err(|e| Error::io(&sp, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_text(text: &str, path: &Path) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Result<Vec<Pose>> {
        parse_poses(s, Path::new("poses.txt"))
    }

    #[test]
    fn identity_line() {
        let poses = p("0.0 0 0 0 1 0 0 0").unwrap();
        assert_eq!(poses, vec![Pose::identity().with_stamp(0.0)]);
    }

    #[test]
    fn comments_and_blanks() {
        let poses = p("# header\n\n0 1 2 3 1 0 0 0  # trailing\n0.5 0 0 0 0 1 0 0\n").unwrap();
        assert_eq!(poses.len(), 2);
        assert_eq!(poses[0].t, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            ("0 0 0 0 1 0 0\n", 1, "8 fields"),
            ("0 0 0 0 1 0 0 0\n0 0 0 0 1 0 0 0\n", 2, "does not increase"),
            ("# c\n0 0 0 0 1.01 0 0 0\n", 2, "norm"),
            ("0 0 x 0 1 0 0 0\n", 1, "parse"),
        ];
        for (text, line, what) in cases {
            let msg = p(text).unwrap_err().to_string();
            assert!(msg.contains(&format!("line {line}:")) && msg.contains(what), "{msg}");
        }
    }

    #[test]
    fn empty_points_and_zero_counts() {
        let s = decode_points(&[], "0\n0\n0\n", Path::new("e.bin")).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.packets.len(), 3);
    }

    #[test]
    fn size_mismatch_names_byte_counts() {
        let msg = decode_points(&[0u8; 40], "3\n", Path::new("t.bin")).unwrap_err().to_string();
        assert!(msg.contains("expected 48 bytes") && msg.contains("found 40"), "{msg}");
    }

    #[test]
    fn unknown_frame_rejected() {
        assert!(decode_points(&[], "frame sideways\n0\n", Path::new("t.bin")).is_err());
    }
}
