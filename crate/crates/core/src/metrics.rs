//! Detection evaluation: 3D IoU, average precision under IoU or centre
//! distance matching, depth and point-count bins, and performance drop.
//!
//! AP uses all-point interpolation: the area under the precision envelope of
//! the precision/recall curve. Matching is greedy in descending score
//! order; every ground truth matches at most once.
//!
//! A bin is evaluated by marking ground truths outside it as ignored.
//! Detections matched to an ignored ground truth are dropped, and unmatched
//! detections count as false positives only in the bin their own depth or
//! point count falls into.

use alloc::string::String;
use alloc::vec::Vec;

use crate::detector::{Box3D, Detection};
use crate::error::{arg_err, Result};
use crate::geometry::Vec3;
use crate::math;

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut a = 0.0;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * libm::fabs(a)
}

/// Sutherland–Hodgman clipping of `subject` by the convex counter-clockwise
/// polygon `clip`.
fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let side = |p: &[f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = core::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (sp, sq) = (side(&p), side(&q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    out
}

/// Bird's-eye overlap area of two boxes.
pub fn bev_intersection(a: &Box3D, b: &Box3D) -> f64 {
    polygon_area(&clip_convex(&a.bev_corners(), &b.bev_corners()))
}

/// Volumetric IoU of two yaw-rotated boxes. Zero for degenerate input.
pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    let (ha, hb) = (a.half()[2], b.half()[2]);
    let z_overlap = ((a.center[2] + ha).min(b.center[2] + hb)
        - (a.center[2] - ha).max(b.center[2] - hb))
    .max(0.0);
    if z_overlap <= 0.0 {
        return 0.0;
    }
    let inter = bev_intersection(a, b) * z_overlap;
    let va = a.size[0] * a.size[1] * a.size[2];
    let vb = b.size[0] * b.size[1] * b.size[2];
    let union = va + vb - inter;
    if !(union > 0.0) {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Bird's-eye distance between two box centres.
pub fn center_distance(a: &Box3D, b: &Box3D) -> f64 {
    let dx = a.center[0] - b.center[0];
    let dy = a.center[1] - b.center[1];
    math::sqrt(dx * dx + dy * dy)
}

/// How detections are matched to ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Matcher {
    /// True positive iff 3D IoU ≥ threshold.
    Iou(f64),
    /// True positive iff bird's-eye centre distance ≤ threshold (m).
    CenterDistance(f64),
}

impl Matcher {
    /// Higher is better; `None` when the pair cannot match.
    fn affinity(&self, det: &Box3D, gt: &Box3D) -> Option<f64> {
        match *self {
            Matcher::Iou(t) => {
                let v = iou3d(det, gt);
                (v >= t).then_some(v)
            }
            Matcher::CenterDistance(t) => {
                let d = center_distance(det, gt);
                (d <= t).then_some(-d)
            }
        }
    }
}

/// Per-detection outcome after matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    Ignored,
}

/// One evaluated scene.
#[derive(Debug, Clone, Default)]
pub struct Frame<'a> {
    pub dets: &'a [Detection],
    pub gts: &'a [Box3D],
    /// Whether each ground truth belongs to the evaluated subset.
    pub gt_active: Option<&'a [bool]>,
    /// Whether an unmatched detection counts against the evaluated subset.
    pub det_active: Option<&'a [bool]>,
}

/// Greedy matching in descending score order. Returns `(score, outcome)`
/// per detection in the processing order, and the active ground-truth count.
pub fn match_frame(frame: &Frame<'_>, matcher: Matcher) -> (Vec<(f64, Outcome)>, usize) {
    let mut order: Vec<usize> = (0..frame.dets.len()).collect();
    order.sort_by(|&i, &j| {
        frame.dets[j]
            .score
            .partial_cmp(&frame.dets[i].score)
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let gt_active = |g: usize| frame.gt_active.is_none_or(|a| a[g]);
    let det_active = |d: usize| frame.det_active.is_none_or(|a| a[d]);
    let mut taken = alloc::vec![false; frame.gts.len()];
    let mut out = Vec::with_capacity(order.len());
    for d in order {
        let det = &frame.dets[d];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in frame.gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            if let Some(a) = matcher.affinity(&det.bbox, gt) {
                if best.is_none_or(|(_, b)| a > b) {
                    best = Some((g, a));
                }
            }
        }
        let outcome = match best {
            Some((g, _)) => {
                taken[g] = true;
                if gt_active(g) {
                    Outcome::TruePositive
                } else {
                    Outcome::Ignored
                }
            }
            None if det_active(d) => Outcome::FalsePositive,
            None => Outcome::Ignored,
        };
        out.push((det.score, outcome));
    }
    let positives = (0..frame.gts.len()).filter(|&g| gt_active(g)).count();
    (out, positives)
}

/// Average precision with its precision/recall curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ApResult {
    pub ap: f64,
    /// False when there were no ground truths; `ap` is then reported as 0.
    pub defined: bool,
    pub num_gt: usize,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

/// All-point interpolated AP from scored outcomes pooled over frames.
pub fn ap_from_outcomes(mut outcomes: Vec<(f64, Outcome)>, num_gt: usize) -> ApResult {
    outcomes.retain(|(_, o)| *o != Outcome::Ignored);
    outcomes.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(core::cmp::Ordering::Equal));
    if num_gt == 0 {
        return ApResult { ap: 0.0, defined: false, num_gt, precision: Vec::new(), recall: Vec::new() };
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut precision = Vec::with_capacity(outcomes.len());
    let mut recall = Vec::with_capacity(outcomes.len());
    for (_, o) in &outcomes {
        if *o == Outcome::TruePositive {
            tp += 1;
        } else {
            fp += 1;
        }
        precision.push(tp as f64 / (tp + fp) as f64);
        recall.push(tp as f64 / num_gt as f64);
    }
    let mut envelope = precision.clone();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (r, p) in recall.iter().zip(&envelope) {
        ap += (r - prev_r) * p;
        prev_r = *r;
    }
    ApResult { ap, defined: true, num_gt, precision, recall }
}

/// Pooled AP over several frames.
pub fn pooled_ap(frames: &[Frame<'_>], matcher: Matcher) -> ApResult {
    let mut all = Vec::new();
    let mut n = 0;
    for f in frames {
        let (o, p) = match_frame(f, matcher);
        all.extend(o);
        n += p;
    }
    ap_from_outcomes(all, n)
}

/// AP at a 3D IoU threshold for one scene.
pub fn average_precision(dets: &[Detection], gts: &[Box3D], iou_thresh: f64) -> ApResult {
    pooled_ap(&[Frame { dets, gts, ..Frame::default() }], Matcher::Iou(iou_thresh))
}

/// AP per centre-distance threshold and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterAp {
    pub per_threshold: Vec<(f64, ApResult)>,
    pub mean: f64,
}

pub fn center_distance_ap(dets: &[Detection], gts: &[Box3D], thresholds: &[f64]) -> CenterAp {
    pooled_center_ap(&[Frame { dets, gts, ..Frame::default() }], thresholds)
}

pub fn pooled_center_ap(frames: &[Frame<'_>], thresholds: &[f64]) -> CenterAp {
    let per_threshold: Vec<(f64, ApResult)> = thresholds
        .iter()
        .map(|&t| (t, pooled_ap(frames, Matcher::CenterDistance(t))))
        .collect();
    let mean = if per_threshold.is_empty() {
        0.0
    } else {
        per_threshold.iter().map(|(_, r)| r.ap).sum::<f64>() / per_threshold.len() as f64
    };
    CenterAp { per_threshold, mean }
}

/// Index of the half-open bin `[edges[k], edges[k+1])` holding `value`.
pub fn bin_index(value: f64, edges: &[f64]) -> Option<usize> {
    edges.windows(2).position(|w| value >= w[0] && value < w[1])
}

/// Depth bin of each box by bird's-eye range of its centre; `None` beyond
/// the last edge.
pub fn bin_by_depth(gts: &[Box3D], edges: &[f64]) -> Vec<Option<usize>> {
    gts.iter().map(|b| bin_index(b.bev_range(), edges)).collect()
}

/// Points within `margin` of the box volume.
pub fn count_points_in_box(points: &[Vec3], bbox: &Box3D, margin: f64) -> usize {
    let r = bbox.bev_radius() + margin;
    points
        .iter()
        .filter(|p| {
            let dx = p[0] - bbox.center[0];
            let dy = p[1] - bbox.center[1];
            dx * dx + dy * dy <= r * r && bbox.contains(p, margin)
        })
        .count()
}

/// Inclusive point-count range; `max: None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PointBin {
    pub min: usize,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub max: Option<usize>,
}

impl PointBin {
    pub fn contains(&self, count: usize) -> bool {
        count >= self.min && self.max.is_none_or(|m| count <= m)
    }
}

/// Evaluation protocol.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EvalConfig {
    pub iou_threshold: f64,
    /// Depth bin edges, m.
    pub depth_edges: Vec<f64>,
    /// Point-count bins on the clean sweep.
    pub point_bins: Vec<PointBin>,
    /// Centre-distance thresholds, m.
    pub center_thresholds: Vec<f64>,
    /// Tolerance for counting a point inside a box, m.
    pub point_margin: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.7,
            depth_edges: alloc::vec![0.0, 30.0, 50.0, 70.0],
            point_bins: alloc::vec![
                PointBin { min: 100, max: None },
                PointBin { min: 20, max: Some(99) },
                PointBin { min: 1, max: Some(19) },
            ],
            center_thresholds: alloc::vec![0.5, 1.0, 2.0, 4.0],
            point_margin: 0.05,
        }
    }
}

/// Everything needed to evaluate one scene.
#[derive(Debug, Clone)]
pub struct Scored<'a> {
    pub dets: &'a [Detection],
    pub gts: &'a [Box3D],
    /// Clean-sweep point count per ground truth.
    pub gt_points: &'a [usize],
    /// Point count inside each detection on the evaluated sweep.
    pub det_points: &'a [usize],
}

/// AP of one bin.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinAp {
    pub bin: String,
    pub ap: f64,
    pub defined: bool,
    pub num_gt: usize,
}

/// One row of a performance-drop table.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DropRow {
    pub bin: String,
    pub before: f64,
    pub after: f64,
    pub absolute: f64,
    /// `(before − after) / before`; `None` when `before` is 0.
    pub relative: Option<f64>,
}

/// Magnitudes of the regularized quantities for an attack.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegularizerStats {
    pub smoothness: Option<f64>,
    pub lp_distance: Option<f64>,
    pub chamfer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub ap_by_bin: Vec<BinAp>,
    /// `(threshold m, AP)` pairs.
    pub ap_center: Vec<(f64, f64)>,
    pub ap_center_mean: f64,
    /// Per-scene AP on the "all" bin.
    pub per_scene_ap: Vec<f64>,
    pub drop: Option<Vec<DropRow>>,
    pub regularizer_stats: Option<RegularizerStats>,
}

impl EvalReport {
    pub fn ap(&self, bin: &str) -> Option<f64> {
        self.ap_by_bin.iter().find(|b| b.bin == bin).map(|b| b.ap)
    }
}

fn depth_tag(edges: &[f64], k: usize) -> String {
    alloc::format!("{}-{}m", edges[k], edges[k + 1])
}

fn points_tag(bin: &PointBin) -> String {
    match bin.max {
        None => alloc::format!("pts>={}", bin.min),
        Some(hi) => alloc::format!("pts{}-{}", bin.min, hi),
    }
}

/// Pools the scenes into one report. Ground truths with no clean points
/// are ignored in every bin.
pub fn evaluate(scenes: &[Scored<'_>], cfg: &EvalConfig) -> EvalReport {
    let visible: Vec<Vec<bool>> = scenes
        .iter()
        .map(|s| s.gt_points.iter().map(|&c| c > 0).collect())
        .collect();

    let run = |gt_sel: &dyn Fn(usize, usize) -> bool, det_sel: &dyn Fn(usize, usize) -> bool| {
        let masks: Vec<(Vec<bool>, Vec<bool>)> = scenes
            .iter()
            .enumerate()
            .map(|(s, sc)| {
                (
                    (0..sc.gts.len()).map(|g| visible[s][g] && gt_sel(s, g)).collect(),
                    (0..sc.dets.len()).map(|d| det_sel(s, d)).collect(),
                )
            })
            .collect();
        let frames: Vec<Frame<'_>> = scenes
            .iter()
            .zip(&masks)
            .map(|(sc, (g, d))| Frame {
                dets: sc.dets,
                gts: sc.gts,
                gt_active: Some(g),
                det_active: Some(d),
            })
            .collect();
        pooled_ap(&frames, Matcher::Iou(cfg.iou_threshold))
    };

    let mut ap_by_bin = Vec::new();
    let all = run(&|_, _| true, &|_, _| true);
    ap_by_bin.push(BinAp { bin: "all".into(), ap: all.ap, defined: all.defined, num_gt: all.num_gt });

    for k in 0..cfg.depth_edges.len().saturating_sub(1) {
        let edges = &cfg.depth_edges;
        let in_bin = |b: &Box3D| bin_index(b.bev_range(), edges) == Some(k);
        let r = run(
            &|s, g| in_bin(&scenes[s].gts[g]),
            &|s, d| in_bin(&scenes[s].dets[d].bbox),
        );
        ap_by_bin.push(BinAp { bin: depth_tag(edges, k), ap: r.ap, defined: r.defined, num_gt: r.num_gt });
    }
    for bin in &cfg.point_bins {
        let inside = |c: usize| bin.contains(c);
        let r = run(
            &|s, g| inside(scenes[s].gt_points[g]),
            &|s, d| inside(scenes[s].det_points.get(d).copied().unwrap_or(0)),
        );
        ap_by_bin.push(BinAp { bin: points_tag(bin), ap: r.ap, defined: r.defined, num_gt: r.num_gt });
    }

    let frames: Vec<Frame<'_>> = scenes
        .iter()
        .zip(&visible)
        .map(|(sc, v)| Frame { dets: sc.dets, gts: sc.gts, gt_active: Some(v), det_active: None })
        .collect();
    let center = pooled_center_ap(&frames, &cfg.center_thresholds);
    let per_scene_ap = frames
        .iter()
        .map(|f| pooled_ap(core::slice::from_ref(f), Matcher::Iou(cfg.iou_threshold)).ap)
        .collect();

    EvalReport {
        ap_by_bin,
        ap_center: center.per_threshold.iter().map(|(t, r)| (*t, r.ap)).collect(),
        ap_center_mean: center.mean,
        per_scene_ap,
        drop: None,
        regularizer_stats: None,
    }
}

/// Absolute and relative AP drop per bin.
pub fn performance_drop(before: &EvalReport, after: &EvalReport) -> Result<Vec<DropRow>> {
    if before.ap_by_bin.len() != after.ap_by_bin.len()
        || before.ap_by_bin.iter().zip(&after.ap_by_bin).any(|(a, b)| a.bin != b.bin)
    {
        return Err(arg_err!("reports have different bin structures"));
    }
    Ok(before
        .ap_by_bin
        .iter()
        .zip(&after.ap_by_bin)
        .map(|(b, a)| DropRow {
            bin: b.bin.clone(),
            before: b.ap,
            after: a.ap,
            absolute: b.ap - a.ap,
            relative: (b.ap > 0.0).then(|| (b.ap - a.ap) / b.ap),
        })
        .collect())
}

/// Relative drop of a single pair of AP values, `None` when `before` is 0.
pub fn relative_drop(before: f64, after: f64) -> Option<f64> {
    (before > 0.0).then(|| (before - after) / before)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64, y: f64, yaw: f64) -> Box3D {
        Box3D::new([x, y, 0.0], [4.0, 2.0, 2.0], yaw).unwrap()
    }

    fn det(b: Box3D, score: f64) -> Detection {
        Detection { bbox: b, score }
    }

    #[test]
    fn iou_examples() {
        let a = bx(0.0, 0.0, 0.0);
        assert!((iou3d(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(iou3d(&a, &bx(10.0, 0.0, 0.0)), 0.0);
        assert!((iou3d(&a, &bx(2.0, 0.0, 0.0)) - 1.0 / 3.0).abs() < 1e-12);
        let up = Box3D::new([0.0, 0.0, 5.0], [4.0, 2.0, 2.0], 0.0).unwrap();
        assert_eq!(iou3d(&a, &up), 0.0);
    }

    #[test]
    fn iou_is_symmetric() {
        for k in 0..50 {
            let f = k as f64;
            let a = Box3D::new([0.1 * f, 0.05 * f, 0.0], [4.5, 1.9, 1.7], 0.13 * f).unwrap();
            let b = Box3D::new([1.0, -0.5, 0.3], [4.0, 2.1, 1.5], -0.07 * f).unwrap();
            assert!((iou3d(&a, &b) - iou3d(&b, &a)).abs() < 1e-12);
        }
    }

    #[test]
    fn ap_examples() {
        let gts = [bx(0.0, 0.0, 0.0), bx(10.0, 0.0, 0.0)];
        let perfect = [det(gts[0], 0.9), det(gts[1], 0.8)];
        assert_eq!(average_precision(&perfect, &gts, 0.7).ap, 1.0);
        assert_eq!(average_precision(&[], &gts, 0.7).ap, 0.0);

        let mixed = [det(gts[0], 0.9), det(bx(30.0, 0.0, 0.0), 0.8), det(gts[1], 0.7)];
        let r = average_precision(&mixed, &gts, 0.7);
        assert!((r.ap - 5.0 / 6.0).abs() < 1e-12);

        let none = average_precision(&perfect, &[], 0.7);
        assert!(!none.defined);
        assert_eq!(none.ap, 0.0);
    }

    #[test]
    fn duplicate_detection_is_false_positive() {
        let gts = [bx(0.0, 0.0, 0.0)];
        let dets = [det(gts[0], 0.9), det(gts[0], 0.8)];
        let r = average_precision(&dets, &gts, 0.7);
        assert_eq!(r.precision, vec![1.0, 0.5]);
        assert_eq!(r.ap, 1.0);
    }

    #[test]
    fn center_ap_examples() {
        let gts = [bx(0.0, 0.0, 0.0), bx(20.0, 0.0, 0.0)];
        let perfect = [det(gts[0], 0.9), det(gts[1], 0.5)];
        let c = center_distance_ap(&perfect, &gts, &[0.5, 1.0, 2.0, 4.0]);
        assert!(c.per_threshold.iter().all(|(_, r)| r.ap == 1.0));
        assert_eq!(c.mean, 1.0);

        let off = [det(bx(3.0, 0.0, 0.0), 0.9), det(bx(20.0, 3.0, 0.0), 0.5)];
        let c = center_distance_ap(&off, &gts, &[0.5, 1.0, 2.0, 4.0]);
        let aps: Vec<f64> = c.per_threshold.iter().map(|(_, r)| r.ap).collect();
        assert_eq!(aps, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn depth_bins() {
        let edges = [0.0, 30.0, 50.0, 70.0];
        let b = |x: f64| Box3D::new([x, 0.0, 0.0], [1.0; 3], 0.0).unwrap();
        assert_eq!(bin_by_depth(&[b(10.0), b(50.0), b(30.0), b(70.0), b(80.0)], &edges), vec![
            Some(0),
            Some(2),
            Some(1),
            None,
            None
        ]);
    }

    #[test]
    fn drop_examples() {
        let gts = [bx(0.0, 0.0, 0.0)];
        let dets = [det(gts[0], 0.9)];
        let pts = [150usize];
        let dp = [150usize];
        let s = Scored { dets: &dets, gts: &gts, gt_points: &pts, det_points: &dp };
        let r = evaluate(core::slice::from_ref(&s), &EvalConfig::default());
        let d = performance_drop(&r, &r).unwrap();
        assert!(d.iter().all(|row| row.absolute == 0.0));
        // Bins with no ground truth have AP 0 and an undefined relative drop.
        let far = d.iter().find(|row| row.bin == "50-70m").unwrap();
        assert_eq!(far.relative, None);
        assert_eq!(d[0].relative, Some(0.0));

        let rel = relative_drop(47.44, 0.19).unwrap();
        assert!((rel - 0.996).abs() < 5e-4);

        let mut other = r.clone();
        other.ap_by_bin.pop();
        assert!(performance_drop(&r, &other).is_err());
    }

    #[test]
    fn evaluate_bins_follow_depth_and_points() {
        let gts = [bx(10.0, 0.0, 0.0), bx(40.0, 0.0, 0.0)];
        let dets = [det(gts[0], 0.9), det(bx(60.0, 0.0, 0.0), 0.8)];
        let gp = [150usize, 30];
        let dp = [150usize, 5];
        let s = Scored { dets: &dets, gts: &gts, gt_points: &gp, det_points: &dp };
        let r = evaluate(core::slice::from_ref(&s), &EvalConfig::default());
        assert_eq!(r.ap("0-30m"), Some(1.0));
        assert_eq!(r.ap("30-50m"), Some(0.0));
        assert_eq!(r.ap("pts>=100"), Some(1.0));
        assert_eq!(r.ap("all"), Some(0.5));
        // The unmatched detection at 60 m lands in the 50-70 bin, which has no truth.
        let far = r.ap_by_bin.iter().find(|b| b.bin == "50-70m").unwrap();
        assert!(!far.defined);
    }
}
