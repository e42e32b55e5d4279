//! A small differentiable single-class 3D box detector.
//!
//! Each labelled box gets a soft point count: every point contributes the
//! product of three per-axis sigmoids of its distance inside the box faces,
//! times a sigmoid that rejects ground returns. The classification branch
//! turns the count into a score, the regression branch into a soft-weighted
//! centroid. [`detector_loss`] records either branch on a tape so an attack
//! can differentiate through it; [`detect`] produces scored boxes for
//! evaluation.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use crate::autodiff::{Tape, Var};
use crate::error::{arg_err, Result};
use crate::geometry::Vec3;
use crate::math;
use crate::metrics::iou3d;
use crate::sweep::{DiffSweep, Sweep};

/// Point/box pairs with any sigmoid logit below `-PRUNE_LOGIT` are skipped;
/// their weight is below 5e-18.
pub const PRUNE_LOGIT: f64 = 40.0;

/// Distances below this count as touching an edge in the heading search, m.
const CLOSENESS_FLOOR: f64 = 0.01;

/// Oriented 3D box. `size` is (length, width, height) along the box's
/// local x, y, z axes; `yaw` rotates local x about +z.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Box3D {
    pub center: Vec3,
    pub size: Vec3,
    pub yaw: f64,
}

impl Box3D {
    /// Validates positive sizes and wraps `yaw` into (-pi, pi].
    pub fn new(center: Vec3, size: Vec3, yaw: f64) -> Result<Self> {
        if !size.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(arg_err!("box sizes must be positive, got {:?}", size));
        }
        if !center.iter().all(|c| c.is_finite()) || !yaw.is_finite() {
            return Err(arg_err!("box pose must be finite"));
        }
        Ok(Self { center, size, yaw: math::wrap_angle(yaw) })
    }

    pub fn half(&self) -> Vec3 {
        [0.5 * self.size[0], 0.5 * self.size[1], 0.5 * self.size[2]]
    }

    /// Coordinates of `p` in the box frame.
    #[inline]
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        let (s, c) = (math::sin(self.yaw), math::cos(self.yaw));
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        [c * d[0] + s * d[1], -s * d[0] + c * d[1], d[2]]
    }

    pub fn contains(&self, p: &Vec3, margin: f64) -> bool {
        let l = self.to_local(p);
        let h = self.half();
        (0..3).all(|k| libm::fabs(l[k]) <= h[k] + margin)
    }

    /// Same pose, every dimension scaled by `factor`.
    pub fn inflated(&self, factor: f64) -> Self {
        Self {
            size: [self.size[0] * factor, self.size[1] * factor, self.size[2] * factor],
            ..*self
        }
    }

    /// Bird's-eye corners, counter-clockwise.
    pub fn bev_corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = (math::sin(self.yaw), math::cos(self.yaw));
        let h = self.half();
        let local = [[h[0], h[1]], [-h[0], h[1]], [-h[0], -h[1]], [h[0], -h[1]]];
        local.map(|[x, y]| [self.center[0] + c * x - s * y, self.center[1] + s * x + c * y])
    }

    /// Radius of the bird's-eye footprint around the center.
    pub fn bev_radius(&self) -> f64 {
        0.5 * math::sqrt(self.size[0] * self.size[0] + self.size[1] * self.size[1])
    }

    pub fn bev_range(&self) -> f64 {
        math::sqrt(self.center[0] * self.center[0] + self.center[1] * self.center[1])
    }
}

/// A scored box.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Detection {
    pub bbox: Box3D,
    pub score: f64,
}

/// Which detector output an attack targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Branch {
    Classification,
    Regression,
}

/// Surrogate detector parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DetectorConfig {
    /// Sharpness of the soft membership, 1/m.
    pub temperature: f64,
    /// Soft point count at which the score crosses 0.5.
    pub count_threshold: f64,
    /// Slope of the score logistic in the soft count.
    pub score_gain: f64,
    /// Box inflation used by the regression branch.
    pub regression_inflation: f64,
    /// Ground height in the keyframe sensor frame, m.
    pub ground_z: f64,
    /// Points closer than this to the ground are treated as ground, m.
    pub ground_clearance: f64,
    /// Proposal lattice spacing, m.
    pub grid_spacing: f64,
    /// Proposals cover `[-grid_extent, grid_extent]²`, m.
    pub grid_extent: f64,
    /// Proposal headings, radians.
    pub yaw_set: Vec<f64>,
    /// Proposal (length, width, height), m.
    pub size_prior: Vec3,
    pub nms_iou: f64,
    pub score_floor: f64,
    /// Fit surviving proposals to their point cluster before final scoring.
    pub refine: bool,
    /// Bird's-eye linking distance for foreground clustering, m.
    pub cluster_link: f64,
    /// Heading search resolution of the box fit, degrees.
    pub fit_yaw_step_deg: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            temperature: 50.0,
            count_threshold: 20.0,
            score_gain: 0.5,
            regression_inflation: 1.5,
            ground_z: -1.8,
            ground_clearance: 0.15,
            grid_spacing: 1.0,
            grid_extent: 70.0,
            yaw_set: alloc::vec![0.0, FRAC_PI_2],
            size_prior: [4.5, 1.9, 1.7],
            nms_iou: 0.3,
            score_floor: 0.5,
            refine: true,
            cluster_link: 0.8,
            fit_yaw_step_deg: 0.5,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(arg_err!("temperature must be positive"));
        }
        if !(self.grid_spacing > 0.0) || !(self.grid_extent >= 0.0) {
            return Err(arg_err!("grid spacing must be positive"));
        }
        if !(0.0..=1.0).contains(&self.nms_iou) || !(0.0..=1.0).contains(&self.score_floor) {
            return Err(arg_err!("nms_iou and score_floor must lie in [0, 1]"));
        }
        if !self.size_prior.iter().all(|s| *s > 0.0) || !(self.regression_inflation > 0.0) {
            return Err(arg_err!("size prior and inflation must be positive"));
        }
        if self.yaw_set.is_empty() || !(self.fit_yaw_step_deg > 0.0) || !(self.cluster_link > 0.0) {
            return Err(arg_err!("yaw set, fit step and cluster link must be non-empty/positive"));
        }
        Ok(())
    }

    fn ground_logit(&self, z: f64) -> f64 {
        self.temperature * (z - self.ground_z - self.ground_clearance)
    }
}

/// Soft membership of `p` in `bbox`: product over the three box axes of
/// `sigmoid(temperature * (half_extent - |local coordinate|))`.
pub fn soft_point_in_box(p: &Vec3, bbox: &Box3D, temperature: f64) -> f64 {
    let l = bbox.to_local(p);
    let h = bbox.half();
    (0..3)
        .map(|k| math::sigmoid(temperature * (h[k] - libm::fabs(l[k]))))
        .product()
}

/// Weight of a point in a box including ground rejection, or `None` when
/// the pair falls under the pruning cutoff.
fn point_weight(p: &Vec3, bbox: &Box3D, cfg: &DetectorConfig) -> Option<f64> {
    let gl = cfg.ground_logit(p[2]);
    if gl < -PRUNE_LOGIT {
        return None;
    }
    let l = bbox.to_local(p);
    let h = bbox.half();
    let mut w = math::sigmoid(gl);
    for k in 0..3 {
        let z = cfg.temperature * (h[k] - libm::fabs(l[k]));
        if z < -PRUNE_LOGIT {
            return None;
        }
        w *= math::sigmoid(z);
    }
    Some(w)
}

fn soft_count(points: &[Vec3], bbox: &Box3D, cfg: &DetectorConfig) -> f64 {
    points.iter().filter_map(|p| point_weight(p, bbox, cfg)).sum()
}

/// `sigmoid(a · (soft count − τ))` for a box.
pub fn classification_score(sweep: &Sweep, bbox: &Box3D, cfg: &DetectorConfig) -> f64 {
    score_points(&sweep.flat_points(), bbox, cfg)
}

pub fn score_points(points: &[Vec3], bbox: &Box3D, cfg: &DetectorConfig) -> f64 {
    math::sigmoid(cfg.score_gain * (soft_count(points, bbox, cfg) - cfg.count_threshold))
}

/// Soft-weighted centroid of the points in the inflated box; the box center
/// when no point carries weight above 1e-9.
pub fn regression_estimate(sweep: &Sweep, bbox: &Box3D, cfg: &DetectorConfig) -> Vec3 {
    regression_points(&sweep.flat_points(), bbox, cfg)
}

pub fn regression_points(points: &[Vec3], bbox: &Box3D, cfg: &DetectorConfig) -> Vec3 {
    let big = bbox.inflated(cfg.regression_inflation);
    let mut sw = 0.0;
    let mut acc = [0.0; 3];
    for p in points {
        if let Some(w) = point_weight(p, &big, cfg) {
            sw += w;
            for k in 0..3 {
                acc[k] += w * p[k];
            }
        }
    }
    if sw <= 1e-9 {
        return bbox.center;
    }
    [acc[0] / sw, acc[1] / sw, acc[2] / sw]
}

/// Records the weight of one point in `bbox` on the tape, or `None` when the
/// pair is pruned.
fn diff_weight(
    tape: &mut Tape,
    p: &[Var; 3],
    bbox: &Box3D,
    cfg: &DetectorConfig,
) -> Option<Var> {
    let v = [tape.value(p[0]), tape.value(p[1]), tape.value(p[2])];
    // Cheap value-only screen first; identical rule to `point_weight`.
    point_weight(&v, bbox, cfg)?;
    let (s, c) = (math::sin(bbox.yaw), math::cos(bbox.yaw));
    let h = bbox.half();
    let t = cfg.temperature;
    let local = [
        tape.linear(-(c * bbox.center[0] + s * bbox.center[1]), &[(p[0], c), (p[1], s)]),
        tape.linear(s * bbox.center[0] - c * bbox.center[1], &[(p[0], -s), (p[1], c)]),
        tape.add_const(p[2], -bbox.center[2]),
    ];
    let g = tape.linear(-t * (cfg.ground_z + cfg.ground_clearance), &[(p[2], t)]);
    let mut w = tape.sigmoid(g);
    for k in 0..3 {
        let a = tape.abs(local[k]);
        let z = tape.linear(t * h[k], &[(a, -t)]);
        let f = tape.sigmoid(z);
        w = tape.mul(w, f);
    }
    Some(w)
}

fn candidates<'a>(
    values: &'a [Vec3],
    bbox: &'a Box3D,
    cfg: &'a DetectorConfig,
) -> impl Iterator<Item = usize> + 'a {
    let reach = bbox.bev_radius() + PRUNE_LOGIT / cfg.temperature;
    values.iter().enumerate().filter_map(move |(i, p)| {
        let dx = p[0] - bbox.center[0];
        let dy = p[1] - bbox.center[1];
        (dx * dx + dy * dy <= reach * reach).then_some(i)
    })
}

/// Differentiable soft count of `bbox` over `points`.
pub fn diff_soft_count(
    tape: &mut Tape,
    points: &[[Var; 3]],
    values: &[Vec3],
    bbox: &Box3D,
    cfg: &DetectorConfig,
) -> Option<Var> {
    let mut terms = Vec::new();
    for i in candidates(values, bbox, cfg) {
        if let Some(w) = diff_weight(tape, &points[i], bbox, cfg) {
            terms.push(w);
        }
    }
    (!terms.is_empty()).then(|| tape.sum(&terms))
}

fn smooth_l1(tape: &mut Tape, x: Var) -> Var {
    let v = tape.value(x);
    if libm::fabs(v) < 1.0 {
        let sq = tape.mul(x, x);
        tape.mul_const(sq, 0.5)
    } else {
        let a = tape.abs(x);
        tape.add_const(a, -0.5)
    }
}

/// Attack objective `-L` for the chosen branch, recorded on `tape`.
///
/// Classification: `L = Σ_labels -ln(score)`. Regression:
/// `L = Σ_labels Σ_axes smoothL1(estimate − center)`. An empty label list
/// yields a constant zero.
pub fn detector_loss(
    tape: &mut Tape,
    sweep: &DiffSweep,
    labels: &[Box3D],
    branch: Branch,
    cfg: &DetectorConfig,
) -> Var {
    if labels.is_empty() {
        log::warn!("detector loss requested with no labels; returning zero");
        return tape.constant(0.0);
    }
    let values = sweep.values(tape);
    let mut per_label = Vec::with_capacity(labels.len());
    for bbox in labels {
        match branch {
            Branch::Classification => {
                let logit = match diff_soft_count(tape, &sweep.points, &values, bbox, cfg) {
                    Some(count) => tape.linear(
                        -cfg.score_gain * cfg.count_threshold,
                        &[(count, cfg.score_gain)],
                    ),
                    None => tape.constant(-cfg.score_gain * cfg.count_threshold),
                };
                // -ln(sigmoid(z)) = softplus(-z)
                let neg = tape.neg(logit);
                per_label.push(tape.softplus(neg));
            }
            Branch::Regression => {
                let big = bbox.inflated(cfg.regression_inflation);
                let mut ws = Vec::new();
                let mut idx = Vec::new();
                for i in candidates(&values, &big, cfg) {
                    if let Some(w) = diff_weight(tape, &sweep.points[i], &big, cfg) {
                        ws.push(w);
                        idx.push(i);
                    }
                }
                let total: f64 = ws.iter().map(|&w| tape.value(w)).sum();
                if total <= 1e-9 {
                    continue;
                }
                let sw = tape.sum(&ws);
                for k in 0..3 {
                    let coords: Vec<Var> = idx.iter().map(|&i| sweep.points[i][k]).collect();
                    let num = tape.dot(&ws, &coords);
                    let est = tape.div(num, sw);
                    let err = tape.add_const(est, -bbox.center[k]);
                    per_label.push(smooth_l1(tape, err));
                }
            }
        }
    }
    let total = tape.sum(&per_label);
    tape.neg(total)
}

/// Uniform bird's-eye bucket grid over a point set.
struct BevIndex {
    origin: [f64; 2],
    cell: f64,
    dims: [usize; 2],
    cells: Vec<Vec<u32>>,
}

impl BevIndex {
    fn new(points: &[Vec3], cell: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if points.is_empty() {
            lo = [0.0; 2];
            hi = [0.0; 2];
        }
        let dims = [
            ((hi[0] - lo[0]) / cell) as usize + 1,
            ((hi[1] - lo[1]) / cell) as usize + 1,
        ];
        let mut cells = alloc::vec![Vec::new(); dims[0] * dims[1]];
        for (i, p) in points.iter().enumerate() {
            let cx = ((p[0] - lo[0]) / cell) as usize;
            let cy = ((p[1] - lo[1]) / cell) as usize;
            cells[cx.min(dims[0] - 1) * dims[1] + cy.min(dims[1] - 1)].push(i as u32);
        }
        Self { origin: lo, cell, dims, cells }
    }

    /// Indices of points whose bird's-eye position may lie within `r` of `(x, y)`.
    fn query(&self, x: f64, y: f64, r: f64, out: &mut Vec<u32>) {
        out.clear();
        let rng = |c: f64, o: f64, d: usize| -> Option<(usize, usize)> {
            let lo = math::floor((c - r - o) / self.cell);
            let hi = math::floor((c + r - o) / self.cell);
            if hi < 0.0 || lo > (d - 1) as f64 {
                return None;
            }
            Some((lo.max(0.0) as usize, (hi as usize).min(d - 1)))
        };
        let (Some((x0, x1)), Some((y0, y1))) = (
            rng(x, self.origin[0], self.dims[0]),
            rng(y, self.origin[1], self.dims[1]),
        ) else {
            return;
        };
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                out.extend_from_slice(&self.cells[cx * self.dims[1] + cy]);
            }
        }
    }
}

/// Greedy non-maximum suppression; input must be sorted by score descending.
pub fn nms(dets: &[Detection], iou_thresh: f64) -> Vec<Detection> {
    let mut keep: Vec<Detection> = Vec::new();
    for d in dets {
        if keep.iter().all(|k| iou3d(&k.bbox, &d.bbox) <= iou_thresh) {
            keep.push(*d);
        }
    }
    keep
}

fn sort_by_score(dets: &mut [Detection]) {
    // Stable: equal scores keep generation order.
    dets.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(core::cmp::Ordering::Equal));
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected components of foreground points under bird's-eye distance
/// `link`. Returns a component id per input point.
pub fn cluster_bev(points: &[Vec3], link: f64) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..points.len()).collect();
    let mut grid: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        let key = (math::floor(p[0] / link) as i64, math::floor(p[1] / link) as i64);
        grid.entry(key).or_default().push(i);
    }
    let l2 = link * link;
    for (&(gx, gy), members) in &grid {
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(other) = grid.get(&(gx + dx, gy + dy)) else { continue };
                for &i in members {
                    for &j in other {
                        if j <= i {
                            continue;
                        }
                        let (a, b) = (&points[i], &points[j]);
                        let d2 = (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
                        if d2 <= l2 {
                            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                            if ri != rj {
                                parent[ri.max(rj)] = ri.min(rj);
                            }
                        }
                    }
                }
            }
        }
    }
    (0..points.len()).map(|i| find(&mut parent, i)).collect()
}

/// Fits a box of the prior size to a cluster of bird's-eye points seen from
/// the sensor origin: the heading maximizes the closeness of every point to
/// its nearest rectangle edge, then the visible extent anchors the box on
/// the sensor side.
pub fn fit_box(cluster: &[Vec3], cfg: &DetectorConfig) -> Option<Box3D> {
    if cluster.is_empty() {
        return None;
    }
    let [len, wid, hgt] = cfg.size_prior;
    let steps = libm::ceil(90.0 / cfg.fit_yaw_step_deg).max(1.0) as usize;
    let mut best = (f64::NEG_INFINITY, 0.0, [0.0; 4]);
    let mut uv = Vec::with_capacity(cluster.len());
    for k in 0..steps {
        let th = (k as f64 * cfg.fit_yaw_step_deg).to_radians();
        let (s, c) = (math::sin(th), math::cos(th));
        let mut e = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        uv.clear();
        for p in cluster {
            let u = c * p[0] + s * p[1];
            let v = -s * p[0] + c * p[1];
            e[0] = e[0].min(u);
            e[1] = e[1].max(u);
            e[2] = e[2].min(v);
            e[3] = e[3].max(v);
            uv.push((u, v));
        }
        let closeness: f64 = uv
            .iter()
            .map(|&(u, v)| {
                let du = (u - e[0]).min(e[1] - u);
                let dv = (v - e[2]).min(e[3] - v);
                1.0 / du.min(dv).max(CLOSENESS_FLOOR)
            })
            .sum();
        if closeness > best.0 * (1.0 + 1e-12) {
            best = (closeness, th, e);
        }
    }
    let (_, mut th, e) = best;
    let (mut u_ext, mut v_ext) = ([e[0], e[1]], [e[2], e[3]]);
    let (eu, ev) = (u_ext[1] - u_ext[0], v_ext[1] - v_ext[0]);
    let margin = 0.3;
    let length_on_u = if eu.max(ev) > wid + margin {
        eu >= ev
    } else {
        // Only a short face is visible: the length axis is the one closer
        // to the viewing ray.
        let n = cluster.len() as f64;
        let cx = cluster.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = cluster.iter().map(|p| p[1]).sum::<f64>() / n;
        let ray_u = libm::fabs(math::cos(th) * cx + math::sin(th) * cy);
        let ray_v = libm::fabs(-math::sin(th) * cx + math::cos(th) * cy);
        ray_u >= ray_v
    };
    if !length_on_u {
        // Rotate the frame by +90°: new u = old v, new v = -old u.
        th += FRAC_PI_2;
        let old_u = u_ext;
        u_ext = v_ext;
        v_ext = [-old_u[1], -old_u[0]];
    }
    let place = |ext: [f64; 2], size: f64| -> f64 {
        if ext[1] - ext[0] >= size - 0.2 || (ext[0] <= 0.0 && ext[1] >= 0.0) {
            0.5 * (ext[0] + ext[1])
        } else if ext[0] > 0.0 {
            ext[0] + 0.5 * size
        } else {
            ext[1] - 0.5 * size
        }
    };
    let cu = place(u_ext, len);
    let cv = place(v_ext, wid);
    let (s, c) = (math::sin(th), math::cos(th));
    let center = [c * cu - s * cv, s * cu + c * cv, cfg.ground_z + 0.5 * hgt];
    Box3D::new(center, cfg.size_prior, th).ok()
}

/// Detects vehicles in a compensated sweep. Output is sorted by score,
/// descending.
///
/// Without `cfg.refine` every proposal on the bird's-eye lattice is scored,
/// those below the score floor are dropped and overlaps are suppressed.
/// With `cfg.refine` the proposals are instead one fitted box per
/// bird's-eye cluster of above-ground points, scored and suppressed the
/// same way.
pub fn detect(sweep: &Sweep, cfg: &DetectorConfig) -> Vec<Detection> {
    detect_points(&sweep.flat_points(), cfg)
}

pub fn detect_points(points: &[Vec3], cfg: &DetectorConfig) -> Vec<Detection> {
    if points.is_empty() {
        return Vec::new();
    }
    let index = BevIndex::new(points, 1.0);
    let ground_factor: Vec<f64> = points
        .iter()
        .map(|p| {
            let gl = cfg.ground_logit(p[2]);
            if gl < -PRUNE_LOGIT {
                0.0
            } else {
                math::sigmoid(gl)
            }
        })
        .collect();
    let mut found = if cfg.refine {
        cluster_proposals(points, &index, &ground_factor, cfg)
    } else {
        lattice_proposals(points, &index, &ground_factor, cfg)
    };
    sort_by_score(&mut found);
    nms(&found, cfg.nms_iou)
}

fn proposal_reach(cfg: &DetectorConfig) -> f64 {
    let [len, wid, _] = cfg.size_prior;
    0.5 * math::sqrt(len * len + wid * wid) + PRUNE_LOGIT / cfg.temperature
}

fn lattice_proposals(
    points: &[Vec3],
    index: &BevIndex,
    ground_factor: &[f64],
    cfg: &DetectorConfig,
) -> Vec<Detection> {
    let reach = proposal_reach(cfg);
    let zc = cfg.ground_z + 0.5 * cfg.size_prior[2];
    // The ground factor bounds each point's weight, so lattice sites whose
    // bound cannot reach the score floor are skipped without changing results.
    let needed = cfg.count_threshold + math::ln(cfg.score_floor / (1.0 - cfg.score_floor)) / cfg.score_gain;
    let steps = math::floor(cfg.grid_extent / cfg.grid_spacing) as i64;
    let mut out = Vec::new();
    let mut near = Vec::new();
    let mut local: Vec<Vec3> = Vec::new();
    for ix in -steps..=steps {
        for iy in -steps..=steps {
            let (x, y) = (ix as f64 * cfg.grid_spacing, iy as f64 * cfg.grid_spacing);
            index.query(x, y, reach, &mut near);
            let bound: f64 = near.iter().map(|&i| ground_factor[i as usize]).sum();
            if bound < needed {
                continue;
            }
            local.clear();
            local.extend(near.iter().map(|&i| points[i as usize]));
            for &yaw in &cfg.yaw_set {
                let Ok(b) = Box3D::new([x, y, zc], cfg.size_prior, yaw) else { continue };
                let score = score_points(&local, &b, cfg);
                if score >= cfg.score_floor {
                    out.push(Detection { bbox: b, score });
                }
            }
        }
    }
    out
}

fn cluster_proposals(
    points: &[Vec3],
    index: &BevIndex,
    ground_factor: &[f64],
    cfg: &DetectorConfig,
) -> Vec<Detection> {
    let reach = proposal_reach(cfg);
    let fg: Vec<Vec3> = points
        .iter()
        .zip(ground_factor)
        .filter(|(_, &g)| g > 0.5)
        .map(|(p, _)| *p)
        .collect();
    let labels = cluster_bev(&fg, cfg.cluster_link);
    let mut clusters: BTreeMap<usize, Vec<Vec3>> = BTreeMap::new();
    for (p, &l) in fg.iter().zip(&labels) {
        clusters.entry(l).or_default().push(*p);
    }
    let mut out = Vec::new();
    let mut near = Vec::new();
    let mut local: Vec<Vec3> = Vec::new();
    for cluster in clusters.values() {
        let Some(b) = fit_box(cluster, cfg) else { continue };
        index.query(b.center[0], b.center[1], reach, &mut near);
        local.clear();
        local.extend(near.iter().map(|&i| points[i as usize]));
        let score = score_points(&local, &b, cfg);
        if score >= cfg.score_floor {
            out.push(Detection { bbox: b, score });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use crate::sweep::{partition_packets, SweepFrame};
    use core::f64::consts::PI;

    fn unit_box() -> Box3D {
        Box3D::new([0.0, 0.0, 0.0], [2.0, 2.0, 2.0], 0.0).unwrap()
    }

    fn cfg_no_ground() -> DetectorConfig {
        DetectorConfig { ground_z: -100.0, ..DetectorConfig::default() }
    }

    fn sweep_of(points: Vec<Vec3>) -> Sweep {
        let mut s = partition_packets(&points, None, 1, 0.0).unwrap();
        s.frame = SweepFrame::KeyframeA;
        s
    }

    #[test]
    fn box_validation() {
        assert!(Box3D::new([0.0; 3], [1.0, 0.0, 1.0], 0.0).is_err());
        let b = Box3D::new([0.0; 3], [1.0, 1.0, 1.0], 3.0 * PI).unwrap();
        assert!((b.yaw - PI).abs() < 1e-12);
    }

    #[test]
    fn soft_membership_examples() {
        let b = unit_box();
        assert!(soft_point_in_box(&[0.0; 3], &b, 50.0) > 0.999);
        assert!(soft_point_in_box(&[2.0, 0.0, 0.0], &b, 50.0) < 1e-6);
        let on_face = soft_point_in_box(&[1.0, 0.0, 0.0], &b, 50.0);
        let interior_yz = math::sigmoid(50.0) * math::sigmoid(50.0);
        assert!((on_face - 0.5 * interior_yz).abs() < 1e-15);
    }

    #[test]
    fn soft_membership_is_monotone() {
        let b = Box3D::new([1.0, 2.0, 0.0], [4.0, 2.0, 1.5], 0.7).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..60 {
            let local_x = k as f64 * 0.05;
            let (s, c) = (0.7f64.sin(), 0.7f64.cos());
            let p = [1.0 + c * local_x, 2.0 + s * local_x, 0.0];
            let w = soft_point_in_box(&p, &b, 50.0);
            assert!((0.0..=1.0).contains(&w));
            assert!(w <= last);
            last = w;
        }
    }

    #[test]
    fn classification_score_examples() {
        let cfg = cfg_no_ground();
        let b = unit_box();
        let empty = sweep_of(Vec::new());
        let s0 = classification_score(&empty, &b, &cfg);
        assert!((s0 - math::sigmoid(-cfg.score_gain * cfg.count_threshold)).abs() < 1e-15);

        let inside: Vec<Vec3> = (0..40).map(|i| [0.01 * i as f64 - 0.2, 0.1, -0.1]).collect();
        assert!(classification_score(&sweep_of(inside.clone()), &b, &cfg) > 0.99);

        let mut last = 1.0;
        for k in 0..30 {
            let shifted: Vec<Vec3> = inside.iter().map(|p| [p[0] + 0.1 * k as f64, p[1], p[2]]).collect();
            let s = classification_score(&sweep_of(shifted), &b, &cfg);
            assert!(s <= last + 1e-15);
            last = s;
        }
        assert!(last < 0.01);
    }

    #[test]
    fn score_ignores_point_order() {
        let cfg = cfg_no_ground();
        let b = unit_box();
        let pts: Vec<Vec3> = (0..30).map(|i| [0.06 * i as f64 - 0.9, 0.03 * i as f64 - 0.5, 0.9]).collect();
        let mut rev = pts.clone();
        rev.reverse();
        let a = classification_score(&sweep_of(pts), &b, &cfg);
        let r = classification_score(&sweep_of(rev), &b, &cfg);
        assert!((a - r).abs() < 1e-14);
    }

    #[test]
    fn ground_points_do_not_count() {
        let cfg = DetectorConfig::default();
        let b = Box3D::new([10.0, 0.0, -0.95], [4.5, 1.9, 1.7], 0.0).unwrap();
        let ground: Vec<Vec3> = (0..200).map(|i| [8.0 + 0.02 * i as f64, 0.0, -1.8]).collect();
        assert!(classification_score(&sweep_of(ground), &b, &cfg) < 1e-3);
    }

    #[test]
    fn regression_examples() {
        let cfg = cfg_no_ground();
        let b = unit_box();
        let sym = vec![[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0], [0.0, 0.3, 0.2], [0.0, -0.3, -0.2]];
        let e = regression_estimate(&sweep_of(sym.clone()), &b, &cfg);
        assert!(e.iter().all(|v| v.abs() < 1e-12));

        let d = 0.1;
        let moved: Vec<Vec3> = sym.iter().map(|p| [p[0] + d, p[1], p[2]]).collect();
        let e = regression_estimate(&sweep_of(moved), &b, &cfg);
        assert!((e[0] - d).abs() < 0.1 * d, "{e:?}");

        let far = sweep_of(vec![[30.0, 0.0, 0.0]]);
        assert_eq!(regression_estimate(&far, &b, &cfg), b.center);
    }

    #[test]
    fn empty_sweep_detects_nothing() {
        assert!(detect(&sweep_of(Vec::new()), &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn nms_keeps_one_of_duplicates() {
        let b = Box3D::new([5.0, 5.0, 0.0], [4.5, 1.9, 1.7], 0.2).unwrap();
        let dets = vec![Detection { bbox: b, score: 0.9 }, Detection { bbox: b, score: 0.8 }];
        let kept = nms(&dets, 0.3);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 0.9);
    }

    #[test]
    fn fit_box_recovers_l_shape() {
        let cfg = DetectorConfig::default();
        let truth = Box3D::new([12.0, 7.0, -0.95], [4.5, 1.9, 1.7], 0.6).unwrap();
        // Sample the two faces visible from the origin.
        let corners = truth.bev_corners();
        let mut pts = Vec::new();
        for k in 0..4 {
            let (a, b) = (corners[k], corners[(k + 1) % 4]);
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let normal = [mid[0] - truth.center[0], mid[1] - truth.center[1]];
            if normal[0] * mid[0] + normal[1] * mid[1] < 0.0 {
                for i in 0..=30 {
                    let f = i as f64 / 30.0;
                    pts.push([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), 0.0]);
                }
            }
        }
        let fit = fit_box(&pts, &cfg).unwrap();
        assert!(iou3d(&fit, &truth) > 0.9, "{fit:?}");
    }

    #[test]
    fn loss_matches_finite_differences() {
        let cfg = cfg_no_ground();
        let b = Box3D::new([0.0, 0.0, 0.0], [2.0, 2.0, 2.0], 0.3).unwrap();
        let pts: Vec<Vec3> = (0..25)
            .map(|i| {
                let f = i as f64;
                [0.98 * (f * 0.7).cos(), 0.99 * (f * 1.3).sin(), 0.95 - 0.08 * f]
            })
            .collect();
        let x: Vec<f64> = pts.iter().flatten().copied().collect();
        for branch in [Branch::Classification, Branch::Regression] {
            let cfg = DetectorConfig { count_threshold: 16.0, ..cfg.clone() };
            let f = |tape: &mut Tape, v: &[Var]| {
                let points: Vec<[Var; 3]> = v.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
                let ds = DiffSweep { points, offsets: vec![0, v.len() / 3] };
                Ok(detector_loss(tape, &ds, &[b], branch, &cfg))
            };
            let r = grad_check(f, &x, 1e-5, None).unwrap();
            assert!(r.max_rel_error < 1e-3, "{branch:?} {r:?}");
        }
    }

    #[test]
    fn empty_labels_give_zero_loss() {
        let mut tape = Tape::new();
        let p = [tape.leaf(1.0), tape.leaf(2.0), tape.leaf(0.0)];
        let ds = DiffSweep { points: vec![p], offsets: vec![0, 1] };
        let l = detector_loss(&mut tape, &ds, &[], Branch::Classification, &DetectorConfig::default());
        assert_eq!(tape.value(l), 0.0);
        assert_eq!(tape.backward(l).unwrap().wrt(p[0]), 0.0);
    }
}
