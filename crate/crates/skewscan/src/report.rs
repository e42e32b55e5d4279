//! CSV tables and SVG charts for traces, reports and point clouds.

use std::fmt::Write as _;

use skewscan_core::attack::LossTrace;
use skewscan_core::detector::{Box3D, Detection};
use skewscan_core::metrics::{pooled_ap, ApResult, EvalConfig, EvalReport, Frame, Matcher, Scored};
use skewscan_core::Vec3;

pub fn trace_csv(trace: &LossTrace) -> String {
    let mut out = String::from("iter,loss,objective\n");
    for (i, (l, o)) in trace.loss.iter().zip(&trace.objective).enumerate() {
        writeln!(out, "{i},{l},{o}").unwrap();
    }
    out
}

/// Parses the output of [`trace_csv`].
pub fn parse_trace_csv(text: &str) -> Option<LossTrace> {
    let mut trace = LossTrace { loss: Vec::new(), objective: Vec::new() };
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return None;
        }
        trace.loss.push(f[1].parse().ok()?);
        trace.objective.push(f[2].parse().ok()?);
    }
    Some(trace)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per bin: AP, ground-truth count and, when present, the drop.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("bin,ap,defined,num_gt,before,absolute_drop,relative_drop\n");
    for (k, b) in report.ap_by_bin.iter().enumerate() {
        let d = report.drop.as_ref().and_then(|d| d.get(k));
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            b.bin,
            b.ap,
            b.defined,
            b.num_gt,
            opt(d.map(|d| d.before)),
            opt(d.map(|d| d.absolute)),
            opt(d.and_then(|d| d.relative)),
        )
        .unwrap();
    }
    for (t, ap) in &report.ap_center {
        writeln!(out, "center@{t}m,{ap},,,,,").unwrap();
    }
    writeln!(out, "center-mean,{},,,,,", report.ap_center_mean).unwrap();
    out
}

pub fn per_scene_csv(seeds: &[u64], report: &EvalReport) -> String {
    let mut out = String::from("seed,ap\n");
    for (s, ap) in seeds.iter().zip(&report.per_scene_ap) {
        writeln!(out, "{s},{ap}").unwrap();
    }
    out
}

/// Precision/recall curve of the "all" bin, with the same visibility rule
/// as the report.
pub fn pr_curve(scenes: &[Scored<'_>], cfg: &EvalConfig) -> ApResult {
    let visible: Vec<Vec<bool>> = scenes.iter().map(|s| s.gt_points.iter().map(|&c| c > 0).collect()).collect();
    let frames: Vec<Frame<'_>> = scenes
        .iter()
        .zip(&visible)
        .map(|(s, v)| Frame { dets: s.dets, gts: s.gts, gt_active: Some(v), det_active: None })
        .collect();
    pooled_ap(&frames, Matcher::Iou(cfg.iou_threshold))
}

pub fn pr_csv(curve: &ApResult) -> String {
    let mut out = String::from("recall,precision\n");
    for (r, p) in curve.recall.iter().zip(&curve.precision) {
        writeln!(out, "{r},{p}").unwrap();
    }
    out
}

pub fn parse_pr_csv(text: &str) -> Option<Vec<(f64, f64)>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (r, p) = l.split_once(',')?;
            Some((r.parse().ok()?, p.parse().ok()?))
        })
        .collect()
}

pub fn detections_csv(dets: &[Detection]) -> String {
    let mut out = String::from("x,y,z,length,width,height,yaw,score\n");
    for d in dets {
        let b = &d.bbox;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            b.center[0], b.center[1], b.center[2], b.size[0], b.size[1], b.size[2], b.yaw, d.score
        )
        .unwrap();
    }
    out
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for (a, b) in points.filter(|(a, b)| a.is_finite() && b.is_finite()) {
            x = (x.0.min(a), x.1.max(a));
            y = (y.0.min(b), y.1.max(b));
        }
        let widen = |r: (f64, f64)| {
            if !r.0.is_finite() {
                (0.0, 1.0)
            } else if r.1 - r.0 < 1e-12 {
                (r.0 - 0.5, r.1 + 0.5)
            } else {
                r
            }
        };
        Self { x: widen(x), y: widen(y) }
    }

    fn px(&self, v: f64) -> f64 {
        MARGIN + (v - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, v: f64) -> f64 {
        H - MARGIN - (v - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }
}

fn svg_open(out: &mut String, title: &str, xlabel: &str, ylabel: &str, axes: &Axes) {
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="25" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, escape(title)).unwrap();
    let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
    writeln!(out, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel)).unwrap();
    writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    )
    .unwrap();
    for (v, x) in [(axes.x.0, x0), (axes.x.1, x1)] {
        writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="10">{}</text>"#, y0 + 14.0, tick(v)).unwrap();
    }
    for (v, y) in [(axes.y.0, y0), (axes.y.1, y1)] {
        writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end" font-size="10">{}</text>"#, x0 - 4.0, tick(v)).unwrap();
    }
}

fn tick(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn legend(out: &mut String, names: &[&str]) {
    for (k, name) in names.iter().enumerate() {
        let y = MARGIN + 14.0 * k as f64;
        writeln!(
            out,
            r#"<text x="{}" y="{y}" text-anchor="end" font-size="11" fill="{}">{}</text>"#,
            W - MARGIN,
            COLORS[k % COLORS.len()],
            escape(name)
        )
        .unwrap();
    }
}

/// Line chart of named series.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let axes = Axes::fit(series.iter().flat_map(|(_, s)| s.iter().copied()));
    let mut out = String::new();
    svg_open(&mut out, title, xlabel, ylabel, &axes);
    for (k, (_, s)) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .iter()
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|&(a, b)| format!("{:.2},{:.2}", axes.px(a), axes.py(b)))
            .collect();
        writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            COLORS[k % COLORS.len()]
        )
        .unwrap();
    }
    legend(&mut out, &series.iter().map(|(n, _)| *n).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

pub fn trace_chart(trace: &LossTrace) -> String {
    let idx = |v: &[f64]| v.iter().enumerate().map(|(i, &x)| (i as f64, x)).collect::<Vec<_>>();
    line_chart(
        "Attack loss",
        "iteration",
        "value",
        &[("loss", idx(&trace.loss)), ("objective", idx(&trace.objective))],
    )
}

/// Bird's-eye scatter of two point sets with optional boxes.
pub fn bev_scatter(clean: &[Vec3], attacked: &[Vec3], boxes: &[Box3D], max_points: usize) -> String {
    let stride = |n: usize| (n / max_points.max(1)).max(1);
    let axes = Axes::fit(
        clean
            .iter()
            .chain(attacked)
            .map(|p| (p[0], p[1]))
            .chain(boxes.iter().flat_map(|b| b.bev_corners().map(|c| (c[0], c[1])))),
    );
    let mut out = String::new();
    svg_open(&mut out, "Bird's-eye view", "x (m)", "y (m)", &axes);
    for (k, set) in [clean, attacked].iter().enumerate() {
        let color = COLORS[k];
        for p in set.iter().step_by(stride(set.len())) {
            writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="0.8" fill="{color}"/>"#, axes.px(p[0]), axes.py(p[1])).unwrap();
        }
    }
    for b in boxes {
        let c = b.bev_corners();
        let d: Vec<String> = c.iter().map(|q| format!("{:.2},{:.2}", axes.px(q[0]), axes.py(q[1]))).collect();
        writeln!(out, r#"<polygon points="{}" fill="none" stroke="black"/>"#, d.join(" ")).unwrap();
    }
    legend(&mut out, &["clean", "perturbed"]);
    out.push_str("</svg>\n");
    out
}
