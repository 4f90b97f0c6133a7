//! Plain-text SVG charts: reward curves and per-lane trajectories.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::records::{LogRow, TrajectoryRecord};

const W: f64 = 720.0;
const PANEL_H: f64 = 220.0;
const MARGIN: f64 = 50.0;
const CAV_COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const HV_COLOR: &str = "#b0b0b0";

/// Trailing-window mean and population standard deviation.
pub fn rolling_stats(values: &[f64], window: usize) -> Vec<(f64, f64)> {
    let window = window.max(1);
    (0..values.len())
        .map(|i| {
            let s = &values[(i + 1).saturating_sub(window)..=i];
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            let var = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect()
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    top: f64,
}

impl Frame {
    fn new(xs: (f64, f64), ys: (f64, f64), top: f64) -> Self {
        let pad = |(a, b): (f64, f64)| if (b - a).abs() < 1e-12 { (a - 1.0, b + 1.0) } else { (a, b) };
        let ((x0, x1), (y0, y1)) = (pad(xs), pad(ys));
        Self { x0, x1, y0, y1, top }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        self.top + PANEL_H - 30.0 - (y - self.y0) / (self.y1 - self.y0) * (PANEL_H - 60.0)
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (l, r, t, b) = (MARGIN, W - MARGIN, self.top + 30.0, self.top + PANEL_H - 30.0);
        let _ = write!(
            out,
            r##"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="#333"/><text x="{l}" y="{}" font-size="13">{title}</text><text x="{}" y="{}" font-size="11" text-anchor="middle">{xlabel}</text><text x="12" y="{}" font-size="11" transform="rotate(-90 12 {})" text-anchor="middle">{ylabel}</text><text x="{}" y="{}" font-size="10" text-anchor="end">{:.1}</text><text x="{}" y="{}" font-size="10" text-anchor="end">{:.1}</text>"##,
            r - l,
            b - t,
            t - 8.0,
            W / 2.0,
            b + 22.0,
            (t + b) / 2.0,
            (t + b) / 2.0,
            l - 4.0,
            b,
            self.y0,
            l - 4.0,
            t + 10.0,
            self.y1,
        );
    }
}

fn points(frame: &Frame, pts: impl Iterator<Item = (f64, f64)>) -> String {
    pts.map(|(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))).collect::<Vec<_>>().join(" ")
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Reward per episode for both dimensions, each with a rolling mean ± std band.
pub fn render_rewards(logs: &[LogRow], window: usize) -> String {
    let series: [(&str, Vec<f64>); 2] = [
        ("L-reward", logs.iter().map(|l| l.l_reward).collect()),
        ("F-reward", logs.iter().map(|l| l.f_reward).collect()),
    ];
    let mut out = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{}">"#, PANEL_H * 2.0);
    for (k, (name, ys)) in series.iter().enumerate() {
        let stats = rolling_stats(ys, window);
        let xs: Vec<f64> = logs.iter().map(|l| l.episode as f64).collect();
        let lo = stats.iter().map(|(m, s)| m - s).chain(ys.iter().copied());
        let hi = stats.iter().map(|(m, s)| m + s);
        let (ylo, yhi) = range(lo.chain(hi));
        let frame = Frame::new(range(xs.iter().copied()), (ylo, yhi), k as f64 * PANEL_H);
        let _ = write!(out, r#"<g class="reward-panel" data-series="{name}">"#);
        frame.axes(&mut out, name, "episode", "reward");
        let upper = points(&frame, xs.iter().zip(&stats).map(|(&x, (m, s))| (x, m + s)));
        let lower = points(&frame, xs.iter().zip(&stats).rev().map(|(&x, (m, s))| (x, m - s)));
        let _ = write!(
            out,
            r##"<polygon class="band" points="{upper} {lower}" fill="#1f77b4" fill-opacity="0.2" stroke="none"/><polyline class="raw" points="{}" fill="none" stroke="#999" stroke-width="0.8"/><polyline class="mean" points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/></g>"##,
            points(&frame, xs.iter().copied().zip(ys.iter().copied())),
            points(&frame, xs.iter().zip(&stats).map(|(&x, (m, _))| (x, *m))),
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One time–position panel per lane; each vehicle contributes one polyline
/// per contiguous stay in that lane. CAVs are colored, HVs gray.
pub fn render_trajectories(records: &[TrajectoryRecord], lanes: u8) -> String {
    let frame_x = range(records.iter().map(|r| r.time));
    let frame_y = range(records.iter().map(|r| r.pos));
    let mut by_vehicle: BTreeMap<u32, Vec<&TrajectoryRecord>> = BTreeMap::new();
    for r in records {
        by_vehicle.entry(r.id).or_default().push(r);
    }
    let cav_ids: Vec<u32> = by_vehicle.iter().filter(|(_, rs)| rs[0].is_cav()).map(|(&id, _)| id).collect();
    let mut out = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{}">"#, PANEL_H * f64::from(lanes));
    // Fast lane on top, as seen from above with traffic moving right.
    for (k, lane) in (0..lanes).rev().enumerate() {
        let frame = Frame::new(frame_x, frame_y, k as f64 * PANEL_H);
        let mut lines = Vec::new();
        for (id, rs) in &by_vehicle {
            for run in rs.chunk_by(|a, b| a.lane == b.lane).filter(|run| run[0].lane == lane) {
                let color = match cav_ids.iter().position(|c| c == id) {
                    Some(i) => CAV_COLORS[i % CAV_COLORS.len()],
                    None => HV_COLOR,
                };
                let width = if run[0].is_cav() { 2.0 } else { 1.0 };
                lines.push(format!(
                    r#"<polyline data-id="{id}" points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
                    points(&frame, run.iter().map(|r| (r.time, r.pos)))
                ));
            }
        }
        let vehicles: std::collections::BTreeSet<&str> =
            lines.iter().filter_map(|l| l.split('"').nth(1)).collect();
        let _ = write!(out, r#"<g class="lane-panel" data-lane="{lane}" data-vehicles="{}">"#, vehicles.len());
        frame.axes(&mut out, &format!("lane {lane}"), "time (s)", "position (m)");
        for l in lines {
            out.push_str(&l);
        }
        out.push_str("</g>");
    }
    out.push_str("</svg>\n");
    out
}
