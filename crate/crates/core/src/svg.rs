//! Hand-rolled SVG 1.1 charts: space-time diagrams and sweep summaries.
//!
//! Coordinate mapping: a fixed 900x560 viewport with margins
//! (left 70, right 70, top 40, bottom 50). Data (x, y) maps linearly onto
//! the plot rectangle, y inverted so larger values are higher. All numbers
//! are written with fixed precision, so output is byte-stable.

use std::fmt::Write as _;

use crate::lane::Lane;
use crate::metrics::RunSummary;
use crate::sim::TrajectoryLog;

const W: f64 = 900.0;
const H: f64 = 560.0;
const ML: f64 = 70.0;
const MR: f64 = 70.0;
const MT: f64 = 40.0;
const MB: f64 = 50.0;

const SERIES_COLORS: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axis {
    min: f64,
    max: f64,
}

impl Axis {
    fn new(min: f64, max: f64) -> Self {
        let (min, max) = if (max - min).abs() < 1e-12 {
            (min - 1.0, max + 1.0)
        } else {
            (min, max)
        };
        Axis { min, max }
    }

    fn from_values(values: impl Iterator<Item = f64>) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if lo > hi {
            return Axis::new(0.0, 1.0);
        }
        let pad = 0.05 * (hi - lo).max(1e-9);
        Axis::new(lo - pad, hi + pad)
    }

    fn x(&self, v: f64) -> f64 {
        ML + (v - self.min) / (self.max - self.min) * (W - ML - MR)
    }

    fn y(&self, v: f64) -> f64 {
        H - MB - (v - self.min) / (self.max - self.min) * (H - MT - MB)
    }
}

fn open_svg(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" \
         font-family=\"sans-serif\" font-size=\"16\">{title}</text>\n",
        W / 2.0
    );
}

fn axes(out: &mut String, xa: &Axis, ya: &Axis, x_label: &str, y_label: &str) {
    let _ = write!(
        out,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"black\"/>\n",
        W - ML - MR,
        H - MT - MB
    );
    // 5 ticks per axis with value labels
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let xv = xa.min + f * (xa.max - xa.min);
        let yv = ya.min + f * (ya.max - ya.min);
        let xp = xa.x(xv);
        let yp = ya.y(yv);
        let _ = write!(
            out,
            "<line x1=\"{xp:.1}\" y1=\"{:.1}\" x2=\"{xp:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
             <text x=\"{xp:.1}\" y=\"{:.1}\" text-anchor=\"middle\" \
             font-family=\"sans-serif\" font-size=\"11\">{xv:.1}</text>\n\
             <line x1=\"{:.1}\" y1=\"{yp:.1}\" x2=\"{ML}\" y2=\"{yp:.1}\" stroke=\"black\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" \
             font-family=\"sans-serif\" font-size=\"11\">{yv:.1}</text>\n",
            H - MB,
            H - MB + 5.0,
            H - MB + 18.0,
            ML - 5.0,
            ML - 8.0,
            yp + 4.0
        );
    }
    let _ = write!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" \
         font-family=\"sans-serif\" font-size=\"13\">{x_label}</text>\n\
         <text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" \
         font-family=\"sans-serif\" font-size=\"13\" \
         transform=\"rotate(-90 16 {:.1})\">{y_label}</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0,
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    );
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str, dash: Option<&str>) {
    if pts.is_empty() {
        return;
    }
    let mut d = String::new();
    for &(x, y) in pts {
        let _ = write!(d, "{x:.2},{y:.2} ");
    }
    let dash_attr = dash.map(|p| format!(" stroke-dasharray=\"{p}\"")).unwrap_or_default();
    let _ = write!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
         stroke-width=\"1\"{dash_attr}/>\n",
        d.trim_end()
    );
}

/// Space-time diagram for one lane: time on x, lane-frame position on y.
/// Green dashed lines mark the control-region boundary at ±R, a gray
/// dashed line marks the intersection center.
pub fn spacetime_svg(log: &TrajectoryLog, lane: Lane) -> String {
    let cfg = &log.config;
    let mut out = String::new();
    open_svg(&mut out, &format!("Space-time diagram, lane {lane}, R = {}", cfg.radius));
    let xa = Axis::new(0.0, cfg.duration);
    let ya = Axis::new(cfg.lane_start, cfg.lane_end);
    axes(&mut out, &xa, &ya, "time [s]", "lane position [m]");

    // Clip trajectories to the plot rectangle.
    let _ = write!(
        out,
        "<clipPath id=\"plot\"><rect x=\"{ML}\" y=\"{MT}\" width=\"{:.1}\" \
         height=\"{:.1}\"/></clipPath>\n<g clip-path=\"url(#plot)\">\n",
        W - ML - MR,
        H - MT - MB
    );
    for (lvl, color) in [(-cfg.radius, "green"), (cfg.radius, "green"), (0.0, "gray")] {
        let y = ya.y(lvl);
        let _ = write!(
            out,
            "<line x1=\"{ML}\" y1=\"{y:.2}\" x2=\"{:.1}\" y2=\"{y:.2}\" \
             stroke=\"{color}\" stroke-dasharray=\"6 4\"/>\n",
            W - MR
        );
    }
    for a in log.agents.iter().filter(|a| a.lane == lane) {
        let pts: Vec<(f64, f64)> = a
            .trajectory
            .iter()
            .map(|p| (xa.x(p.t as f64 * cfg.dt), ya.y(lane.lane_pos(p.x, p.y))))
            .collect();
        polyline(&mut out, &pts, "#1f77b4", None);
    }
    out.push_str("</g>\n</svg>\n");
    out
}

fn ok_rows(rows: &[RunSummary]) -> Vec<&RunSummary> {
    rows.iter().filter(|r| r.status == "ok").collect()
}

/// Average delay (left axis) and total solver time (right axis) vs radius.
pub fn delay_vs_radius_svg(rows: &[RunSummary]) -> String {
    let mut rows: Vec<&RunSummary> = ok_rows(rows);
    rows.sort_by(|a, b| a.radius.total_cmp(&b.radius));
    let mut out = String::new();
    open_svg(&mut out, "Average delay and solver runtime vs control-region radius");
    let xa = Axis::from_values(rows.iter().map(|r| r.radius));
    let ya = Axis::from_values(rows.iter().map(|r| r.average_delay).chain([0.0]));
    axes(&mut out, &xa, &ya, "radius [m]", "average delay [s]");

    let delay_pts: Vec<(f64, f64)> =
        rows.iter().map(|r| (xa.x(r.radius), ya.y(r.average_delay))).collect();
    polyline(&mut out, &delay_pts, SERIES_COLORS[0], None);
    for &(x, y) in &delay_pts {
        let _ = write!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{}\"/>\n", SERIES_COLORS[0]);
    }

    // Right axis for runtime.
    let ra = Axis::from_values(rows.iter().map(|r| r.total_solver_time).chain([0.0]));
    let run_pts: Vec<(f64, f64)> =
        rows.iter().map(|r| (xa.x(r.radius), ra.y(r.total_solver_time))).collect();
    polyline(&mut out, &run_pts, SERIES_COLORS[3], None);
    for &(x, y) in &run_pts {
        let _ = write!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{}\"/>\n", SERIES_COLORS[3]);
    }
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let rv = ra.min + f * (ra.max - ra.min);
        let yp = ra.y(rv);
        let _ = write!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"start\" \
             font-family=\"sans-serif\" font-size=\"11\" fill=\"{}\">{rv:.1}</text>\n",
            W - MR + 8.0,
            yp + 4.0,
            SERIES_COLORS[3]
        );
    }
    let _ = write!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" \
         font-family=\"sans-serif\" font-size=\"13\" fill=\"{}\" \
         transform=\"rotate(90 {:.1} {:.1})\">total solver time [s]</text>\n",
        W - 16.0,
        (MT + H - MB) / 2.0,
        SERIES_COLORS[3],
        W - 16.0,
        (MT + H - MB) / 2.0
    );
    let _ = write!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
         fill=\"{}\">average delay</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
         fill=\"{}\">total solver time</text>\n",
        ML + 10.0,
        MT + 18.0,
        SERIES_COLORS[0],
        ML + 10.0,
        MT + 34.0,
        SERIES_COLORS[3]
    );
    out.push_str("</svg>\n");
    out
}

/// Average delay vs s_dist, one series per radius.
pub fn delay_vs_s_dist_svg(rows: &[RunSummary]) -> String {
    let rows = ok_rows(rows);
    let mut radii: Vec<f64> = rows.iter().map(|r| r.radius).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let mut out = String::new();
    open_svg(&mut out, "Average delay vs separation distance");
    let xa = Axis::from_values(rows.iter().map(|r| r.s_dist));
    let ya = Axis::from_values(rows.iter().map(|r| r.average_delay).chain([0.0]));
    axes(&mut out, &xa, &ya, "s_dist [m]", "average delay [s]");
    for (ri, &radius) in radii.iter().enumerate() {
        let color = SERIES_COLORS[ri % SERIES_COLORS.len()];
        let mut series: Vec<&&RunSummary> =
            rows.iter().filter(|r| r.radius == radius).collect();
        series.sort_by(|a, b| a.s_dist.total_cmp(&b.s_dist));
        let pts: Vec<(f64, f64)> =
            series.iter().map(|r| (xa.x(r.s_dist), ya.y(r.average_delay))).collect();
        polyline(&mut out, &pts, color, None);
        for &(x, y) in &pts {
            let _ = write!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{color}\"/>\n");
        }
        let _ = write!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" \
             font-size=\"12\" fill=\"{color}\">R = {radius}</text>\n",
            ML + 10.0,
            MT + 18.0 + 16.0 * ri as f64
        );
    }
    out.push_str("</svg>\n");
    out
}
