//! Minimal SVG figure: EWMA accuracy per learner on top, inferred context
//! ids of the context-aware learners below. Partition boundaries are drawn
//! as dashed verticals in both panels.

use std::fmt::Write as _;

use crate::eval::EvaluationTrace;
use crate::learners::LearnerKind;
use crate::stream::StreamSpec;

const WIDTH: f64 = 900.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 140.0;
const TOP_H: f64 = 260.0;
const BOTTOM_H: f64 = 140.0;
const GAP: f64 = 40.0;
const MARGIN: f64 = 30.0;

fn color(kind: LearnerKind) -> &'static str {
    match kind {
        LearnerKind::IcalMem => "#1f77b4",
        LearnerKind::Ical => "#ff7f0e",
        LearnerKind::NonCal => "#2ca02c",
        LearnerKind::Myopic => "#d62728",
    }
}

fn polyline(points: &[(f64, f64)], stroke: &str) -> String {
    let mut d = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        let _ = write!(d, "{}{x:.1},{y:.1}", if i == 0 { "" } else { " " });
    }
    format!("<polyline fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.2\" points=\"{d}\"/>\n")
}

/// Renders the figure for one run. Returns an SVG document.
pub fn render_svg(traces: &[EvaluationTrace], spec: &StreamSpec, title: &str) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let height = MARGIN * 2.0 + TOP_H + GAP + BOTTOM_H;
    let total = spec.total_length.max(1) as f64;
    let sx = |step: usize| LEFT + plot_w * step as f64 / total;
    let top0 = MARGIN;
    let bot0 = MARGIN + TOP_H + GAP;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{LEFT}\" y=\"18\" font-size=\"13\">{}</text>",
        escape(title)
    );

    for (y0, h) in [(top0, TOP_H), (bot0, BOTTOM_H)] {
        let _ = writeln!(
            svg,
            "<rect x=\"{LEFT}\" y=\"{y0}\" width=\"{plot_w}\" height=\"{h}\" fill=\"none\" stroke=\"#444\"/>"
        );
        for p in 1..spec.partitions() {
            let x = sx(p * spec.partition_length);
            let _ = writeln!(
                svg,
                "<line x1=\"{x:.1}\" y1=\"{y0}\" x2=\"{x:.1}\" y2=\"{}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>",
                y0 + h
            );
        }
    }
    for (v, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
        let y = top0 + TOP_H * (1.0 - v);
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{label}</text>",
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"14\" y=\"{:.1}\" transform=\"rotate(-90 14 {:.1})\" text-anchor=\"middle\">EWMA accuracy</text>",
        top0 + TOP_H / 2.0,
        top0 + TOP_H / 2.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"14\" y=\"{:.1}\" transform=\"rotate(-90 14 {:.1})\" text-anchor=\"middle\">context id</text>",
        bot0 + BOTTOM_H / 2.0,
        bot0 + BOTTOM_H / 2.0
    );

    for t in traces {
        let pts: Vec<_> = t
            .steps
            .iter()
            .map(|s| (sx(s.step), top0 + TOP_H * (1.0 - s.ewma_accuracy)))
            .collect();
        svg.push_str(&polyline(&pts, color(t.learner)));
    }

    let aware: Vec<_> = traces.iter().filter(|t| t.learner.is_context_aware()).collect();
    let max_id = aware
        .iter()
        .flat_map(|t| t.steps.iter().map(|s| s.context_id))
        .max()
        .unwrap_or(1)
        .max(2);
    let sy = |id: u32| bot0 + BOTTOM_H - 10.0 - (BOTTOM_H - 20.0) * (id - 1) as f64 / (max_id - 1) as f64;
    for id in 1..=max_id {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{id}</text>",
            LEFT - 6.0,
            sy(id) + 4.0
        );
    }
    for t in &aware {
        // staircase
        let mut pts = Vec::with_capacity(t.steps.len() * 2);
        for (i, s) in t.steps.iter().enumerate() {
            if i > 0 {
                pts.push((sx(s.step), sy(t.steps[i - 1].context_id)));
            }
            pts.push((sx(s.step), sy(s.context_id)));
        }
        svg.push_str(&polyline(&pts, color(t.learner)));
    }

    for (i, t) in traces.iter().enumerate() {
        let y = top0 + 12.0 + 16.0 * i as f64;
        let x = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{x}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{}\" stroke-width=\"2\"/>",
            x + 18.0,
            color(t.learner)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\">{}</text>",
            x + 24.0,
            y + 4.0,
            t.learner.name()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
