use std::fmt::Write as _;

use super::EvalConfig;
use crate::bnb::IncumbentTrajectory;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 620.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 440.0;
const TICKS: usize = 5;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v == v.round() && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Step-function primal bound curves on a fixed 800x500 canvas.
///
/// Each curve starts at its first incumbent and holds the last bound until
/// the horizon. Trajectories without incumbents appear in the legend only.
pub fn plot_primal_bound(series: &[(&str, &IncumbentTrajectory)], cfg: &EvalConfig) -> String {
    let horizon = cfg.step_limit.max(1) as f64;
    let objectives = series
        .iter()
        .flat_map(|(_, t)| t.events.iter().map(|e| e.objective));
    let (mut lo, mut hi) = objectives.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        lo = cfg.reference_objective;
        hi = cfg.no_incumbent_value;
    }
    if hi - lo < 1e-9 {
        let pad = lo.abs().max(1.0) * 0.05;
        lo -= pad;
        hi += pad;
    } else {
        let pad = (hi - lo) * 0.05;
        lo -= pad;
        hi += pad;
    }

    let sx = |step: f64| LEFT + (RIGHT - LEFT) * step / horizon;
    let sy = |v: f64| BOTTOM - (BOTTOM - TOP) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        "<line x1=\"{LEFT}\" y1=\"{BOTTOM}\" x2=\"{RIGHT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>\n\
         <line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>"
    );
    for k in 0..=TICKS {
        let frac = k as f64 / TICKS as f64;
        let step = (horizon * frac).round();
        let x = sx(step);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{BOTTOM}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
             <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            BOTTOM + 5.0,
            BOTTOM + 20.0,
            tick_label(step)
        );
        let v = lo + (hi - lo) * frac;
        let y = sy(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{LEFT}\" y2=\"{y:.2}\" stroke=\"black\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick_label(v)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">step</text>\n\
         <text x=\"20\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.2})\">primal bound</text>",
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 45.0,
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0
    );

    for (idx, (label, traj)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        if let Some(first) = traj.events.first() {
            let mut pts = vec![(first.step as f64, first.objective)];
            let mut current = first.objective;
            for e in &traj.events[1..] {
                pts.push((e.step as f64, current));
                pts.push((e.step as f64, e.objective));
                current = e.objective;
            }
            pts.push((horizon, current));
            let coords: Vec<String> = pts
                .iter()
                .map(|&(s, v)| format!("{:.2},{:.2}", sx(s), sy(v)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                coords.join(" ")
            );
        }
        let ly = TOP + 20.0 * idx as f64;
        let _ = writeln!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"14\" height=\"4\" fill=\"{color}\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            RIGHT + 20.0,
            ly,
            RIGHT + 40.0,
            ly + 5.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
