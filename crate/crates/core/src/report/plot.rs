// SPDX-License-Identifier: Apache-2.0

//! Static SVG line plots: line capacitance and resistance against cells per
//! line, and worst-case settling time with its exponential fits.

use std::fmt::Write as _;

use super::Characterization;
use crate::transient::ExpFit;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;
const Y_TICKS: usize = 5;
/// Extra samples drawn between the data sizes on a fit curve.
const FIT_SAMPLES: usize = 32;
const PALETTE: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

/// Samples `fit` at each `n`.
pub fn fit_overlay(fit: &ExpFit, ns: &[f64]) -> Vec<(f64, f64)> {
    ns.iter().map(|&n| (n, fit.eval(n))).collect()
}

/// Three significant digits without exponent for the magnitudes plotted.
fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (2 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
    fit: bool,
}

struct Panel {
    title: String,
    y_label: String,
    series: Vec<Series>,
    note: Option<String>,
}

fn draw_panel(out: &mut String, panel: &Panel, x_off: f64) {
    let all = panel.series.iter().flat_map(|s| &s.points);
    let x_max = all.clone().map(|p| p.0).fold(0.0, f64::max).max(1.0);
    let y_max = all.map(|p| p.1).fold(0.0, f64::max);
    let y_max = if y_max > 0.0 { 1.05 * y_max } else { 1.0 };
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let px = |x: f64| x_off + MARGIN_L + x / x_max * plot_w;
    let py = |y: f64| MARGIN_T + plot_h - y / y_max * plot_h;

    let _ = writeln!(out, r#"<g class="panel">"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-weight="bold">{}</text>"#,
        x_off + PANEL_W / 2.0,
        escape(&panel.title)
    );
    let (x0, y0, x1, y1) = (px(0.0), py(0.0), px(x_max), py(y_max));
    let _ = writeln!(
        out,
        r##"<path class="axes" d="M{x0:.2} {y1:.2} L{x0:.2} {y0:.2} L{x1:.2} {y0:.2}" stroke="#000000" fill="none"/>"##
    );
    let mut xs: Vec<f64> = panel
        .series
        .iter()
        .filter(|s| !s.fit)
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for x in &xs {
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(*x),
            y0 + 16.0,
            sig3(*x)
        );
    }
    for k in 0..=Y_TICKS {
        let v = y_max * k as f64 / Y_TICKS as f64;
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            py(v) + 4.0,
            sig3(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text class="axis-label" x="{:.2}" y="{:.2}" text-anchor="middle">cells per line</text>"#,
        (x0 + x1) / 2.0,
        y0 + 36.0
    );
    let _ = writeln!(
        out,
        r#"<text class="axis-label" x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
        x_off + 16.0,
        (y0 + y1) / 2.0,
        x_off + 16.0,
        (y0 + y1) / 2.0,
        escape(&panel.y_label)
    );

    let mut color_idx = 0;
    let mut color = PALETTE[0];
    let mut legend_y = MARGIN_T + 8.0;
    for s in &panel.series {
        // a fit reuses the colour of the data series drawn before it
        if !s.fit {
            color = PALETTE[color_idx % PALETTE.len()];
            color_idx += 1;
        }
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let (class, dash) = if s.fit {
            ("fit", r#" stroke-dasharray="4 3""#)
        } else {
            ("series", "")
        };
        let _ = writeln!(
            out,
            r#"<polyline class="{class}" data-series="{}" points="{}" stroke="{color}" fill="none"{dash}/>"#,
            escape(&s.name),
            pts.join(" ")
        );
        if !s.fit {
            for &(x, y) in &s.points {
                let _ = writeln!(
                    out,
                    r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    px(x),
                    py(y)
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text class="legend" x="{:.2}" y="{legend_y:.2}" fill="{color}">{}</text>"#,
            x0 + 10.0,
            escape(&s.name)
        );
        legend_y += 14.0;
    }
    if let Some(note) = &panel.note {
        let _ = writeln!(
            out,
            r#"<text class="note" x="{:.2}" y="{:.2}">{}</text>"#,
            x0,
            PANEL_H - 8.0,
            escape(note)
        );
    }
    let _ = writeln!(out, "</g>");
}

fn dense_sizes(ns: &[f64]) -> Vec<f64> {
    let lo = ns.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = ns.to_vec();
    for k in 0..=FIT_SAMPLES {
        out.push(lo + (hi - lo) * k as f64 / FIT_SAMPLES as f64);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn parasitic_panel(report: &Characterization, prefix: &str, title: &str, y_label: &str, scale: f64) -> Panel {
    let series = report
        .parasitics
        .metrics()
        .into_iter()
        .filter(|m| m.starts_with(prefix))
        .map(|m| Series {
            name: match report.linear_fit(m) {
                Some(f) => format!("{} ({}/cell)", m.to_uppercase(), sig3(f.slope * scale)),
                None => m.to_uppercase(),
            },
            points: report
                .parasitics
                .series(m)
                .into_iter()
                .map(|(n, v)| (n, v * scale))
                .collect(),
            fit: false,
        })
        .collect();
    Panel {
        title: title.into(),
        y_label: y_label.into(),
        series,
        note: None,
    }
}

/// Renders the three characterization panels side by side.
pub fn render_plots(report: &Characterization) -> String {
    const PS: f64 = 1e12;
    let mut settling = Vec::new();
    for (corner, fit) in &report.settling_fits {
        let pts: Vec<(f64, f64)> = report
            .settling
            .iter()
            .filter(|r| r.corner == *corner)
            .map(|r| (r.n_cells as f64, r.settling_time))
            .collect();
        let ns: Vec<f64> = pts.iter().map(|p| p.0).collect();
        settling.push(Series {
            name: corner.to_string(),
            points: pts.iter().map(|&(n, t)| (n, t * PS)).collect(),
            fit: false,
        });
        settling.push(Series {
            name: format!(
                "{corner} fit: {} ps·exp({}·n)",
                sig3(fit.a * PS),
                sig3(fit.k)
            ),
            points: fit_overlay(fit, &dense_sizes(&ns))
                .into_iter()
                .map(|(n, t)| (n, t * PS))
                .collect(),
            fit: true,
        });
    }
    let panels = [
        parasitic_panel(report, "c_", "Line capacitance", "C (fF)", 1e15),
        parasitic_panel(report, "r_", "Line resistance", "R (Ω)", 1.0),
        Panel {
            title: "Worst-case read settling (1% band)".into(),
            y_label: "settling time (ps)".into(),
            series: settling,
            note: Some("dashed: least-squares exponential fit".into()),
        },
    ];

    let width = PANEL_W * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{PANEL_H:.0}" viewBox="0 0 {width:.0} {PANEL_H:.0}" font-family="sans-serif" font-size="11">"#
    );
    let desc: Vec<String> = report
        .parasitics
        .metadata
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    let _ = writeln!(out, "<desc>{}</desc>", escape(&desc.join("; ")));
    let _ = writeln!(
        out,
        r##"<rect x="0" y="0" width="{width:.0}" height="{PANEL_H:.0}" fill="#ffffff"/>"##
    );
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut out, p, i as f64 * PANEL_W);
    }
    let _ = writeln!(out, "</svg>");
    out
}
