// SPDX-License-Identifier: Apache-2.0

//! Flattened SVG rendering for visual inspection.
//!
//! Drawing units are database nanometres with the y axis flipped so the
//! layout reads the same way as in a layout viewer.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{Bbox, LayerMap, LayoutDb, POLY, M1, M4};

#[derive(Debug, Clone)]
pub struct SvgOptions {
    /// Rendered width of the layout area in pixels.
    pub width_px: f64,
    pub layers: LayerMap,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            width_px: 1200.0,
            layers: LayerMap::default(),
        }
    }
}

fn color(name: Option<&str>) -> &'static str {
    match name {
        Some(POLY) => "#d62728",
        Some(M1) => "#1f77b4",
        Some(M4) => "#2ca02c",
        _ => "#7f7f7f",
    }
}

pub fn render_svg(db: &LayoutDb, options: &SvgOptions) -> String {
    let rects = db.flatten();
    let bb = db.bbox().unwrap_or(Bbox {
        x0: 0,
        y0: 0,
        x1: 1000,
        y1: 1000,
    });
    let margin = (bb.width().max(bb.height()) / 20).max(500);
    let legend_row = margin;
    let layers: BTreeSet<_> = rects.iter().map(|r| r.layer).collect();
    let legend_h = legend_row * (layers.len() as i64 + 2);
    let vx = bb.x0 - margin;
    let vy = -margin;
    let vw = bb.width() + 2 * margin;
    let vh = bb.height() + 2 * margin + legend_h;
    let scale = options.width_px / vw as f64;
    let flip = |y: i64| bb.y1 - y;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0}" height="{:.0}" viewBox="{vx} {vy} {vw} {vh}">"#,
        vw as f64 * scale,
        vh as f64 * scale
    );
    let _ = writeln!(
        out,
        r##"<rect class="background" x="{vx}" y="{vy}" width="{vw}" height="{vh}" fill="#ffffff"/>"##
    );
    let _ = writeln!(out, r#"<g fill-opacity="0.6" stroke="none">"#);
    for r in &rects {
        let name = options.layers.name_of(r.layer);
        let _ = writeln!(
            out,
            r#"<rect class="shape" data-layer="{}" x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
            r.layer,
            r.x0,
            flip(r.y1),
            r.width(),
            r.height(),
            color(name)
        );
    }
    let _ = writeln!(out, "</g>");

    let font = legend_row * 6 / 10;
    let top = bb.height() + margin;
    let _ = writeln!(out, r#"<g class="legend" font-family="sans-serif" font-size="{font}">"#);
    for (k, layer) in layers.iter().enumerate() {
        let name = options.layers.name_of(*layer);
        let y = top + legend_row * k as i64;
        let _ = writeln!(
            out,
            r#"<rect class="swatch" x="{}" y="{y}" width="{}" height="{}" fill="{}" fill-opacity="0.6"/>"#,
            bb.x0,
            font,
            font,
            color(name)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{} ({layer})</text>"#,
            bb.x0 + font * 3 / 2,
            y + font,
            name.unwrap_or("layer"),
        );
    }
    let _ = writeln!(out, "</g>");

    // 1 µm scale bar below the legend
    let y = top + legend_row * layers.len() as i64 + legend_row / 2;
    let _ = writeln!(out, r#"<g class="scale-bar" font-family="sans-serif" font-size="{font}">"#);
    let _ = writeln!(
        out,
        r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#000000" stroke-width="{}"/>"##,
        bb.x0,
        bb.x0 + 1000,
        (font / 4).max(10)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}">1 µm</text>"#,
        bb.x0 + 1000 + font / 2,
        y + font / 3
    );
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "</svg>");
    out
}
