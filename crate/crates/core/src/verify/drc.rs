// SPDX-License-Identifier: Apache-2.0

//! Width and spacing checks on the flattened layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::RuleDeck;
use crate::layout::{LayerId, LayoutDb, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    Width,
    Spacing,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Width => "width",
            ViolationKind::Spacing => "spacing",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub layer: LayerId,
    /// One rect for width violations, the offending pair for spacing.
    pub rects: Vec<Rect>,
    pub measured_um: f64,
    pub required_um: f64,
}

/// Gap along each axis; zero on an axis where the projections meet.
fn gaps(a: &Rect, b: &Rect) -> (i64, i64) {
    let dx = (a.x0 - b.x1).max(b.x0 - a.x1).max(0);
    let dy = (a.y0 - b.y1).max(b.y0 - a.y1).max(0);
    (dx, dy)
}

fn check_layer(layer: LayerId, mut rects: Vec<Rect>, deck: &RuleDeck) -> Vec<Violation> {
    let Some(rule) = deck.rule(layer) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for r in &rects {
        let w = r.width().min(r.height()) as f64;
        if w < rule.min_width_nm {
            out.push(Violation {
                kind: ViolationKind::Width,
                layer,
                rects: vec![*r],
                measured_um: w / 1000.0,
                required_um: rule.min_width_nm / 1000.0,
            });
        }
    }

    // sweep in x: a rect leaves the active set once its right edge is at
    // least one spacing behind the sweep position
    rects.sort_by_key(|r| (r.x0, r.y0, r.x1, r.y1));
    rects.dedup();
    let s = rule.min_spacing_nm;
    let mut active: Vec<Rect> = Vec::new();
    for r in &rects {
        active.retain(|a| ((r.x0 - a.x1) as f64) < s);
        for a in &active {
            let (dx, dy) = gaps(a, r);
            if dx == 0 && dy == 0 {
                continue;
            }
            let d = ((dx * dx + dy * dy) as f64).sqrt();
            if d < s {
                let (p, q) = if a <= r { (*a, *r) } else { (*r, *a) };
                out.push(Violation {
                    kind: ViolationKind::Spacing,
                    layer,
                    rects: vec![p, q],
                    measured_um: d / 1000.0,
                    required_um: s / 1000.0,
                });
            }
        }
        active.push(*r);
    }
    out
}

fn sort_key(v: &Violation) -> (LayerId, [i64; 4], [i64; 4], ViolationKind) {
    let c = |r: Option<&Rect>| r.map_or([i64::MIN; 4], |r| [r.x0, r.y0, r.x1, r.y1]);
    (v.layer, c(v.rects.first()), c(v.rects.get(1)), v.kind)
}

/// Checks every flattened shape against the deck; an empty result is clean.
/// Results are ordered by layer, then coordinates.
pub fn drc(db: &LayoutDb, deck: &RuleDeck) -> Vec<Violation> {
    let mut by_layer: BTreeMap<LayerId, Vec<Rect>> = BTreeMap::new();
    for r in db.flatten() {
        by_layer.entry(r.layer).or_default().push(r);
    }
    let mut out: Vec<Violation> = by_layer
        .into_par_iter()
        .flat_map_iter(|(layer, rects)| check_layer(layer, rects, deck))
        .collect();
    out.sort_by_key(sort_key);
    out
}

pub fn drc_report_text(violations: &[Violation], deck: &RuleDeck) -> String {
    let mut out = String::new();
    if violations.is_empty() {
        out.push_str("DRC clean: 0 violations\n");
        return out;
    }
    let _ = writeln!(out, "DRC: {} violation(s)", violations.len());
    for v in violations {
        let shapes: Vec<String> = v.rects.iter().map(Rect::to_string).collect();
        let _ = writeln!(
            out,
            "{} {}: {:.3} µm < {:.3} µm at {}",
            deck.layer_name(v.layer),
            v.kind.as_str(),
            v.measured_um,
            v.required_um,
            shapes.join(" / ")
        );
    }
    out
}

/// One CSV row per violation: kind, layer, both rects' corners in nm
/// (empty for width violations), measured and required in µm.
pub fn drc_report_csv(violations: &[Violation], deck: &RuleDeck) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "kind", "layer", "x0_nm", "y0_nm", "x1_nm", "y1_nm", "x0b_nm", "y0b_nm", "x1b_nm",
        "y1b_nm", "measured_um", "required_um",
    ];
    w.write_record(header).expect("in-memory write");
    for v in violations {
        let mut rec = vec![v.kind.as_str().to_string(), deck.layer_name(v.layer)];
        for i in 0..2 {
            match v.rects.get(i) {
                Some(r) => rec.extend([r.x0, r.y0, r.x1, r.y1].map(|c| c.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        rec.push(format!("{:e}", v.measured_um));
        rec.push(format!("{:e}", v.required_um));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
}
