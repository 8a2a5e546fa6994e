// SPDX-License-Identifier: Apache-2.0

//! Single-fault injection for checking that DRC and LVS catch defects.
//!
//! Layout faults copy one cell (and the row holding it) under new names so
//! the defect appears at exactly one array position. Netlist faults swap
//! the P and N connections of one cell in the reference schematic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{drc, extract_connectivity, lvs, RuleDeck, VerifyError};
use crate::arch::ArrayConfig;
use crate::layout::{tile_array, CellTemplate, Element, LayerId, LayoutDb, Rect, Structure};
use crate::netlist::{build_array, CellParams, DeviceKind, Instance, Netlist, Subcircuit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    /// One shape narrowed to half the minimum width.
    Shrink,
    /// One shape moved to half the minimum spacing from a neighbour.
    Move,
    /// P and N of one cell exchanged in the schematic.
    SwapPn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectedFault {
    pub kind: FaultKind,
    pub row: usize,
    pub col: usize,
    pub layer: Option<LayerId>,
    /// Shape before and after the fault, in absolute coordinates.
    pub original: Option<Rect>,
    pub faulty: Option<Rect>,
    pub description: String,
}

fn overlap_1d(a0: i64, a1: i64, b0: i64, b1: i64) -> bool {
    a0 <= b1 && b0 <= a1
}

/// Translation that leaves `a` at `gap` from its nearest same-layer
/// neighbour separated along a single axis.
fn move_towards_neighbour(a: &Rect, flat: &[Rect], gap: i64) -> Option<(i64, i64)> {
    let mut best: Option<(i64, (i64, i64))> = None;
    for b in flat {
        if b.layer != a.layer || b == a || b.touches(a) {
            continue;
        }
        let candidate = if overlap_1d(a.y0, a.y1, b.y0, b.y1) {
            if b.x0 > a.x1 {
                Some((b.x0 - a.x1, (b.x0 - a.x1 - gap, 0)))
            } else {
                Some((a.x0 - b.x1, (-(a.x0 - b.x1 - gap), 0)))
            }
        } else if overlap_1d(a.x0, a.x1, b.x0, b.x1) {
            if b.y0 > a.y1 {
                Some((b.y0 - a.y1, (0, b.y0 - a.y1 - gap)))
            } else {
                Some((a.y0 - b.y1, (0, -(a.y0 - b.y1 - gap))))
            }
        } else {
            None
        };
        if let Some((dist, delta)) = candidate {
            if dist > gap && best.is_none_or(|(d, _)| dist < d) {
                best = Some((dist, delta));
            }
        }
    }
    best.map(|(_, delta)| delta)
}

fn shrink(r: &Rect, target: i64) -> Rect {
    let mut out = *r;
    if r.width() <= r.height() {
        out.x0 = r.x0 + (r.width() - target) / 2;
        out.x1 = out.x0 + target;
    } else {
        out.y0 = r.y0 + (r.height() - target) / 2;
        out.y1 = out.y0 + target;
    }
    out
}

/// Locates the (top element, row element) pair that places a cell at (x, y).
fn find_site(db: &LayoutDb, x: i64, y: i64) -> Option<(usize, usize)> {
    let top = db.top()?;
    for (ti, te) in top.elements.iter().enumerate() {
        let Element::Ref { structure, x: tx, y: ty } = te else {
            continue;
        };
        let row = db.structure(structure)?;
        for (ri, re) in row.elements.iter().enumerate() {
            if let Element::Ref { x: rx, y: ry, .. } = re {
                if tx + rx == x && ty + ry == y {
                    return Some((ti, ri));
                }
            }
        }
    }
    None
}

/// Applies one random shrink or move fault to a copy of `db`.
pub fn inject_layout_fault(
    db: &LayoutDb,
    template: &CellTemplate,
    deck: &RuleDeck,
    kind: FaultKind,
    rng: &mut impl Rng,
) -> Result<(LayoutDb, InjectedFault), VerifyError> {
    let placements = db.leaf_placements();
    if placements.is_empty() {
        return Err(VerifyError::NoCells);
    }
    let p = &placements[rng.random_range(0..placements.len())];
    let cell = db.structure(&p.structure).ok_or(VerifyError::NoCells)?.clone();
    let shapes: Vec<usize> = cell
        .elements
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match e {
            Element::Rect(r) if deck.rule(r.layer).is_some() => Some(i),
            _ => None,
        })
        .collect();
    if shapes.is_empty() {
        return Err(VerifyError::InvalidRule("no checked layer in the cell".into()));
    }
    let idx = shapes[rng.random_range(0..shapes.len())];
    let Element::Rect(local) = cell.elements[idx] else {
        unreachable!("filtered to rects")
    };
    let rule = *deck.rule(local.layer).expect("filtered to checked layers");
    let absolute = local.translate(p.x, p.y);

    let half_width = ((rule.min_width_nm * 0.5).floor() as i64).max(1);
    let half_space = ((rule.min_spacing_nm * 0.5).floor() as i64).max(1);
    let (kind, new_local, what) = match kind {
        FaultKind::Move => match move_towards_neighbour(&absolute, &db.flatten(), half_space) {
            Some((dx, dy)) => (
                FaultKind::Move,
                local.translate(dx, dy),
                format!("moved by ({dx}, {dy}) nm to a {half_space} nm gap"),
            ),
            None => (
                FaultKind::Shrink,
                shrink(&local, half_width),
                format!("narrowed to {half_width} nm"),
            ),
        },
        _ => (
            FaultKind::Shrink,
            shrink(&local, half_width),
            format!("narrowed to {half_width} nm"),
        ),
    };

    let (ti, ri) = find_site(db, p.x, p.y).ok_or(VerifyError::OffGridCell { x: p.x, y: p.y })?;
    let top = db.top().expect("site found").clone();
    let Element::Ref { structure: row_name, .. } = &top.elements[ti] else {
        unreachable!("site is a reference")
    };
    let row = db.structure(row_name).expect("referenced").clone();

    let mut out = db.clone();
    let cell_fault = format!("{}_fault", cell.name);
    let row_fault = format!("{}_fault", row.name);
    let mut faulty_cell = Structure::new(&cell_fault);
    faulty_cell.elements = cell.elements.clone();
    faulty_cell.elements[idx] = Element::Rect(new_local);
    out.insert_structure_before(&row.name, faulty_cell)?;

    let mut faulty_row = Structure::new(&row_fault);
    faulty_row.elements = row.elements.clone();
    if let Element::Ref { structure, .. } = &mut faulty_row.elements[ri] {
        *structure = cell_fault;
    }
    out.insert_structure_before(&top.name, faulty_row)?;
    let mut top_elements = top.elements.clone();
    if let Element::Ref { structure, .. } = &mut top_elements[ti] {
        *structure = row_fault;
    }
    out.replace_elements(&top.name, top_elements)?;

    let (row_i, col_j) = (
        template.row_at(p.y).unwrap_or(0),
        template.column_at(p.x).unwrap_or(0),
    );
    let fault = InjectedFault {
        kind,
        row: row_i,
        col: col_j,
        layer: Some(local.layer),
        original: Some(absolute),
        faulty: Some(new_local.translate(p.x, p.y)),
        description: format!("cell ({row_i}, {col_j}) shape {absolute} {what}"),
    };
    Ok((out, fault))
}

/// Swaps the P and N connections of one random cell in the top subcircuit.
pub fn inject_netlist_fault(
    netlist: &Netlist,
    rng: &mut impl Rng,
) -> Result<(Netlist, InjectedFault), VerifyError> {
    let top = netlist
        .subcircuit(netlist.top())
        .expect("netlist top exists");
    let rows: Vec<usize> = top
        .instances()
        .iter()
        .enumerate()
        .filter(|(_, i)| matches!(i.kind, DeviceKind::Subckt(_)))
        .map(|(k, _)| k)
        .collect();
    if rows.is_empty() {
        return Err(VerifyError::NoCells);
    }
    let r = rows[rng.random_range(0..rows.len())];
    let inst = &top.instances()[r];
    let DeviceKind::Subckt(row_name) = &inst.kind else {
        unreachable!("filtered to subcircuit instances")
    };
    let row = netlist.subcircuit(row_name).expect("validated netlist");
    let ports_of = |prefix: char| -> Vec<usize> {
        row.ports
            .iter()
            .enumerate()
            .filter(|(_, p)| p.starts_with(prefix) && p[1..].chars().all(|c| c.is_ascii_digit()))
            .map(|(k, _)| k)
            .collect()
    };
    let (ps, ns) = (ports_of('P'), ports_of('N'));
    if ps.is_empty() || ps.len() != ns.len() {
        return Err(VerifyError::NoCells);
    }
    let col = rng.random_range(0..ps.len());
    let mut swapped = inst.clone();
    swapped.nodes.swap(ps[col], ns[col]);

    let mut new_top = Subcircuit::new(top.name.clone(), top.ports.clone())?;
    for (k, i) in top.instances().iter().enumerate() {
        let i: Instance = if k == r { swapped.clone() } else { i.clone() };
        new_top.add(i)?;
    }
    let subs: Vec<Subcircuit> = netlist
        .subcircuits()
        .iter()
        .map(|s| if s.name == top.name { new_top.clone() } else { s.clone() })
        .collect();
    let out = Netlist::new(subs, netlist.top())?;
    let fault = InjectedFault {
        kind: FaultKind::SwapPn,
        row: r,
        col,
        layer: None,
        original: None,
        faulty: None,
        description: format!(
            "{} connects {} and {} swapped",
            inst.card_name(),
            inst.nodes[ps[col]],
            inst.nodes[ns[col]]
        ),
    };
    Ok((out, fault))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSummary {
    pub trials: usize,
    pub drc_detected: usize,
    pub lvs_detected: usize,
    /// Trials caught by at least one check.
    pub detected: usize,
    /// Layout faults whose own shape did not appear in a DRC violation.
    pub missed: Vec<String>,
}

enum Trial {
    Layout(LayoutDb, InjectedFault),
    Netlist(Netlist),
}

/// Injects `trials` independent single faults, a third of each kind, and
/// reports how many DRC or LVS caught.
pub fn run_fault_campaign(
    config: &ArrayConfig,
    template: &CellTemplate,
    deck: &RuleDeck,
    trials: usize,
    seed: u64,
) -> Result<CampaignSummary, VerifyError> {
    let db = tile_array(config, template);
    let reference = build_array(config, &CellParams::default())?;
    let clean = extract_connectivity(&db, template)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plan = Vec::with_capacity(trials);
    for _ in 0..trials {
        plan.push(match rng.random_range(0..3) {
            0 => {
                let (d, f) = inject_layout_fault(&db, template, deck, FaultKind::Shrink, &mut rng)?;
                Trial::Layout(d, f)
            }
            1 => {
                let (d, f) = inject_layout_fault(&db, template, deck, FaultKind::Move, &mut rng)?;
                Trial::Layout(d, f)
            }
            _ => {
                let (n, _) = inject_netlist_fault(&reference, &mut rng)?;
                Trial::Netlist(n)
            }
        });
    }
    let outcomes: Vec<(bool, bool, Option<String>)> = plan
        .par_iter()
        .map(|t| match t {
            Trial::Layout(d, f) => {
                let violations = drc(d, deck);
                let own = f.faulty.is_some_and(|r| violations.iter().any(|v| v.rects.contains(&r)));
                let lvs_hit = match extract_connectivity(d, template) {
                    Ok(g) => lvs(&g, &reference).map(|r| !r.matched).unwrap_or(true),
                    Err(_) => true,
                };
                let missed = (!own).then(|| f.description.clone());
                (!violations.is_empty(), lvs_hit, missed)
            }
            Trial::Netlist(n) => {
                let hit = lvs(&clean, n).map(|r| !r.matched).unwrap_or(true);
                (false, hit, None)
            }
        })
        .collect();
    let mut s = CampaignSummary {
        trials,
        drc_detected: 0,
        lvs_detected: 0,
        detected: 0,
        missed: Vec::new(),
    };
    for (d, l, m) in outcomes {
        s.drc_detected += usize::from(d);
        s.lvs_detected += usize::from(l);
        s.detected += usize::from(d || l);
        s.missed.extend(m);
    }
    Ok(s)
}
