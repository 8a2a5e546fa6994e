// SPDX-License-Identifier: Apache-2.0

//! Layout-to-circuit extraction.
//!
//! Shapes on the pin layers are merged into nets when they touch. Each
//! leaf-structure instance is a cell at a grid position recovered from its
//! origin; its SEL, P and N terminals bind to whatever net touches the
//! template pin at that position. Transistor bulk is not modelled.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::VerifyError;
use crate::arch::{line_name, LineKind};
use crate::layout::{CellTemplate, LayoutDb, Rect};
use crate::netlist::DeviceKind;

#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub name: String,
    /// Port labels bound to this net; more than one means a short.
    pub labels: BTreeSet<String>,
    pub rects: Vec<Rect>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedDevice {
    pub name: String,
    pub kind: DeviceKind,
    /// Net indices: memristor (P side, mid); NMOS (drain, gate, source).
    pub terminals: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityGraph {
    pub rows: usize,
    pub cols: usize,
    pub nets: Vec<Net>,
    pub devices: Vec<ExtractedDevice>,
}

impl ConnectivityGraph {
    pub fn net_by_name(&self, name: &str) -> Option<&Net> {
        self.nets.iter().find(|n| n.name == name)
    }

    pub fn count(&self, kind: &DeviceKind) -> usize {
        self.devices.iter().filter(|d| &d.kind == kind).count()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so components are labelled by first member
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Uniform bucket grid for touch queries.
struct GridIndex {
    bucket: i64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl GridIndex {
    fn new(bucket: i64) -> Self {
        GridIndex {
            bucket: bucket.max(1),
            cells: HashMap::new(),
        }
    }

    fn span(&self, r: &Rect) -> impl Iterator<Item = (i64, i64)> {
        let b = self.bucket;
        let (bx0, bx1) = (r.x0.div_euclid(b), r.x1.div_euclid(b));
        let (by0, by1) = (r.y0.div_euclid(b), r.y1.div_euclid(b));
        (bx0..=bx1).flat_map(move |x| (by0..=by1).map(move |y| (x, y)))
    }

    fn insert(&mut self, id: usize, r: &Rect) {
        let keys: Vec<_> = self.span(r).collect();
        for k in keys {
            self.cells.entry(k).or_default().push(id);
        }
    }

    fn query(&self, r: &Rect) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .span(r)
            .filter_map(|k| self.cells.get(&k))
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn overlap_area(a: &Rect, b: &Rect) -> i64 {
    let w = (a.x1.min(b.x1) - a.x0.max(b.x0)).max(0);
    let h = (a.y1.min(b.y1) - a.y0.max(b.y0)).max(0);
    w * h
}

/// Rebuilds nets and devices from a layout tiled from `template`.
pub fn extract_connectivity(
    db: &LayoutDb,
    template: &CellTemplate,
) -> Result<ConnectivityGraph, VerifyError> {
    let pin_layers: BTreeSet<_> = LineKind::ALL.iter().map(|&k| template.port(k).layer).collect();
    let rects: Vec<Rect> = db
        .flatten()
        .into_iter()
        .filter(|r| pin_layers.contains(&r.layer))
        .collect();
    let (fw, fh) = template.footprint();
    let mut index = GridIndex::new(fw.max(fh));
    for (i, r) in rects.iter().enumerate() {
        index.insert(i, r);
    }
    let mut uf = UnionFind::new(rects.len());
    for (i, r) in rects.iter().enumerate() {
        for j in index.query(r) {
            if j > i && rects[j].layer == r.layer && rects[j].touches(r) {
                uf.union(i, j);
            }
        }
    }
    let mut net_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut nets: Vec<Net> = Vec::new();
    let mut rect_net = vec![0; rects.len()];
    for i in 0..rects.len() {
        let root = uf.find(i);
        let id = *net_of_root.entry(root).or_insert_with(|| {
            nets.push(Net {
                name: String::new(),
                labels: BTreeSet::new(),
                rects: Vec::new(),
            });
            nets.len() - 1
        });
        nets[id].rects.push(rects[i]);
        rect_net[i] = id;
    }

    let placements = db.leaf_placements();
    if placements.is_empty() {
        return Err(VerifyError::NoCells);
    }
    let mut cells = Vec::with_capacity(placements.len());
    for p in &placements {
        match (template.row_at(p.y), template.column_at(p.x)) {
            (Some(row), Some(col)) => cells.push((row, col, p.x, p.y)),
            _ => return Err(VerifyError::OffGridCell { x: p.x, y: p.y }),
        }
    }
    cells.sort();
    let rows = cells.iter().map(|c| c.0).max().unwrap_or(0) + 1;
    let cols = cells.iter().map(|c| c.1).max().unwrap_or(0) + 1;

    let mut bind = |row: usize, col: usize, x: i64, y: i64, kind: LineKind| {
        let pin = template.port(kind).translate(x, y);
        let best = index
            .query(&pin)
            .into_iter()
            .filter(|&j| rects[j].layer == pin.layer && rects[j].touches(&pin))
            .max_by_key(|&j| (overlap_area(&rects[j], &pin), std::cmp::Reverse(j)));
        let Some(j) = best else {
            return Err(VerifyError::DisconnectedPort {
                row,
                col,
                port: kind.to_string(),
            });
        };
        let net = rect_net[j];
        let idx = if kind == LineKind::Sel { row } else { col };
        let count = if kind == LineKind::Sel { rows } else { cols };
        nets[net].labels.insert(line_name(kind, idx, count));
        Ok(net)
    };
    let mut terminals = Vec::with_capacity(cells.len());
    for &(row, col, x, y) in &cells {
        let sel = bind(row, col, x, y, LineKind::Sel)?;
        let p = bind(row, col, x, y, LineKind::P)?;
        let n = bind(row, col, x, y, LineKind::N)?;
        terminals.push((row, col, sel, p, n));
    }

    for (k, net) in nets.iter_mut().enumerate() {
        net.name = match net.labels.first() {
            Some(l) => l.clone(),
            None => format!("floating_{k}"),
        };
    }
    let mut devices = Vec::with_capacity(2 * cells.len());
    for (row, col, sel, p, n) in terminals {
        let mid = nets.len();
        nets.push(Net {
            name: format!("mid_{row}_{col}"),
            labels: BTreeSet::new(),
            rects: Vec::new(),
        });
        devices.push(ExtractedDevice {
            name: format!("x{row}_{col}/mem"),
            kind: DeviceKind::Memristor,
            terminals: vec![p, mid],
        });
        devices.push(ExtractedDevice {
            name: format!("x{row}_{col}/acc"),
            kind: DeviceKind::Nmos,
            terminals: vec![mid, sel, n],
        });
    }
    Ok(ConnectivityGraph {
        rows,
        cols,
        nets,
        devices,
    })
}
