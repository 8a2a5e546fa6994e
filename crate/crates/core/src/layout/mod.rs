// SPDX-License-Identifier: Apache-2.0

//! Physical array layout: a hierarchical rectangle database on a 1 nm grid.
//!
//! A single cell template is tiled into a row structure of N cells, and the
//! top structure references that row M times. SEL strips abut horizontally,
//! P and N strips abut vertically, so every line is one continuous shape
//! chain with no routing of its own.
//!
//! The cell pitch need not be a whole number of nanometres. Cell `j` of a
//! row is placed at `floor(j·width)` and every template shape ends at
//! `ceil(width)`, so neighbours touch or overlap by at most 1 nm and the
//! array extent stays within 1 nm of `N·width`.

mod gds;
mod svg;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::arch::{ArrayConfig, LineKind};
use crate::kv::{KvError, KvMap};
use crate::netlist::{ARRAY_NAME, CELL_NAME, ROW_NAME};

pub use gds::{emit_gdsii, emit_gdsii_with, parse_gdsii, GdsOptions};
pub use svg::{render_svg, SvgOptions};

/// Database unit in metres.
pub const DB_UNIT_M: f64 = 1e-9;
/// Database units per user unit (the user unit is 1 µm).
pub const DB_PER_USER: i64 = 1000;

/// Default cell pitch in nm: 642.41 µm / 128 and 294.42 µm / 128.
pub const DEFAULT_WIDTH_NM: f64 = 5018.828125;
pub const DEFAULT_HEIGHT_NM: f64 = 2300.15625;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LayoutError {
    #[error("coordinate {0} µm is not on the 1 nm grid")]
    GridViolation(f64),
    #[error("degenerate rectangle {0}")]
    InvalidRect(String),
    #[error("invalid cell template: {0}")]
    InvalidTemplate(String),
    #[error("layer map: {0}")]
    Layers(String),
    #[error("structure `{0}` is already defined")]
    DuplicateStructure(String),
    #[error("structure `{from}` references undefined `{to}`")]
    UnknownStructure { from: String, to: String },
    #[error("coordinate {0} nm does not fit a 32-bit GDSII field")]
    CoordinateOverflow(i64),
    #[error("malformed GDSII record at byte {offset}: {reason}")]
    MalformedRecord { offset: usize, reason: String },
    #[error("unsupported GDSII record 0x{id:02x} at byte {offset}")]
    UnsupportedRecord { id: u8, offset: usize },
    #[error(transparent)]
    Kv(#[from] KvError),
}

/// GDSII (layer, datatype) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LayerId {
    pub layer: i16,
    pub datatype: i16,
}

impl LayerId {
    pub const fn new(layer: i16, datatype: i16) -> Self {
        LayerId { layer, datatype }
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.layer, self.datatype)
    }
}

/// Named layers and their GDSII numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMap {
    entries: Vec<(String, LayerId)>,
}

pub const POLY: &str = "POLY";
pub const M1: &str = "M1";
pub const M4: &str = "M4";

impl Default for LayerMap {
    fn default() -> Self {
        LayerMap {
            entries: vec![
                (POLY.into(), LayerId::new(10, 0)),
                (M1.into(), LayerId::new(30, 0)),
                (M4.into(), LayerId::new(36, 0)),
            ],
        }
    }
}

impl LayerMap {
    pub fn get(&self, name: &str) -> Option<LayerId> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, id)| *id)
    }

    pub fn name_of(&self, id: LayerId) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, l)| *l == id)
            .map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, LayerId)> {
        self.entries.iter().map(|(n, id)| (n.as_str(), *id))
    }

    /// Adds or renumbers a layer. Numbers must stay unique across names.
    pub fn set(&mut self, name: &str, id: LayerId) -> Result<(), LayoutError> {
        if let Some(other) = self.name_of(id) {
            if other != name {
                return Err(LayoutError::Layers(format!(
                    "{id} is already used by {other}"
                )));
            }
        }
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(entry) => entry.1 = id,
            None => self.entries.push((name.into(), id)),
        }
        Ok(())
    }

    /// Applies `layer_<name> = <layer>/<datatype>` overrides.
    pub fn apply_kv(&mut self, kv: &KvMap) -> Result<(), LayoutError> {
        let names: Vec<String> = self.entries.iter().map(|(n, _)| n.clone()).collect();
        for name in names {
            let key = format!("layer_{}", name.to_ascii_lowercase());
            let Some(value) = kv.get(&key) else { continue };
            let bad = || KvError::BadValue {
                key: key.clone(),
                value: value.to_string(),
                expected: "<layer>/<datatype>",
            };
            let (l, d) = value.split_once('/').ok_or_else(bad)?;
            let layer = l.trim().parse::<i16>().map_err(|_| bad())?;
            let datatype = d.trim().parse::<i16>().map_err(|_| bad())?;
            self.set(&name, LayerId::new(layer, datatype))?;
        }
        Ok(())
    }

    pub fn kv_keys(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|(n, _)| format!("layer_{}", n.to_ascii_lowercase()))
            .collect()
    }
}

/// Axis-aligned rectangle in integer nanometres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    pub layer: LayerId,
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

fn um_to_nm(v: f64) -> Result<i64, LayoutError> {
    let nm = v * DB_PER_USER as f64;
    let rounded = nm.round();
    if !nm.is_finite() || (nm - rounded).abs() > 1e-6 {
        return Err(LayoutError::GridViolation(v));
    }
    Ok(rounded as i64)
}

impl Rect {
    pub fn new(layer: LayerId, x0: i64, y0: i64, x1: i64, y1: i64) -> Result<Self, LayoutError> {
        let r = Rect {
            layer,
            x0,
            y0,
            x1,
            y1,
        };
        if x0 >= x1 || y0 >= y1 {
            return Err(LayoutError::InvalidRect(r.to_string()));
        }
        Ok(r)
    }

    /// Builds a rectangle from micrometre coordinates, which must sit on the grid.
    pub fn from_um(layer: LayerId, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, LayoutError> {
        Rect::new(layer, um_to_nm(x0)?, um_to_nm(y0)?, um_to_nm(x1)?, um_to_nm(y1)?)
    }

    pub fn width(&self) -> i64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> i64 {
        self.y1 - self.y0
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Rect {
        Rect {
            x0: self.x0 + dx,
            x1: self.x1 + dx,
            y0: self.y0 + dy,
            y1: self.y1 + dy,
            ..*self
        }
    }

    /// True when the closed rectangles share at least one point.
    pub fn touches(&self, other: &Rect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    pub fn bbox(&self) -> Bbox {
        Bbox {
            x0: self.x0,
            y0: self.y0,
            x1: self.x1,
            y1: self.y1,
        }
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}, {}]x[{}, {}] nm",
            self.layer, self.x0, self.x1, self.y0, self.y1
        )
    }
}

/// Layer-free bounding box in nm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bbox {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl Bbox {
    pub fn width(&self) -> i64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> i64 {
        self.y1 - self.y0
    }

    fn union(self, other: Bbox) -> Bbox {
        Bbox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    fn translate(self, dx: i64, dy: i64) -> Bbox {
        Bbox {
            x0: self.x0 + dx,
            y0: self.y0 + dy,
            x1: self.x1 + dx,
            y1: self.y1 + dy,
        }
    }
}

/// Abstract 1T1R cell: pitch, shapes and the pin geometry of its lines.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTemplate {
    width_nm: f64,
    height_nm: f64,
    shapes: Vec<Rect>,
    ports: BTreeMap<LineKind, Rect>,
}

impl CellTemplate {
    pub fn new(
        width_nm: f64,
        height_nm: f64,
        shapes: Vec<Rect>,
        ports: BTreeMap<LineKind, Rect>,
    ) -> Result<Self, LayoutError> {
        let bad = |m: String| Err(LayoutError::InvalidTemplate(m));
        if !(width_nm.is_finite() && height_nm.is_finite() && height_nm >= 1.0) {
            return bad(format!("pitch {width_nm} x {height_nm} nm"));
        }
        if width_nm <= height_nm {
            return bad("cell must be wider than it is tall".into());
        }
        let t = CellTemplate {
            width_nm,
            height_nm,
            shapes,
            ports,
        };
        let (w, h) = t.footprint();
        for s in &t.shapes {
            if s.x0 < 0 || s.y0 < 0 || s.x1 > w || s.y1 > h {
                return bad(format!("shape {s} leaves the {w}x{h} nm footprint"));
            }
        }
        for kind in LineKind::ALL {
            let Some(pin) = t.ports.get(&kind) else {
                return bad(format!("missing {kind} pin"));
            };
            if !t.shapes.contains(pin) {
                return bad(format!("{kind} pin {pin} is not a template shape"));
            }
            let spans = match kind {
                LineKind::Sel => pin.x0 == 0 && pin.x1 == w,
                LineKind::P | LineKind::N => pin.y0 == 0 && pin.y1 == h,
            };
            if !spans {
                return bad(format!("{kind} pin {pin} does not reach both abutting edges"));
            }
        }
        if t.ports[&LineKind::Sel].layer == t.ports[&LineKind::P].layer {
            return bad("SEL and P/N pins must be on different layers".into());
        }
        Ok(t)
    }

    pub fn width_nm(&self) -> f64 {
        self.width_nm
    }

    pub fn height_nm(&self) -> f64 {
        self.height_nm
    }

    pub fn width_um(&self) -> f64 {
        self.width_nm / DB_PER_USER as f64
    }

    pub fn height_um(&self) -> f64 {
        self.height_nm / DB_PER_USER as f64
    }

    /// Pitch rounded up to the grid: the extent of every placed cell.
    pub fn footprint(&self) -> (i64, i64) {
        (self.width_nm.ceil() as i64, self.height_nm.ceil() as i64)
    }

    pub fn shapes(&self) -> &[Rect] {
        &self.shapes
    }

    pub fn port(&self, kind: LineKind) -> &Rect {
        &self.ports[&kind]
    }

    pub fn column_offset(&self, col: usize) -> i64 {
        (col as f64 * self.width_nm).floor() as i64
    }

    pub fn row_offset(&self, row: usize) -> i64 {
        (row as f64 * self.height_nm).floor() as i64
    }

    /// Nearest grid column for an x placement, the inverse of [`column_offset`].
    ///
    /// [`column_offset`]: CellTemplate::column_offset
    pub fn column_at(&self, x: i64) -> Option<usize> {
        let col = (x as f64 / self.width_nm).round();
        (col >= 0.0 && self.column_offset(col as usize) == x).then_some(col as usize)
    }

    pub fn row_at(&self, y: i64) -> Option<usize> {
        let row = (y as f64 / self.height_nm).round();
        (row >= 0.0 && self.row_offset(row as usize) == y).then_some(row as usize)
    }
}

pub fn default_template() -> CellTemplate {
    template_with_layers(&LayerMap::default()).expect("default layers are complete")
}

/// The default strip template on a custom layer numbering.
pub fn template_with_layers(layers: &LayerMap) -> Result<CellTemplate, LayoutError> {
    let layer = |name: &str| {
        layers
            .get(name)
            .ok_or_else(|| LayoutError::Layers(format!("missing layer {name}")))
    };
    let (m1, m4, poly) = (layer(M1)?, layer(M4)?, layer(POLY)?);
    let w = DEFAULT_WIDTH_NM.ceil() as i64;
    let h = DEFAULT_HEIGHT_NM.ceil() as i64;
    let sel = Rect::new(m1, 0, 1000, w, 1300)?;
    let p = Rect::new(m4, 800, 0, 1200, h)?;
    let n = Rect::new(m4, 3800, 0, 4200, h)?;
    let gate = Rect::new(poly, 2300, 400, 2700, 1900)?;
    let ports = BTreeMap::from([(LineKind::Sel, sel), (LineKind::P, p), (LineKind::N, n)]);
    CellTemplate::new(
        DEFAULT_WIDTH_NM,
        DEFAULT_HEIGHT_NM,
        vec![sel, p, n, gate],
        ports,
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    Rect(Rect),
    /// Reference to another structure translated by (x, y) nm.
    Ref { structure: String, x: i64, y: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    pub name: String,
    pub elements: Vec<Element>,
}

impl Structure {
    pub fn new(name: impl Into<String>) -> Self {
        Structure {
            name: name.into(),
            elements: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.elements.iter().all(|e| matches!(e, Element::Rect(_)))
    }

    pub fn rects(&self) -> impl Iterator<Item = &Rect> {
        self.elements.iter().filter_map(|e| match e {
            Element::Rect(r) => Some(r),
            Element::Ref { .. } => None,
        })
    }
}

/// Absolute origin of one leaf-structure instance in the flattened top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub structure: String,
    pub x: i64,
    pub y: i64,
}

/// Hierarchical layout library.
///
/// Structures are stored in definition order; a structure may only
/// reference structures defined before it, which keeps the hierarchy
/// acyclic. The last structure is the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutDb {
    lib_name: String,
    structures: Vec<Structure>,
    index: HashMap<String, usize>,
}

impl LayoutDb {
    pub fn new(lib_name: impl Into<String>) -> Self {
        LayoutDb {
            lib_name: lib_name.into(),
            structures: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn lib_name(&self) -> &str {
        &self.lib_name
    }

    pub fn add_structure(&mut self, s: Structure) -> Result<(), LayoutError> {
        if self.index.contains_key(&s.name) {
            return Err(LayoutError::DuplicateStructure(s.name));
        }
        for e in &s.elements {
            if let Element::Ref { structure, .. } = e {
                if !self.index.contains_key(structure) {
                    return Err(LayoutError::UnknownStructure {
                        from: s.name.clone(),
                        to: structure.clone(),
                    });
                }
            }
        }
        self.index.insert(s.name.clone(), self.structures.len());
        self.structures.push(s);
        Ok(())
    }

    pub fn structures(&self) -> &[Structure] {
        &self.structures
    }

    pub fn structure(&self, name: &str) -> Option<&Structure> {
        self.index.get(name).map(|&i| &self.structures[i])
    }

    pub fn top(&self) -> Option<&Structure> {
        self.structures.last()
    }

    /// Bounding box of the top structure; `None` when the library is empty
    /// or holds no shapes.
    pub fn bbox(&self) -> Option<Bbox> {
        let mut memo = vec![None; self.structures.len()];
        for i in 0..self.structures.len() {
            let mut acc: Option<Bbox> = None;
            for e in &self.structures[i].elements {
                let b = match e {
                    Element::Rect(r) => Some(r.bbox()),
                    Element::Ref { structure, x, y } => {
                        memo[self.index[structure]].map(|b: Bbox| b.translate(*x, *y))
                    }
                };
                if let Some(b) = b {
                    acc = Some(acc.map_or(b, |a| a.union(b)));
                }
            }
            memo[i] = acc;
        }
        memo.last().copied().flatten()
    }

    fn walk(&self, idx: usize, dx: i64, dy: i64, f: &mut impl FnMut(&Structure, i64, i64)) {
        let s = &self.structures[idx];
        f(s, dx, dy);
        for e in &s.elements {
            if let Element::Ref { structure, x, y } = e {
                self.walk(self.index[structure], dx + x, dy + y, f);
            }
        }
    }

    /// Every rectangle of the top structure in absolute coordinates.
    pub fn flatten(&self) -> Vec<Rect> {
        let mut out = Vec::new();
        if let Some(top) = self.structures.len().checked_sub(1) {
            self.walk(top, 0, 0, &mut |s, dx, dy| {
                out.extend(s.rects().map(|r| r.translate(dx, dy)));
            });
        }
        out
    }

    /// Absolute origins of every leaf-structure instance under the top.
    pub fn leaf_placements(&self) -> Vec<Placement> {
        let mut out = Vec::new();
        if let Some(top) = self.structures.len().checked_sub(1) {
            self.walk(top, 0, 0, &mut |s, x, y| {
                if s.is_leaf() {
                    out.push(Placement {
                        structure: s.name.clone(),
                        x,
                        y,
                    });
                }
            });
        }
        out
    }

    /// Replaces the elements of an existing structure.
    pub fn replace_elements(
        &mut self,
        name: &str,
        elements: Vec<Element>,
    ) -> Result<(), LayoutError> {
        let &idx = self.index.get(name).ok_or_else(|| LayoutError::UnknownStructure {
            from: self.lib_name.clone(),
            to: name.to_string(),
        })?;
        for e in &elements {
            if let Element::Ref { structure, .. } = e {
                if self.index.get(structure).is_none_or(|&i| i >= idx) {
                    return Err(LayoutError::UnknownStructure {
                        from: name.into(),
                        to: structure.clone(),
                    });
                }
            }
        }
        self.structures[idx].elements = elements;
        Ok(())
    }

    /// Inserts a structure directly before `before`, so that `before` and
    /// later structures may reference it.
    pub fn insert_structure_before(
        &mut self,
        before: &str,
        s: Structure,
    ) -> Result<(), LayoutError> {
        let &pos = self.index.get(before).ok_or_else(|| LayoutError::UnknownStructure {
            from: s.name.clone(),
            to: before.to_string(),
        })?;
        if self.index.contains_key(&s.name) {
            return Err(LayoutError::DuplicateStructure(s.name));
        }
        for e in &s.elements {
            if let Element::Ref { structure, .. } = e {
                if self.index.get(structure).is_none_or(|&i| i >= pos) {
                    return Err(LayoutError::UnknownStructure {
                        from: s.name.clone(),
                        to: structure.clone(),
                    });
                }
            }
        }
        self.structures.insert(pos, s);
        self.index = self
            .structures
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.clone(), i))
            .collect();
        Ok(())
    }
}

/// Tiles the template into cell, row and array structures.
pub fn tile_array(config: &ArrayConfig, template: &CellTemplate) -> LayoutDb {
    let mut db = LayoutDb::new("rramc");
    let mut cell = Structure::new(CELL_NAME);
    cell.elements = template.shapes().iter().copied().map(Element::Rect).collect();
    let mut row = Structure::new(ROW_NAME);
    row.elements = (0..config.cols())
        .map(|j| Element::Ref {
            structure: CELL_NAME.into(),
            x: template.column_offset(j),
            y: 0,
        })
        .collect();
    let mut top = Structure::new(ARRAY_NAME);
    top.elements = (0..config.rows())
        .map(|i| Element::Ref {
            structure: ROW_NAME.into(),
            x: 0,
            y: template.row_offset(i),
        })
        .collect();
    for s in [cell, row, top] {
        db.add_structure(s).expect("fresh names, children first");
    }
    db
}

/// Storage density in Mb/mm² (1 Mb = 2^20 bits) at the nominal cell pitch.
pub fn density_mbits_per_mm2(config: &ArrayConfig, template: &CellTemplate) -> f64 {
    let bits = (config.rows() * config.cols()) as f64;
    let area_mm2 = config.rows() as f64 * template.height_nm() * 1e-6
        * (config.cols() as f64 * template.width_nm() * 1e-6);
    bits / (1u64 << 20) as f64 / area_mm2
}

#[cfg(test)]
mod tests;
