// SPDX-License-Identifier: Apache-2.0

//! Hierarchical device netlists for the 1T1R cell, row and array.
//!
//! Hierarchy is cell → row (1×N, shared SEL) → array (M rows, shared
//! P/N columns). The extracted variant replaces the row level with
//! per-cell RC ladders along every SEL, P and N line.

mod spice;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::arch::{index_width, line_name, ArrayConfig, LineKind};
use crate::parasitics::ParasiticRates;

pub use spice::{emit_spice, parse_spice};

pub const CELL_NAME: &str = "rram_cell";
pub const ROW_NAME: &str = "rram_row";
pub const ARRAY_NAME: &str = "rram_array";
pub const EXTRACTED_NAME: &str = "rram_array_pex";
pub const BULK: &str = "GND_BULK";
/// Global ground for parasitic shunt capacitors.
pub const GROUND: &str = "0";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetlistError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("instance `{instance}` has {got} nodes, expected {expected}")]
    Arity {
        instance: String,
        expected: usize,
        got: usize,
    },
    #[error("instance `{instance}` references missing subcircuit `{subckt}`")]
    UnresolvedReference { instance: String, subckt: String },
    #[error("top subcircuit `{0}` not found")]
    MissingTop(String),
    #[error("subcircuit hierarchy is recursive at `{0}`")]
    Recursive(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeviceKind {
    Nmos,
    Memristor,
    Resistor,
    Capacitor,
    Subckt(String),
}

impl DeviceKind {
    /// Node count for primitives; `None` for subcircuit references.
    pub fn arity(&self) -> Option<usize> {
        match self {
            DeviceKind::Nmos => Some(4),
            DeviceKind::Memristor | DeviceKind::Resistor | DeviceKind::Capacitor => Some(2),
            DeviceKind::Subckt(_) => None,
        }
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeviceKind::Nmos => f.write_str("nmos"),
            DeviceKind::Memristor => f.write_str("memristor"),
            DeviceKind::Resistor => f.write_str("resistor"),
            DeviceKind::Capacitor => f.write_str("capacitor"),
            DeviceKind::Subckt(s) => write!(f, "subckt {s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub kind: DeviceKind,
    pub nodes: Vec<String>,
    pub params: BTreeMap<String, f64>,
}

impl Instance {
    pub fn new(name: impl Into<String>, kind: DeviceKind, nodes: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind,
            nodes,
            params: BTreeMap::new(),
        }
    }

    /// SPICE element name: kind letter followed by the instance name.
    pub fn card_name(&self) -> String {
        let letter = match self.kind {
            DeviceKind::Nmos => 'M',
            DeviceKind::Memristor | DeviceKind::Resistor => 'R',
            DeviceKind::Capacitor => 'C',
            DeviceKind::Subckt(_) => 'X',
        };
        format!("{letter}{}", self.name)
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subcircuit {
    pub name: String,
    pub ports: Vec<String>,
    instances: Vec<Instance>,
    instance_names: BTreeSet<String>,
}

impl Subcircuit {
    pub fn new(name: impl Into<String>, ports: Vec<String>) -> Result<Self, NetlistError> {
        let mut seen = BTreeSet::new();
        for p in &ports {
            if !seen.insert(p.as_str()) {
                return Err(NetlistError::Duplicate {
                    what: "port",
                    name: p.clone(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            ports,
            instances: Vec::new(),
            instance_names: BTreeSet::new(),
        })
    }

    /// Adds an instance, checking name uniqueness, primitive arity and
    /// physical parameter values.
    pub fn add(&mut self, inst: Instance) -> Result<(), NetlistError> {
        if let Some(expected) = inst.kind.arity() {
            if inst.nodes.len() != expected {
                return Err(NetlistError::Arity {
                    instance: inst.name,
                    expected,
                    got: inst.nodes.len(),
                });
            }
        }
        if let Some((k, v)) = inst.params.iter().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(NetlistError::InvalidParam(format!(
                "{}: {k} = {v}",
                inst.name
            )));
        }
        if !self.instance_names.insert(inst.card_name()) {
            return Err(NetlistError::Duplicate {
                what: "instance",
                name: inst.card_name(),
            });
        }
        self.instances.push(inst);
        Ok(())
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    /// Every net named by a port or an instance node.
    pub fn nets(&self) -> BTreeSet<&str> {
        self.ports
            .iter()
            .chain(self.instances.iter().flat_map(|i| i.nodes.iter()))
            .map(String::as_str)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    subcircuits: Vec<Subcircuit>,
    top: String,
}

impl Netlist {
    /// Validates unique names, resolvable references and port arity.
    pub fn new(subcircuits: Vec<Subcircuit>, top: impl Into<String>) -> Result<Self, NetlistError> {
        let top = top.into();
        let mut ports: HashMap<&str, usize> = HashMap::new();
        for s in &subcircuits {
            if ports.insert(&s.name, s.ports.len()).is_some() {
                return Err(NetlistError::Duplicate {
                    what: "subcircuit",
                    name: s.name.clone(),
                });
            }
        }
        if !ports.contains_key(top.as_str()) {
            return Err(NetlistError::MissingTop(top));
        }
        for s in &subcircuits {
            for inst in &s.instances {
                if let DeviceKind::Subckt(target) = &inst.kind {
                    let Some(&n) = ports.get(target.as_str()) else {
                        return Err(NetlistError::UnresolvedReference {
                            instance: inst.name.clone(),
                            subckt: target.clone(),
                        });
                    };
                    if n != inst.nodes.len() {
                        return Err(NetlistError::Arity {
                            instance: inst.name.clone(),
                            expected: n,
                            got: inst.nodes.len(),
                        });
                    }
                }
            }
        }
        let nl = Self { subcircuits, top };
        nl.flatten()?;
        Ok(nl)
    }

    /// Builds without reference checks; emission reports dangling
    /// references instead.
    pub fn new_unchecked(subcircuits: Vec<Subcircuit>, top: impl Into<String>) -> Self {
        Self {
            subcircuits,
            top: top.into(),
        }
    }

    pub fn subcircuits(&self) -> &[Subcircuit] {
        &self.subcircuits
    }

    pub fn top(&self) -> &str {
        &self.top
    }

    pub fn subcircuit(&self, name: &str) -> Option<&Subcircuit> {
        self.subcircuits.iter().find(|s| s.name == name)
    }

    /// Expands the hierarchy below `top`. Top ports and the global ground
    /// keep their names; other nets are prefixed with the instance path.
    pub fn flatten(&self) -> Result<FlatNetlist, NetlistError> {
        let by_name: HashMap<&str, &Subcircuit> =
            self.subcircuits.iter().map(|s| (s.name.as_str(), s)).collect();
        let top = by_name
            .get(self.top.as_str())
            .ok_or_else(|| NetlistError::MissingTop(self.top.clone()))?;
        let mut flat = FlatNetlist {
            ports: top.ports.clone(),
            devices: Vec::new(),
        };
        let binding: HashMap<&str, String> =
            top.ports.iter().map(|p| (p.as_str(), p.clone())).collect();
        let mut stack = vec![top.name.as_str()];
        expand(&by_name, top, "", &binding, &mut flat.devices, &mut stack)?;
        Ok(flat)
    }
}

fn expand<'a>(
    by_name: &HashMap<&str, &'a Subcircuit>,
    sub: &'a Subcircuit,
    prefix: &str,
    binding: &HashMap<&str, String>,
    out: &mut Vec<FlatDevice>,
    stack: &mut Vec<&'a str>,
) -> Result<(), NetlistError> {
    let resolve = |net: &str| -> String {
        if net == GROUND {
            return GROUND.to_string();
        }
        binding
            .get(net)
            .cloned()
            .unwrap_or_else(|| format!("{prefix}{net}"))
    };
    for inst in &sub.instances {
        match &inst.kind {
            DeviceKind::Subckt(target) => {
                let child = by_name.get(target.as_str()).ok_or_else(|| {
                    NetlistError::UnresolvedReference {
                        instance: inst.name.clone(),
                        subckt: target.clone(),
                    }
                })?;
                if stack.contains(&child.name.as_str()) {
                    return Err(NetlistError::Recursive(child.name.clone()));
                }
                let child_binding: HashMap<&str, String> = child
                    .ports
                    .iter()
                    .zip(&inst.nodes)
                    .map(|(p, n)| (p.as_str(), resolve(n)))
                    .collect();
                stack.push(child.name.as_str());
                let child_prefix = format!("{prefix}{}/", inst.name);
                expand(by_name, child, &child_prefix, &child_binding, out, stack)?;
                stack.pop();
            }
            kind => out.push(FlatDevice {
                path: format!("{prefix}{}", inst.name),
                kind: kind.clone(),
                nodes: inst.nodes.iter().map(|n| resolve(n)).collect(),
                params: inst.params.clone(),
            }),
        }
    }
    Ok(())
}

/// Primitive device after hierarchy expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatDevice {
    pub path: String,
    pub kind: DeviceKind,
    pub nodes: Vec<String>,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatNetlist {
    pub ports: Vec<String>,
    pub devices: Vec<FlatDevice>,
}

impl FlatNetlist {
    pub fn count(&self, kind: &DeviceKind) -> usize {
        self.devices.iter().filter(|d| &d.kind == kind).count()
    }

    pub fn nets(&self) -> BTreeSet<&str> {
        self.devices
            .iter()
            .flat_map(|d| d.nodes.iter().map(String::as_str))
            .collect()
    }
}

/// Electrical parameters of the 1T1R cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    /// Memristor resistance in ohms.
    pub r_mem: f64,
    /// Access transistor width in meters (placeholder).
    pub nmos_w: f64,
    /// Access transistor length in meters (placeholder).
    pub nmos_l: f64,
}

impl Default for CellParams {
    fn default() -> Self {
        Self {
            r_mem: crate::arch::DEFAULT_R_HIGH,
            nmos_w: 0.42e-6,
            nmos_l: 0.18e-6,
        }
    }
}

/// One memristor between `P` and the internal node `mid`, one NMOS with
/// drain `mid`, gate `SEL`, source `N` and bulk `GND_BULK`.
pub fn build_cell(params: &CellParams) -> Result<Subcircuit, NetlistError> {
    for (what, v) in [
        ("r_mem", params.r_mem),
        ("nmos_w", params.nmos_w),
        ("nmos_l", params.nmos_l),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(NetlistError::InvalidParam(format!("{what} = {v}")));
        }
    }
    let ports = ["SEL", "P", "N", BULK].map(String::from).to_vec();
    let mut cell = Subcircuit::new(CELL_NAME, ports)?;
    cell.add(
        Instance::new("mem", DeviceKind::Memristor, vec!["P".into(), "mid".into()])
            .param("r", params.r_mem),
    )?;
    cell.add(
        Instance::new(
            "acc",
            DeviceKind::Nmos,
            ["mid", "SEL", "N", BULK].map(String::from).to_vec(),
        )
        .param("w", params.nmos_w)
        .param("l", params.nmos_l),
    )?;
    Ok(cell)
}

fn column_nets(config: &ArrayConfig) -> (Vec<String>, Vec<String>) {
    let n = config.cols();
    (
        (0..n).map(|j| line_name(LineKind::P, j, n)).collect(),
        (0..n).map(|j| line_name(LineKind::N, j, n)).collect(),
    )
}

fn array_ports(config: &ArrayConfig) -> Vec<String> {
    let (p, n) = column_nets(config);
    (0..config.rows())
        .map(|i| line_name(LineKind::Sel, i, config.rows()))
        .chain(p)
        .chain(n)
        .chain(std::iter::once(BULK.to_string()))
        .collect()
}

/// Ideal array: cell → row → array with shared SEL rows and P/N columns.
pub fn build_array(config: &ArrayConfig, params: &CellParams) -> Result<Netlist, NetlistError> {
    let cell = build_cell(params)?;
    let (p, n) = column_nets(config);
    let cw = index_width(config.cols());
    let rw = index_width(config.rows());

    let row_ports: Vec<String> = std::iter::once("SEL".to_string())
        .chain(p.iter().cloned())
        .chain(n.iter().cloned())
        .chain(std::iter::once(BULK.to_string()))
        .collect();
    let mut row = Subcircuit::new(ROW_NAME, row_ports)?;
    for j in 0..config.cols() {
        row.add(Instance::new(
            format!("c{j:0cw$}"),
            DeviceKind::Subckt(CELL_NAME.into()),
            vec!["SEL".into(), p[j].clone(), n[j].clone(), BULK.into()],
        ))?;
    }

    let mut array = Subcircuit::new(ARRAY_NAME, array_ports(config))?;
    for i in 0..config.rows() {
        let nodes = std::iter::once(line_name(LineKind::Sel, i, config.rows()))
            .chain(p.iter().cloned())
            .chain(n.iter().cloned())
            .chain(std::iter::once(BULK.to_string()))
            .collect();
        array.add(Instance::new(
            format!("r{i:0rw$}"),
            DeviceKind::Subckt(ROW_NAME.into()),
            nodes,
        ))?;
    }
    Netlist::new(vec![cell, row, array], ARRAY_NAME)
}

/// Array with a series-R / shunt-C segment per cell along every line.
///
/// Each line runs from its port (the driven end) through one tap per cell;
/// segment `k` is a resistor into tap `k` and a capacitor from tap `k` to
/// ground. Cell `(i, j)` connects to tap `j` of `SEL<i>` and tap `i` of
/// `P<j>` / `N<j>`.
pub fn build_extracted_array(
    config: &ArrayConfig,
    rates: &ParasiticRates,
    params: &CellParams,
) -> Result<Netlist, NetlistError> {
    let cell = build_cell(params)?;
    let (m, n) = (config.rows(), config.cols());
    let (rw, cw) = (index_width(m), index_width(n));
    let mut top = Subcircuit::new(EXTRACTED_NAME, array_ports(config))?;

    let tap = |kind: LineKind, line: usize, k: usize| -> String {
        let (count, kw) = match kind {
            LineKind::Sel => (m, cw),
            _ => (n, rw),
        };
        format!("{}_t{k:0kw$}", line_name(kind, line, count))
    };

    let mut add_line = |kind: LineKind, line: usize, len: usize| -> Result<(), NetlistError> {
        let base = line_name(kind, line, config.line_count(kind));
        let tag = base.to_ascii_lowercase();
        let mut prev = base;
        for k in 0..len {
            let t = tap(kind, line, k);
            top.add(
                Instance::new(
                    format!("{tag}_{k}"),
                    DeviceKind::Resistor,
                    vec![prev.clone(), t.clone()],
                )
                .param("r", rates.r_per_cell(kind)),
            )?;
            top.add(
                Instance::new(
                    format!("{tag}_{k}"),
                    DeviceKind::Capacitor,
                    vec![t.clone(), GROUND.into()],
                )
                .param("c", rates.c_per_cell(kind)),
            )?;
            prev = t;
        }
        Ok(())
    };
    for i in 0..m {
        add_line(LineKind::Sel, i, n)?;
    }
    for j in 0..n {
        add_line(LineKind::P, j, m)?;
        add_line(LineKind::N, j, m)?;
    }
    for i in 0..m {
        for j in 0..n {
            top.add(Instance::new(
                format!("x{i:0rw$}_{j:0cw$}"),
                DeviceKind::Subckt(CELL_NAME.into()),
                vec![
                    tap(LineKind::Sel, i, j),
                    tap(LineKind::P, j, i),
                    tap(LineKind::N, j, i),
                    BULK.into(),
                ],
            ))?;
        }
    }
    Netlist::new(vec![cell, top], EXTRACTED_NAME)
}
