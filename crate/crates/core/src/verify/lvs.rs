// SPDX-License-Identifier: Apache-2.0

//! Layout-versus-schematic comparison by iterative signature refinement.
//!
//! Both circuits become bipartite net/device graphs. Nets named after a
//! schematic port start in their own class; every other net starts in a
//! shared class and every device starts in its kind's class. Each round
//! replaces a node's class with one derived from its neighbours' classes
//! and the terminal roles through which they connect. The two circuits
//! match when the class histograms agree at every round until the
//! partition stops splitting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::{ConnectivityGraph, VerifyError};
use crate::netlist::{DeviceKind, Netlist, BULK};

#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    pub matched: bool,
    pub rounds: usize,
    pub layout_devices: BTreeMap<String, usize>,
    pub reference_devices: BTreeMap<String, usize>,
    pub layout_nets: usize,
    pub reference_nets: usize,
    /// First point where the circuits diverge; `None` on a match.
    pub divergence: Option<String>,
}

impl fmt::Display for MatchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "LVS {}", if self.matched { "MATCH" } else { "MISMATCH" })?;
        let kinds: BTreeSet<&String> = self
            .layout_devices
            .keys()
            .chain(self.reference_devices.keys())
            .collect();
        for k in kinds {
            writeln!(
                f,
                "  {k}: layout {} schematic {}",
                self.layout_devices.get(k).unwrap_or(&0),
                self.reference_devices.get(k).unwrap_or(&0)
            )?;
        }
        writeln!(
            f,
            "  nets: layout {} schematic {}",
            self.layout_nets, self.reference_nets
        )?;
        writeln!(f, "  refinement rounds: {}", self.rounds)?;
        if let Some(d) = &self.divergence {
            writeln!(f, "  first divergence: {d}")?;
        }
        Ok(())
    }
}

/// Terminal role classes. Drain and source share one role.
const ROLE_MEM_PLUS: u32 = 0;
const ROLE_MEM_MINUS: u32 = 1;
const ROLE_DRAIN_SOURCE: u32 = 2;
const ROLE_GATE: u32 = 3;
const ROLE_PASSIVE: u32 = 4;

fn kind_name(kind: &DeviceKind) -> String {
    match kind {
        DeviceKind::Memristor => "memristor".into(),
        DeviceKind::Nmos => "nmos".into(),
        DeviceKind::Resistor => "resistor".into(),
        DeviceKind::Capacitor => "capacitor".into(),
        DeviceKind::Subckt(s) => format!("subckt:{s}"),
    }
}

fn roles(kind: &DeviceKind, arity: usize) -> Vec<u32> {
    match kind {
        DeviceKind::Memristor => vec![ROLE_MEM_PLUS, ROLE_MEM_MINUS],
        DeviceKind::Nmos => vec![ROLE_DRAIN_SOURCE, ROLE_GATE, ROLE_DRAIN_SOURCE],
        _ => vec![ROLE_PASSIVE; arity],
    }
}

struct Device {
    name: String,
    kind: String,
    terms: Vec<(u32, usize)>,
}

struct Graph {
    nets: Vec<String>,
    devices: Vec<Device>,
}

impl Graph {
    fn from_layout(g: &ConnectivityGraph) -> Self {
        let devices = g
            .devices
            .iter()
            .map(|d| Device {
                name: d.name.clone(),
                kind: kind_name(&d.kind),
                terms: roles(&d.kind, d.terminals.len())
                    .into_iter()
                    .zip(d.terminals.iter().copied())
                    .collect(),
            })
            .collect();
        Graph {
            nets: g.nets.iter().map(|n| n.name.clone()).collect(),
            devices,
        }
    }

    fn from_netlist(netlist: &Netlist) -> Result<Self, VerifyError> {
        let flat = netlist.flatten()?;
        let mut ids: BTreeMap<String, usize> = BTreeMap::new();
        let mut nets = Vec::new();
        let mut devices = Vec::new();
        for d in &flat.devices {
            // the layout carries no bulk connection
            let nodes = match d.kind {
                DeviceKind::Nmos => &d.nodes[..3],
                _ => &d.nodes[..],
            };
            let terms = roles(&d.kind, nodes.len())
                .into_iter()
                .zip(nodes.iter().map(|n| {
                    *ids.entry(n.clone()).or_insert_with(|| {
                        nets.push(n.clone());
                        nets.len() - 1
                    })
                }))
                .collect();
            devices.push(Device {
                name: d.path.clone(),
                kind: kind_name(&d.kind),
                terms,
            });
        }
        Ok(Graph { nets, devices })
    }
}

#[derive(Default)]
struct Interner {
    map: HashMap<Vec<u32>, u32>,
}

impl Interner {
    fn id(&mut self, key: Vec<u32>) -> u32 {
        let next = self.map.len() as u32;
        *self.map.entry(key).or_insert(next)
    }
}

struct Coloring {
    nets: Vec<u32>,
    devices: Vec<u32>,
}

fn refine(g: &Graph, c: &Coloring, it: &mut Interner) -> Coloring {
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); g.nets.len()];
    for (d, dev) in g.devices.iter().enumerate() {
        for &(role, net) in &dev.terms {
            adj[net].push(role);
            adj[net].push(c.devices[d]);
        }
    }
    let nets = adj
        .into_iter()
        .enumerate()
        .map(|(n, flat)| {
            let mut pairs: Vec<(u32, u32)> = flat.chunks_exact(2).map(|p| (p[0], p[1])).collect();
            pairs.sort_unstable();
            let mut key = vec![1, c.nets[n]];
            key.extend(pairs.into_iter().flat_map(|(a, b)| [a, b]));
            it.id(key)
        })
        .collect();
    let devices = g
        .devices
        .iter()
        .enumerate()
        .map(|(d, dev)| {
            let mut pairs: Vec<(u32, u32)> =
                dev.terms.iter().map(|&(role, net)| (role, c.nets[net])).collect();
            pairs.sort_unstable();
            let mut key = vec![2, c.devices[d]];
            key.extend(pairs.into_iter().flat_map(|(a, b)| [a, b]));
            it.id(key)
        })
        .collect();
    Coloring { nets, devices }
}

fn histogram(colors: &[u32]) -> BTreeMap<u32, usize> {
    let mut h = BTreeMap::new();
    for &c in colors {
        *h.entry(c).or_insert(0) += 1;
    }
    h
}

/// First class whose population differs, described by a representative.
fn first_difference(
    what: &str,
    layout: &[u32],
    reference: &[u32],
    layout_name: impl Fn(usize) -> String,
    reference_name: impl Fn(usize) -> String,
) -> Option<String> {
    let (hl, hr) = (histogram(layout), histogram(reference));
    let classes: BTreeSet<u32> = hl.keys().chain(hr.keys()).copied().collect();
    for class in classes {
        let (nl, nr) = (hl.get(&class).unwrap_or(&0), hr.get(&class).unwrap_or(&0));
        if nl != nr {
            let example = if nl > nr {
                let i = layout.iter().position(|&c| c == class)?;
                format!("layout {what} {}", layout_name(i))
            } else {
                let i = reference.iter().position(|&c| c == class)?;
                format!("schematic {what} {}", reference_name(i))
            };
            return Some(format!(
                "{example} has no counterpart ({nl} in layout vs {nr} in schematic with this connectivity)"
            ));
        }
    }
    None
}

/// Compares an extracted layout against a reference netlist.
pub fn lvs(extracted: &ConnectivityGraph, reference: &Netlist) -> Result<MatchReport, VerifyError> {
    let lg = Graph::from_layout(extracted);
    let rg = Graph::from_netlist(reference)?;
    let count = |g: &Graph| {
        let mut m = BTreeMap::new();
        for d in &g.devices {
            *m.entry(d.kind.clone()).or_insert(0) += 1;
        }
        m
    };
    let mut report = MatchReport {
        matched: false,
        rounds: 0,
        layout_devices: count(&lg),
        reference_devices: count(&rg),
        layout_nets: lg.nets.len(),
        reference_nets: rg.nets.len(),
        divergence: None,
    };
    if report.layout_devices != report.reference_devices {
        report.divergence = Some("device counts differ".into());
        return Ok(report);
    }
    if let Some(short) = extracted.nets.iter().find(|n| n.labels.len() > 1) {
        let labels: Vec<&str> = short.labels.iter().map(String::as_str).collect();
        report.divergence = Some(format!("layout shorts {}", labels.join(", ")));
        return Ok(report);
    }
    if lg.nets.len() != rg.nets.len() {
        report.divergence = Some("net counts differ".into());
        return Ok(report);
    }

    let top = reference
        .subcircuit(reference.top())
        .map(|s| s.ports.clone())
        .unwrap_or_default();
    let anchors: BTreeSet<&str> = top.iter().map(String::as_str).filter(|p| *p != BULK).collect();
    let mut it = Interner::default();
    let mut names: HashMap<String, u32> = HashMap::new();
    let mut initial = |g: &Graph, it: &mut Interner| Coloring {
        nets: g
            .nets
            .iter()
            .map(|n| {
                if anchors.contains(n.as_str()) {
                    let next = names.len() as u32;
                    let id = *names.entry(n.clone()).or_insert(next);
                    it.id(vec![3, id])
                } else {
                    it.id(vec![4])
                }
            })
            .collect(),
        devices: g
            .devices
            .iter()
            .map(|d| {
                let next = names.len() as u32;
                let id = *names.entry(format!("kind:{}", d.kind)).or_insert(next);
                it.id(vec![5, id])
            })
            .collect(),
    };
    let mut cl = initial(&lg, &mut it);
    let mut cr = initial(&rg, &mut it);
    let classes = |a: &Coloring, b: &Coloring| {
        a.nets
            .iter()
            .chain(&a.devices)
            .chain(&b.nets)
            .chain(&b.devices)
            .collect::<BTreeSet<_>>()
            .len()
    };
    let mut prev = classes(&cl, &cr);
    loop {
        let diff = first_difference(
            "net",
            &cl.nets,
            &cr.nets,
            |i| lg.nets[i].clone(),
            |i| rg.nets[i].clone(),
        )
        .or_else(|| {
            first_difference(
                "device",
                &cl.devices,
                &cr.devices,
                |i| lg.devices[i].name.clone(),
                |i| rg.devices[i].name.clone(),
            )
        });
        if let Some(d) = diff {
            report.divergence = Some(format!("round {}: {d}", report.rounds));
            return Ok(report);
        }
        let nl = refine(&lg, &cl, &mut it);
        let nr = refine(&rg, &cr, &mut it);
        report.rounds += 1;
        let now = classes(&nl, &nr);
        cl = nl;
        cr = nr;
        if now == prev {
            break;
        }
        prev = now;
    }
    report.matched = true;
    Ok(report)
}
