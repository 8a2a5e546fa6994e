// SPDX-License-Identifier: Apache-2.0

//! SPICE-subset text emission and parsing.
//!
//! Grammar (one card per line, LF endings):
//!
//! ```text
//! R<name> n1 n2 <ohms>                     (preceded by `* memristor` for memristors)
//! C<name> n1 n2 <farads>
//! M<name> nd ng ns nb nch W=<m> L=<m>
//! X<name> <nodes...> <subckt>
//! .SUBCKT <name> <ports...>
//! .ENDS
//! ```
//!
//! Values are printed as `{:.6e}`. Subcircuits appear in insertion order
//! and the top subcircuit is the last one.

use std::fmt::Write as _;

use super::{DeviceKind, Instance, Netlist, NetlistError, Subcircuit};

const MEMRISTOR_TAG: &str = "* memristor";
const NMOS_MODEL: &str = "nch";

fn num(v: f64) -> String {
    format!("{v:.6e}")
}

fn param(inst: &Instance, key: &str) -> Result<f64, NetlistError> {
    inst.params.get(key).copied().ok_or_else(|| {
        NetlistError::InvalidParam(format!("{} is missing `{key}`", inst.card_name()))
    })
}

pub fn emit_spice(netlist: &Netlist) -> Result<String, NetlistError> {
    let mut out = String::new();
    let _ = writeln!(out, "* rramc netlist top={}", netlist.top());
    let _ = writeln!(out, ".MODEL {NMOS_MODEL} NMOS");
    for sub in netlist.subcircuits() {
        let _ = writeln!(out);
        let _ = writeln!(out, ".SUBCKT {} {}", sub.name, sub.ports.join(" "));
        for inst in sub.instances() {
            let card = inst.card_name();
            let nodes = inst.nodes.join(" ");
            match &inst.kind {
                DeviceKind::Memristor => {
                    let _ = writeln!(out, "{MEMRISTOR_TAG}");
                    let _ = writeln!(out, "{card} {nodes} {}", num(param(inst, "r")?));
                }
                DeviceKind::Resistor => {
                    let _ = writeln!(out, "{card} {nodes} {}", num(param(inst, "r")?));
                }
                DeviceKind::Capacitor => {
                    let _ = writeln!(out, "{card} {nodes} {}", num(param(inst, "c")?));
                }
                DeviceKind::Nmos => {
                    let _ = writeln!(
                        out,
                        "{card} {nodes} {NMOS_MODEL} W={} L={}",
                        num(param(inst, "w")?),
                        num(param(inst, "l")?)
                    );
                }
                DeviceKind::Subckt(target) => {
                    if netlist.subcircuit(target).is_none() {
                        return Err(NetlistError::UnresolvedReference {
                            instance: inst.name.clone(),
                            subckt: target.clone(),
                        });
                    }
                    let _ = writeln!(out, "{card} {nodes} {target}");
                }
            }
        }
        let _ = writeln!(out, ".ENDS");
    }
    let _ = writeln!(out, ".END");
    Ok(out)
}

fn parse_value(tok: &str, line: usize) -> Result<f64, NetlistError> {
    tok.parse::<f64>().map_err(|_| NetlistError::Parse {
        line,
        message: format!("bad value `{tok}`"),
    })
}

/// Parses text in the emitted subset back into a [`Netlist`].
pub fn parse_spice(text: &str) -> Result<Netlist, NetlistError> {
    let mut subs: Vec<Subcircuit> = Vec::new();
    let mut current: Option<Subcircuit> = None;
    let mut memristor_next = false;
    let err = |line: usize, message: String| NetlistError::Parse { line, message };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('*') {
            memristor_next = line == MEMRISTOR_TAG;
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let head = toks[0].to_ascii_uppercase();
        match head.as_str() {
            ".MODEL" | ".END" => {}
            ".SUBCKT" => {
                if current.is_some() {
                    return Err(err(line_no, "nested .SUBCKT".into()));
                }
                let name = toks
                    .get(1)
                    .ok_or_else(|| err(line_no, ".SUBCKT without a name".into()))?;
                let ports = toks[2..].iter().map(|s| s.to_string()).collect();
                current = Some(
                    Subcircuit::new(*name, ports).map_err(|e| err(line_no, e.to_string()))?,
                );
            }
            ".ENDS" => {
                let sub = current
                    .take()
                    .ok_or_else(|| err(line_no, ".ENDS outside a subcircuit".into()))?;
                subs.push(sub);
            }
            _ => {
                let sub = current
                    .as_mut()
                    .ok_or_else(|| err(line_no, "element outside a subcircuit".into()))?;
                let card = toks[0];
                let name = &card[1..];
                if name.is_empty() {
                    return Err(err(line_no, format!("unnamed element `{card}`")));
                }
                let inst = match card.as_bytes()[0].to_ascii_uppercase() {
                    b'R' | b'C' => {
                        if toks.len() != 4 {
                            return Err(err(line_no, format!("`{card}` needs 2 nodes and a value")));
                        }
                        let value = parse_value(toks[3], line_no)?;
                        let (kind, key) = match card.as_bytes()[0].to_ascii_uppercase() {
                            b'C' => (DeviceKind::Capacitor, "c"),
                            _ if memristor_next => (DeviceKind::Memristor, "r"),
                            _ => (DeviceKind::Resistor, "r"),
                        };
                        Instance::new(name, kind, vec![toks[1].into(), toks[2].into()])
                            .param(key, value)
                    }
                    b'M' => {
                        if toks.len() < 6 {
                            return Err(err(line_no, format!("`{card}` needs 4 nodes and a model")));
                        }
                        let mut inst = Instance::new(
                            name,
                            DeviceKind::Nmos,
                            toks[1..5].iter().map(|s| s.to_string()).collect(),
                        );
                        for kv in &toks[6..] {
                            let (k, v) = kv
                                .split_once('=')
                                .ok_or_else(|| err(line_no, format!("bad parameter `{kv}`")))?;
                            inst = inst.param(&k.to_ascii_lowercase(), parse_value(v, line_no)?);
                        }
                        inst
                    }
                    b'X' => {
                        if toks.len() < 2 {
                            return Err(err(line_no, format!("`{card}` needs a subcircuit")));
                        }
                        let target = toks[toks.len() - 1];
                        Instance::new(
                            name,
                            DeviceKind::Subckt(target.into()),
                            toks[1..toks.len() - 1].iter().map(|s| s.to_string()).collect(),
                        )
                    }
                    _ => return Err(err(line_no, format!("unsupported card `{card}`"))),
                };
                memristor_next = false;
                sub.add(inst).map_err(|e| err(line_no, e.to_string()))?;
            }
        }
    }
    if let Some(sub) = current {
        return Err(err(
            text.lines().count(),
            format!("unterminated subcircuit `{}`", sub.name),
        ));
    }
    let top = subs
        .last()
        .map(|s| s.name.clone())
        .ok_or_else(|| err(0, "no subcircuits".into()))?;
    Netlist::new(subs, top)
}
