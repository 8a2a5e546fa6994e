// SPDX-License-Identifier: Apache-2.0

//! Native design-rule and layout-versus-schematic checks.
//!
//! [`drc`] checks minimum width and spacing per layer on the flattened
//! layout. [`extract_connectivity`] rebuilds the circuit from the layout
//! by merging touching shapes into nets and placing one transistor and
//! one memristor at every cell instance, and [`lvs`] compares that graph
//! with the reference netlist.

mod drc;
mod extract;
mod fault;
mod lvs;

use std::collections::BTreeMap;

use crate::arch::ArchError;
use crate::kv::{KvError, KvMap};
use crate::layout::{LayerId, LayerMap, LayoutError};
use crate::netlist::NetlistError;

pub use drc::{drc, drc_report_csv, drc_report_text, Violation, ViolationKind};
pub use extract::{extract_connectivity, ConnectivityGraph, ExtractedDevice, Net};
pub use fault::{
    inject_layout_fault, inject_netlist_fault, run_fault_campaign, CampaignSummary, FaultKind,
    InjectedFault,
};
pub use lvs::{lvs, MatchReport};

pub const DEFAULT_MIN_WIDTH_UM: f64 = 0.22;
pub const DEFAULT_MIN_SPACING_UM: f64 = 0.28;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("cell ({row}, {col}) {port} pin touches no routing shape")]
    DisconnectedPort { row: usize, col: usize, port: String },
    #[error("cell instance at ({x}, {y}) nm is off the array grid")]
    OffGridCell { x: i64, y: i64 },
    #[error("layout contains no cell instances")]
    NoCells,
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Arch(#[from] ArchError),
}

/// Minimum width and spacing for one layer, in nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerRule {
    pub min_width_nm: f64,
    pub min_spacing_nm: f64,
}

impl LayerRule {
    pub fn from_um(min_width: f64, min_spacing: f64) -> Result<Self, VerifyError> {
        for v in [min_width, min_spacing] {
            if !(v.is_finite() && v > 0.0) {
                return Err(VerifyError::InvalidRule(format!("{v} µm must be positive")));
            }
        }
        Ok(LayerRule {
            min_width_nm: min_width * 1000.0,
            min_spacing_nm: min_spacing * 1000.0,
        })
    }
}

/// Per-layer rules. Layers without an entry are not checked.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleDeck {
    rules: BTreeMap<LayerId, LayerRule>,
    layers: LayerMap,
}

impl RuleDeck {
    /// The default deck: every named layer gets 0.22 µm width, 0.28 µm spacing.
    pub fn default_for(layers: &LayerMap) -> Self {
        let rule = LayerRule::from_um(DEFAULT_MIN_WIDTH_UM, DEFAULT_MIN_SPACING_UM)
            .expect("defaults are positive");
        RuleDeck {
            rules: layers.iter().map(|(_, id)| (id, rule)).collect(),
            layers: layers.clone(),
        }
    }

    /// Applies `<layer>.min_width_um` / `<layer>.min_spacing_um` overrides
    /// on top of the default deck.
    pub fn from_kv(kv: &KvMap, layers: &LayerMap) -> Result<Self, VerifyError> {
        let mut deck = RuleDeck::default_for(layers);
        let mut allowed = Vec::new();
        for (name, id) in layers.iter() {
            let lower = name.to_ascii_lowercase();
            let wk = format!("{lower}.min_width_um");
            let sk = format!("{lower}.min_spacing_um");
            let base = deck.rules[&id];
            let w = kv.get_f64(&wk)?.unwrap_or(base.min_width_nm / 1000.0);
            let s = kv.get_f64(&sk)?.unwrap_or(base.min_spacing_nm / 1000.0);
            deck.rules.insert(id, LayerRule::from_um(w, s)?);
            allowed.push(wk);
            allowed.push(sk);
        }
        let allowed: Vec<&str> = allowed.iter().map(String::as_str).collect();
        kv.check_keys(&allowed)?;
        Ok(deck)
    }

    pub fn parse(text: &str, layers: &LayerMap) -> Result<Self, VerifyError> {
        RuleDeck::from_kv(&KvMap::parse(text)?, layers)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::default();
        for (id, rule) in &self.rules {
            let name = self.layer_name(*id).to_ascii_lowercase();
            kv.insert(format!("{name}.min_width_um"), format!("{}", rule.min_width_nm / 1000.0));
            kv.insert(format!("{name}.min_spacing_um"), format!("{}", rule.min_spacing_nm / 1000.0));
        }
        kv
    }

    pub fn rule(&self, layer: LayerId) -> Option<&LayerRule> {
        self.rules.get(&layer)
    }

    pub fn layer_name(&self, layer: LayerId) -> String {
        self.layers
            .name_of(layer)
            .map_or_else(|| layer.to_string(), str::to_string)
    }
}

impl Default for RuleDeck {
    fn default() -> Self {
        RuleDeck::default_for(&LayerMap::default())
    }
}
