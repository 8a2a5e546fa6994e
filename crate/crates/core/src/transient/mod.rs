// SPDX-License-Identifier: Apache-2.0

//! Linear RC transient analysis and the worst-case read-settling study.
//!
//! Networks hold grounded voltage sources with piecewise-linear waveforms,
//! resistors and capacitors. Source nodes are eliminated, leaving the
//! symmetric system `C·v' + G·v = u(t)` over the free nodes, which is
//! integrated with one backward-Euler step followed by trapezoidal steps.
//! Both step matrices are factored once with an envelope Cholesky.

mod settling;
mod sparse;

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use crate::parasitics::ParasiticsError;

use sparse::{rcm_order, Envelope, SymMatrix};

pub use settling::{
    build_read_testbench, calibrate_switch_resistance, corners_from_ss, fit_exponential,
    open_circuit_time_constant, settling_sweep, settling_time, worst_case_settling, Corner,
    CornerModel, ExpFit, ReadTestbench, SettlingResult, TestbenchParams, DEFAULT_BAND,
    DEFAULT_C_PORT, DEFAULT_N_REF, DEFAULT_TARGET_SETTLING, FF_SCALE, STEPS_PER_TAU,
    T_STOP_CAP, TT_SCALE,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransientError {
    #[error("invalid element: {0}")]
    InvalidElement(String),
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
    #[error("node `{0}` has no resistive path to ground or a source")]
    FloatingNode(String),
    #[error("node `{0}` is driven by more than one source")]
    DuplicateSource(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("conductance system is singular")]
    SingularNetwork,
    #[error("non-finite node voltage at t = {time:e} s")]
    NonFiniteValue { time: f64 },
    #[error("invalid time step: {0}")]
    InvalidStep(String),
    #[error("waveform not within the settling band by t = {t_end:e} s")]
    NotSettled { t_end: f64 },
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error(transparent)]
    Parasitics(#[from] ParasiticsError),
}

/// Node handle; [`GROUND`] is always node 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

pub const GROUND: NodeId = NodeId(0);

/// Piecewise-linear waveform, held constant outside its points.
#[derive(Debug, Clone, PartialEq)]
pub struct Pwl {
    points: Vec<(f64, f64)>,
}

/// Rise time used for ideal steps.
pub const STEP_RISE: f64 = 1e-15;

impl Pwl {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, TransientError> {
        if points.is_empty() {
            return Err(TransientError::InvalidWaveform("no points".into()));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(TransientError::InvalidWaveform("non-finite point".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(TransientError::InvalidWaveform(
                "time points must strictly increase".into(),
            ));
        }
        Ok(Pwl { points })
    }

    pub fn constant(v: f64) -> Result<Self, TransientError> {
        Pwl::new(vec![(0.0, v)])
    }

    /// Step from `v0` to `v1` at `t0`, rising over [`STEP_RISE`].
    pub fn step(t0: f64, v0: f64, v1: f64) -> Result<Self, TransientError> {
        Pwl::new(vec![(t0, v0), (t0 + STEP_RISE, v1)])
    }

    pub fn value(&self, t: f64) -> f64 {
        let p = &self.points;
        if t <= p[0].0 {
            return p[0].1;
        }
        let k = p.partition_point(|&(pt, _)| pt <= t);
        if k == p.len() {
            return p[k - 1].1;
        }
        let (t0, v0) = p[k - 1];
        let (t1, v1) = p[k];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcNetwork {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    resistors: Vec<(NodeId, NodeId, f64)>,
    capacitors: Vec<(NodeId, NodeId, f64)>,
    sources: Vec<(NodeId, Pwl)>,
}

impl Default for RcNetwork {
    fn default() -> Self {
        RcNetwork::new()
    }
}

impl RcNetwork {
    pub fn new() -> Self {
        RcNetwork {
            names: vec!["0".into()],
            index: HashMap::from([("0".to_string(), GROUND)]),
            resistors: Vec::new(),
            capacitors: Vec::new(),
            sources: Vec::new(),
        }
    }

    /// Returns the node called `name`, creating it on first use.
    pub fn node(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = NodeId(self.names.len());
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.0]
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    fn check_two_terminal(&self, a: NodeId, b: NodeId, v: f64, what: &str) -> Result<(), TransientError> {
        if a.0 >= self.names.len() || b.0 >= self.names.len() {
            return Err(TransientError::InvalidElement(format!("{what} on an unknown node")));
        }
        if a == b {
            return Err(TransientError::InvalidElement(format!(
                "{what} shorted on `{}`",
                self.names[a.0]
            )));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(TransientError::InvalidElement(format!(
                "{what} value {v} must be positive"
            )));
        }
        Ok(())
    }

    pub fn add_resistor(&mut self, a: NodeId, b: NodeId, ohms: f64) -> Result<(), TransientError> {
        self.check_two_terminal(a, b, ohms, "resistor")?;
        self.resistors.push((a, b, ohms));
        Ok(())
    }

    pub fn add_capacitor(&mut self, a: NodeId, b: NodeId, farads: f64) -> Result<(), TransientError> {
        self.check_two_terminal(a, b, farads, "capacitor")?;
        self.capacitors.push((a, b, farads));
        Ok(())
    }

    /// Grounded voltage source driving `node`.
    pub fn add_source(&mut self, node: NodeId, waveform: Pwl) -> Result<(), TransientError> {
        if node == GROUND || node.0 >= self.names.len() {
            return Err(TransientError::InvalidElement("source must drive a named node".into()));
        }
        if self.sources.iter().any(|(n, _)| *n == node) {
            return Err(TransientError::DuplicateSource(self.names[node.0].clone()));
        }
        self.sources.push((node, waveform));
        Ok(())
    }

    pub fn resistors(&self) -> &[(NodeId, NodeId, f64)] {
        &self.resistors
    }

    pub fn capacitors(&self) -> &[(NodeId, NodeId, f64)] {
        &self.capacitors
    }

    pub fn sources(&self) -> &[(NodeId, Pwl)] {
        &self.sources
    }

    /// Every node must reach ground or a source through resistors.
    pub fn validate(&self) -> Result<(), TransientError> {
        let n = self.names.len();
        let mut adj = vec![Vec::new(); n];
        for &(a, b, _) in &self.resistors {
            adj[a.0].push(b.0);
            adj[b.0].push(a.0);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        for (s, _) in &self.sources {
            seen[s.0] = true;
            queue.push_back(s.0);
        }
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(TransientError::FloatingNode(self.names[i].clone())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    Ground,
    Free(usize),
    Source(usize),
}

/// Reduced nodal system over the free nodes.
struct Mna {
    vars: Vec<Var>,
    n_free: usize,
    g: SymMatrix,
    c: SymMatrix,
    /// Free-to-source couplings `(free, source, value)` of the full matrices.
    g_fs: Vec<(usize, usize, f64)>,
    c_fs: Vec<(usize, usize, f64)>,
    sources: Vec<Pwl>,
}

impl Mna {
    fn new(net: &RcNetwork) -> Result<Self, TransientError> {
        net.validate()?;
        let mut vars = vec![Var::Ground; net.names.len()];
        for (k, (node, _)) in net.sources.iter().enumerate() {
            vars[node.0] = Var::Source(k);
        }
        let mut n_free = 0;
        for v in vars.iter_mut().skip(1) {
            if *v == Var::Ground {
                *v = Var::Free(n_free);
                n_free += 1;
            }
        }
        let stamp = |elements: &[(NodeId, NodeId, f64)], value: fn(f64) -> f64| {
            let mut ff = Vec::new();
            let mut fs = Vec::new();
            for &(a, b, x) in elements {
                let y = value(x);
                for (p, q) in [(a, b), (b, a)] {
                    if let Var::Free(i) = vars[p.0] {
                        ff.push((i, i, y));
                        match vars[q.0] {
                            Var::Free(j) if j < i => ff.push((i, j, -y)),
                            Var::Source(s) => fs.push((i, s, -y)),
                            _ => {}
                        }
                    }
                }
            }
            (SymMatrix::from_triplets(n_free, ff), fs)
        };
        let (g, g_fs) = stamp(&net.resistors, |r| 1.0 / r);
        let (c, c_fs) = stamp(&net.capacitors, |c| c);
        Ok(Mna {
            vars,
            n_free,
            g,
            c,
            g_fs,
            c_fs,
            sources: net.sources.iter().map(|(_, w)| w.clone()).collect(),
        })
    }

    fn source_values(&self, t: f64) -> Vec<f64> {
        self.sources.iter().map(|w| w.value(t)).collect()
    }

    /// Adds `scale · coupling · vs` into `rhs`.
    fn add_coupling(rhs: &mut [f64], coupling: &[(usize, usize, f64)], vs: &[f64], scale: f64) {
        for &(i, s, v) in coupling {
            rhs[i] += scale * v * vs[s];
        }
    }

    fn dc(&self, t: f64) -> Result<Vec<f64>, TransientError> {
        if self.n_free == 0 {
            return Ok(Vec::new());
        }
        let f = Envelope::factor(&self.g, &rcm_order(&self.g)).ok_or(TransientError::SingularNetwork)?;
        let vs = self.source_values(t);
        let mut rhs = vec![0.0; self.n_free];
        Mna::add_coupling(&mut rhs, &self.g_fs, &vs, -1.0);
        let mut x = vec![0.0; self.n_free];
        f.solve(&rhs, &mut x);
        Ok(x)
    }

    fn voltage(&self, node: NodeId, free: &[f64], vs: &[f64]) -> f64 {
        match self.vars[node.0] {
            Var::Ground => 0.0,
            Var::Free(i) => free[i],
            Var::Source(s) => vs[s],
        }
    }
}

/// Node voltages from a DC solve with capacitors open, indexed by [`NodeId`].
pub fn dc_solve(net: &RcNetwork, at_time: f64) -> Result<Vec<f64>, TransientError> {
    let mna = Mna::new(net)?;
    let free = mna.dc(at_time)?;
    let vs = mna.source_values(at_time);
    Ok((0..net.node_count())
        .map(|i| mna.voltage(NodeId(i), &free, &vs))
        .collect())
}

/// Uniformly sampled node voltages.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveforms {
    pub times: Vec<f64>,
    pub nodes: Vec<String>,
    /// `values[k][i]` is node `nodes[k]` at `times[i]`.
    pub values: Vec<Vec<f64>>,
}

impl Waveforms {
    pub fn get(&self, node: &str) -> Option<&[f64]> {
        self.nodes
            .iter()
            .position(|n| n == node)
            .map(|k| self.values[k].as_slice())
    }

    /// Long-format CSV: `time_s,node,volts`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,node,volts\n");
        for (i, t) in self.times.iter().enumerate() {
            for (k, name) in self.nodes.iter().enumerate() {
                let _ = writeln!(out, "{t:e},{name},{:e}", self.values[k][i]);
            }
        }
        out
    }
}

/// Transient engine for one network and step size; the step matrices are
/// factored once on construction.
pub struct Simulator<'a> {
    net: &'a RcNetwork,
    mna: Mna,
    dt: f64,
    be: Envelope,
    tr: Envelope,
    /// `C/dt - G/2` for the trapezoidal right-hand side.
    tr_rhs: SymMatrix,
    c_over_dt: SymMatrix,
}

impl<'a> Simulator<'a> {
    pub fn new(net: &'a RcNetwork, dt: f64) -> Result<Self, TransientError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(TransientError::InvalidStep(format!("dt = {dt}")));
        }
        let mna = Mna::new(net)?;
        let order = rcm_order(&mna.g.combine(1.0, &mna.c, 1.0));
        let be_m = mna.c.combine(1.0 / dt, &mna.g, 1.0);
        let tr_m = mna.c.combine(1.0 / dt, &mna.g, 0.5);
        let be = Envelope::factor(&be_m, &order).ok_or(TransientError::SingularNetwork)?;
        let tr = Envelope::factor(&tr_m, &order).ok_or(TransientError::SingularNetwork)?;
        let tr_rhs = mna.c.combine(1.0 / dt, &mna.g, -0.5);
        let c_over_dt = mna.c.combine(1.0 / dt, &SymMatrix::zeros(mna.n_free), 0.0);
        Ok(Simulator {
            net,
            mna,
            dt,
            be,
            tr,
            tr_rhs,
            c_over_dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Simulates from the DC state at t = 0 to at least `t_stop`, recording
    /// the `probes` at every step.
    pub fn run(&self, t_stop: f64, probes: &[NodeId]) -> Result<Waveforms, TransientError> {
        if !(t_stop.is_finite() && t_stop > 0.0) {
            return Err(TransientError::InvalidStep(format!("t_stop = {t_stop}")));
        }
        for p in probes {
            if p.0 >= self.net.node_count() {
                return Err(TransientError::UnknownNode(format!("#{}", p.0)));
            }
        }
        let steps = (t_stop / self.dt - 1e-9).ceil().max(1.0) as usize;
        let m = &self.mna;
        let n = m.n_free;
        let mut v = m.dc(0.0)?;
        let mut vs = m.source_values(0.0);
        let mut times = Vec::with_capacity(steps + 1);
        let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(steps + 1); probes.len()];
        let record = |t: f64, v: &[f64], vs: &[f64], times: &mut Vec<f64>, values: &mut Vec<Vec<f64>>| {
            times.push(t);
            for (k, p) in probes.iter().enumerate() {
                values[k].push(m.voltage(*p, v, vs));
            }
        };
        record(0.0, &v, &vs, &mut times, &mut values);
        let mut rhs = vec![0.0; n];
        let mut next = vec![0.0; n];
        for k in 1..=steps {
            let t = k as f64 * self.dt;
            let vs_next = m.source_values(t);
            let dvs: Vec<f64> = vs_next.iter().zip(&vs).map(|(a, b)| a - b).collect();
            if k == 1 {
                self.c_over_dt.mul(&v, &mut rhs);
                Mna::add_coupling(&mut rhs, &m.c_fs, &dvs, -1.0 / self.dt);
                Mna::add_coupling(&mut rhs, &m.g_fs, &vs_next, -1.0);
                self.be.solve(&rhs, &mut next);
            } else {
                self.tr_rhs.mul(&v, &mut rhs);
                Mna::add_coupling(&mut rhs, &m.c_fs, &dvs, -1.0 / self.dt);
                let sum: Vec<f64> = vs_next.iter().zip(&vs).map(|(a, b)| a + b).collect();
                Mna::add_coupling(&mut rhs, &m.g_fs, &sum, -0.5);
                self.tr.solve(&rhs, &mut next);
            }
            if next.iter().any(|x| !x.is_finite()) {
                return Err(TransientError::NonFiniteValue { time: t });
            }
            std::mem::swap(&mut v, &mut next);
            vs = vs_next;
            record(t, &v, &vs, &mut times, &mut values);
        }
        Ok(Waveforms {
            times,
            nodes: probes.iter().map(|p| self.net.name(*p).to_string()).collect(),
            values,
        })
    }
}

/// Simulates `net` and records every non-ground node.
pub fn solve_transient(net: &RcNetwork, t_stop: f64, dt: f64) -> Result<Waveforms, TransientError> {
    let probes: Vec<NodeId> = (1..net.node_count()).map(NodeId).collect();
    Simulator::new(net, dt)?.run(t_stop, &probes)
}

#[cfg(test)]
mod tests;
