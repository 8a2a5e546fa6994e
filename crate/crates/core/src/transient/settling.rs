// SPDX-License-Identifier: Apache-2.0

//! Settling-time extraction and the worst-case read testbench.
//!
//! The testbench reads the cell farthest from both drivers with V_N = VDD
//! and V_P = 0. The N line is driven through the access switch's
//! on-resistance into a fixed port capacitance and then along its RC
//! ladder; the memristor joins the far ends of the N and P ladders and the
//! P ladder returns to a 0 V driver. The observed quantity is the voltage
//! across the memristor.
//!
//! The switch sits at the driven end rather than inside the far cell so
//! that it charges the line capacitance: in-cell placement leaves the
//! memristor voltage settling on the line's own picosecond time constants
//! regardless of switch resistance or array size.

use rayon::prelude::*;

use super::{dc_solve, Mna, NodeId, Pwl, RcNetwork, Simulator, TransientError, GROUND};
use crate::arch::{LineKind, DEFAULT_R_HIGH, DEFAULT_VDD};
use crate::parasitics::{build_ladder, ParasiticRates, RcLadder};
use crate::transient::sparse::{rcm_order, Envelope};

/// Relative settling band (1% of the final value).
pub const DEFAULT_BAND: f64 = 0.01;
/// Settling time the SS corner is calibrated to at [`DEFAULT_N_REF`] cells.
pub const DEFAULT_TARGET_SETTLING: f64 = 550e-12;
pub const DEFAULT_N_REF: usize = 8;
/// TT and FF switch resistances relative to SS.
pub const TT_SCALE: f64 = 0.7;
pub const FF_SCALE: f64 = 0.5;
/// Longest simulated window before giving up.
pub const T_STOP_CAP: f64 = 1e-6;
/// Time steps per open-circuit time constant.
pub const STEPS_PER_TAU: f64 = 1000.0;
/// Driver/multiplexer port capacitance on the N line. Sized so that the
/// 8→128-cell growth in settling time is close to the reported fit.
pub const DEFAULT_C_PORT: f64 = 580e-15;
/// Initial window in open-circuit time constants.
const T_STOP_TAUS: f64 = 20.0;
const CAL_LO: f64 = 1.0;
const CAL_HI: f64 = 1e7;
const CAL_TOL: f64 = 1e-3;

/// Earliest time after which the waveform stays within
/// `band·|final_value|` of `final_value` until the end of the window.
/// The crossing is linearly interpolated between samples.
pub fn settling_time(
    times: &[f64],
    values: &[f64],
    final_value: f64,
    band: f64,
) -> Result<f64, TransientError> {
    if times.is_empty() || times.len() != values.len() {
        return Err(TransientError::InvalidWaveform(
            "times and values must be non-empty and equal length".into(),
        ));
    }
    if final_value == 0.0 || !final_value.is_finite() {
        return Err(TransientError::InvalidWaveform(format!(
            "relative band needs a non-zero final value, got {final_value}"
        )));
    }
    let tol = band * final_value.abs();
    let outside = |v: f64| (v - final_value).abs() > tol;
    let last = times.len() - 1;
    if outside(values[last]) {
        return Err(TransientError::NotSettled { t_end: times[last] });
    }
    let Some(i) = (0..last).rev().find(|&i| outside(values[i])) else {
        return Ok(times[0]);
    };
    let (v0, v1) = (values[i], values[i + 1]);
    let edge = if v0 > final_value {
        final_value + tol
    } else {
        final_value - tol
    };
    let frac = ((v0 - edge) / (v0 - v1)).clamp(0.0, 1.0);
    Ok(times[i] + frac * (times[i + 1] - times[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Corner {
    Ss,
    Tt,
    Ff,
}

impl Corner {
    pub const ALL: [Corner; 3] = [Corner::Ss, Corner::Tt, Corner::Ff];

    pub fn as_str(self) -> &'static str {
        match self {
            Corner::Ss => "SS",
            Corner::Tt => "TT",
            Corner::Ff => "FF",
        }
    }

    pub fn parse(s: &str) -> Option<Corner> {
        match s.to_ascii_uppercase().as_str() {
            "SS" => Some(Corner::Ss),
            "TT" => Some(Corner::Tt),
            "FF" => Some(Corner::Ff),
            _ => None,
        }
    }
}

impl std::fmt::Display for Corner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Process corner reduced to the access switch's linear on-resistance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerModel {
    pub corner: Corner,
    pub r_switch: f64,
}

/// SS, TT and FF models derived from a calibrated SS resistance.
pub fn corners_from_ss(r_ss: f64) -> [CornerModel; 3] {
    [
        CornerModel {
            corner: Corner::Ss,
            r_switch: r_ss,
        },
        CornerModel {
            corner: Corner::Tt,
            r_switch: TT_SCALE * r_ss,
        },
        CornerModel {
            corner: Corner::Ff,
            r_switch: FF_SCALE * r_ss,
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestbenchParams {
    pub r_mem: f64,
    pub vdd: f64,
    pub c_port: f64,
    /// Fixed step; `None` derives it from the open-circuit time constant.
    pub dt: Option<f64>,
}

impl Default for TestbenchParams {
    fn default() -> Self {
        TestbenchParams {
            r_mem: DEFAULT_R_HIGH,
            vdd: DEFAULT_VDD,
            c_port: DEFAULT_C_PORT,
            dt: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReadTestbench {
    pub net: RcNetwork,
    /// Memristor terminal on the N-line side.
    pub mem_n: NodeId,
    /// Memristor terminal on the P-line side.
    pub mem_p: NodeId,
    pub n_line: RcLadder,
    pub p_line: RcLadder,
}

impl ReadTestbench {
    /// Final memristor voltage from the series divider.
    pub fn dc_memristor_voltage(&self, corner: &CornerModel, params: &TestbenchParams) -> f64 {
        params.vdd * params.r_mem
            / (params.r_mem + corner.r_switch + self.n_line.total_r() + self.p_line.total_r())
    }
}

fn add_ladder(
    net: &mut RcNetwork,
    prefix: &str,
    start: NodeId,
    ladder: &RcLadder,
) -> Result<NodeId, TransientError> {
    let mut prev = start;
    for (k, seg) in ladder.segments().iter().enumerate() {
        let node = net.node(&format!("{prefix}{}", k + 1));
        net.add_resistor(prev, node, seg.series_r)?;
        net.add_capacitor(node, GROUND, seg.shunt_c)?;
        prev = node;
    }
    Ok(prev)
}

pub fn build_read_testbench(
    n: usize,
    rates: &ParasiticRates,
    corner: &CornerModel,
    params: &TestbenchParams,
) -> Result<ReadTestbench, TransientError> {
    for (what, v) in [
        ("switch resistance", corner.r_switch),
        ("memristor resistance", params.r_mem),
        ("port capacitance", params.c_port),
        ("vdd", params.vdd),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(TransientError::InvalidElement(format!("{what} = {v}")));
        }
    }
    let n_line = build_ladder(LineKind::N, n, rates)?;
    let p_line = build_ladder(LineKind::P, n, rates)?;
    let mut net = RcNetwork::new();
    let drv_n = net.node("drv_n");
    net.add_source(drv_n, Pwl::step(0.0, 0.0, params.vdd)?)?;
    let port = net.node("n0");
    net.add_resistor(drv_n, port, corner.r_switch)?;
    net.add_capacitor(port, GROUND, params.c_port)?;
    let mem_n = add_ladder(&mut net, "n", port, &n_line)?;

    let drv_p = net.node("drv_p");
    net.add_source(drv_p, Pwl::constant(0.0)?)?;
    let mem_p = add_ladder(&mut net, "p", drv_p, &p_line)?;
    net.add_resistor(mem_n, mem_p, params.r_mem)?;
    Ok(ReadTestbench {
        net,
        mem_n,
        mem_p,
        n_line,
        p_line,
    })
}

/// Sum over capacitors of capacitance times the resistance it sees with
/// all other capacitors open and all sources at zero.
pub fn open_circuit_time_constant(net: &RcNetwork) -> Result<f64, TransientError> {
    let mna = Mna::new(net)?;
    if mna.n_free == 0 {
        return Ok(0.0);
    }
    let f = Envelope::factor(&mna.g, &rcm_order(&mna.g)).ok_or(TransientError::SingularNetwork)?;
    let free = |id: NodeId| match mna.vars[id.0] {
        super::Var::Free(i) => Some(i),
        _ => None,
    };
    let mut tau = 0.0;
    let mut rhs = vec![0.0; mna.n_free];
    let mut x = vec![0.0; mna.n_free];
    for &(a, b, c) in net.capacitors() {
        let (fa, fb) = (free(a), free(b));
        if fa.is_none() && fb.is_none() {
            continue;
        }
        rhs.iter_mut().for_each(|v| *v = 0.0);
        if let Some(i) = fa {
            rhs[i] += 1.0;
        }
        if let Some(j) = fb {
            rhs[j] -= 1.0;
        }
        f.solve(&rhs, &mut x);
        let r = fa.map_or(0.0, |i| x[i]) - fb.map_or(0.0, |j| x[j]);
        tau += c * r;
    }
    Ok(tau)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettlingResult {
    pub n_cells: usize,
    pub corner: Corner,
    pub settling_time: f64,
    pub final_value: f64,
    pub dt_used: f64,
    pub t_stop: f64,
}

/// Settling time of the memristor voltage for the farthest cell, with the
/// window doubled from 20 open-circuit time constants up to 1 µs.
pub fn worst_case_settling(
    n: usize,
    corner: &CornerModel,
    rates: &ParasiticRates,
    params: &TestbenchParams,
) -> Result<SettlingResult, TransientError> {
    let tb = build_read_testbench(n, rates, corner, params)?;
    let tau = open_circuit_time_constant(&tb.net)?;
    let dt = params.dt.unwrap_or(tau / STEPS_PER_TAU);
    let sim = Simulator::new(&tb.net, dt)?;
    let mut t_stop = (T_STOP_TAUS * tau).min(T_STOP_CAP).max(dt);
    loop {
        let w = sim.run(t_stop, &[tb.mem_n, tb.mem_p])?;
        let v: Vec<f64> = w.values[0].iter().zip(&w.values[1]).map(|(a, b)| a - b).collect();
        let dc = dc_solve(&tb.net, t_stop)?;
        let final_value = dc[tb.mem_n.0] - dc[tb.mem_p.0];
        match settling_time(&w.times, &v, final_value, DEFAULT_BAND) {
            Ok(t) => {
                return Ok(SettlingResult {
                    n_cells: n,
                    corner: corner.corner,
                    settling_time: t,
                    final_value,
                    dt_used: dt,
                    t_stop,
                })
            }
            Err(TransientError::NotSettled { .. }) if t_stop < T_STOP_CAP => {
                t_stop = (2.0 * t_stop).min(T_STOP_CAP);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Switch resistance at which the SS read of `n_ref` cells settles in
/// `target` seconds, found by bisection in log space over [1 Ω, 10 MΩ].
pub fn calibrate_switch_resistance(
    target: f64,
    n_ref: usize,
    rates: &ParasiticRates,
    params: &TestbenchParams,
) -> Result<f64, TransientError> {
    if !(target.is_finite() && target > 0.0) {
        return Err(TransientError::CalibrationFailed(format!("target {target} s")));
    }
    let settle = |r: f64| -> Result<f64, TransientError> {
        let corner = CornerModel {
            corner: Corner::Ss,
            r_switch: r,
        };
        match worst_case_settling(n_ref, &corner, rates, params) {
            Ok(s) => Ok(s.settling_time),
            Err(TransientError::NotSettled { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    let (mut lo, mut hi) = (CAL_LO, CAL_HI);
    let (f_lo, f_hi) = (settle(lo)?, settle(hi)?);
    if !(f_lo < target && target < f_hi) {
        return Err(TransientError::CalibrationFailed(format!(
            "target {target:e} s not bracketed: {f_lo:e} s at {CAL_LO} Ω, {f_hi:e} s at {CAL_HI} Ω"
        )));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let f = settle(mid)?;
        if (f - target).abs() <= CAL_TOL * target || hi / lo < 1.0 + 1e-12 {
            return Ok(mid);
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(TransientError::CalibrationFailed(
        "bisection did not converge".into(),
    ))
}

/// Worst-case settling for every (size, corner) pair, ordered by size then
/// corner.
pub fn settling_sweep(
    sizes: &[usize],
    corners: &[CornerModel],
    rates: &ParasiticRates,
    params: &TestbenchParams,
) -> Result<Vec<SettlingResult>, TransientError> {
    let jobs: Vec<(usize, CornerModel)> = sizes
        .iter()
        .flat_map(|&n| corners.iter().map(move |c| (n, *c)))
        .collect();
    let mut out = jobs
        .par_iter()
        .map(|(n, c)| worst_case_settling(*n, c, rates, params))
        .collect::<Result<Vec<_>, _>>()?;
    out.sort_by_key(|r| (r.n_cells, r.corner));
    Ok(out)
}

/// `t(n) = a·exp(k·n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub a: f64,
    pub k: f64,
}

impl ExpFit {
    pub fn eval(&self, n: f64) -> f64 {
        self.a * (self.k * n).exp()
    }
}

/// Least-squares fit of `ln t = ln a + k·n`.
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<ExpFit, TransientError> {
    if points.iter().any(|&(n, t)| !(n.is_finite() && t.is_finite() && t > 0.0)) {
        return Err(TransientError::DegenerateFit(
            "times must be positive and finite".into(),
        ));
    }
    let first = points.first().map(|p| p.0);
    if first.is_none() || points.iter().all(|p| Some(p.0) == first) {
        return Err(TransientError::DegenerateFit(
            "need at least two distinct sizes".into(),
        ));
    }
    let m = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, t) in points {
        sxy += (x - mean_x) * (t.ln() - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    let k = sxy / sxx;
    Ok(ExpFit {
        a: (mean_y - k * mean_x).exp(),
        k,
    })
}
