// SPDX-License-Identifier: Apache-2.0

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::parasitics::{elmore_delay, ParasiticRates};

fn single_rc(r: f64, c: f64) -> (RcNetwork, NodeId) {
    let mut net = RcNetwork::new();
    let src = net.node("in");
    let out = net.node("out");
    net.add_source(src, Pwl::step(0.0, 0.0, 1.0).unwrap()).unwrap();
    net.add_resistor(src, out, r).unwrap();
    net.add_capacitor(out, GROUND, c).unwrap();
    (net, out)
}

fn sample_at(w: &Waveforms, k: usize, t: f64) -> f64 {
    let i = w.times.partition_point(|&x| x < t);
    let (t0, t1) = (w.times[i - 1], w.times[i]);
    let (v0, v1) = (w.values[k][i - 1], w.values[k][i]);
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

#[test]
fn single_rc_matches_exponential() {
    let (r, c) = (1e3, 1e-12);
    let tau = r * c;
    let (net, out) = single_rc(r, c);
    let w = Simulator::new(&net, tau / 1000.0).unwrap().run(6.0 * tau, &[out]).unwrap();
    for m in [1.0f64, 2.0, 5.0] {
        let got = sample_at(&w, 0, m * tau);
        let want = 1.0 - (-m).exp();
        assert!((got - want).abs() / want < 1e-3, "t = {m}τ: {got} vs {want}");
    }
}

#[test]
fn zero_input_stays_at_zero() {
    let mut net = RcNetwork::new();
    let src = net.node("in");
    let a = net.node("a");
    let b = net.node("b");
    net.add_source(src, Pwl::constant(0.0).unwrap()).unwrap();
    net.add_resistor(src, a, 10.0).unwrap();
    net.add_resistor(a, b, 20.0).unwrap();
    net.add_capacitor(a, GROUND, 1e-15).unwrap();
    net.add_capacitor(a, b, 2e-15).unwrap();
    let w = solve_transient(&net, 1e-12, 1e-15).unwrap();
    assert!(w.values.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn halving_step_changes_little() {
    let rates = ParasiticRates::default();
    let corner = CornerModel {
        corner: Corner::Ss,
        r_switch: 200.0,
    };
    let tb = build_read_testbench(16, &rates, &corner, &TestbenchParams::default()).unwrap();
    let tau = open_circuit_time_constant(&tb.net).unwrap();
    let dt = tau / 200.0;
    let coarse = Simulator::new(&tb.net, dt).unwrap().run(5.0 * tau, &[tb.mem_n]).unwrap();
    let fine = Simulator::new(&tb.net, dt / 2.0).unwrap().run(5.0 * tau, &[tb.mem_n]).unwrap();
    let scale = coarse.values[0].last().unwrap().abs();
    for (i, v) in coarse.values[0].iter().enumerate() {
        let diff = (v - fine.values[0][2 * i]).abs();
        assert!(diff < 1e-3 * scale, "step {i}: {diff}");
    }
}

#[test]
fn single_rc_settling_is_ln100_tau() {
    let (r, c) = (2e3, 0.5e-12);
    let tau = r * c;
    let (net, out) = single_rc(r, c);
    let w = Simulator::new(&net, tau / 1000.0).unwrap().run(8.0 * tau, &[out]).unwrap();
    let t = settling_time(&w.times, &w.values[0], 1.0, DEFAULT_BAND).unwrap();
    let want = 100f64.ln() * tau;
    assert!((t - want).abs() / want < 5e-3, "{t} vs {want}");
}

#[test]
fn settling_time_edge_cases() {
    let times = [0.0, 1.0, 2.0, 3.0];
    assert_eq!(settling_time(&times, &[1.0, 1.0, 1.0, 1.0], 1.0, 0.01), Ok(0.0));
    assert_eq!(
        settling_time(&times, &[0.0, 0.5, 0.9, 0.95], 1.0, 0.01),
        Err(TransientError::NotSettled { t_end: 3.0 })
    );
    // crossing 0.99 between 0.98 and 1.0
    let t = settling_time(&times, &[0.0, 0.98, 1.0, 1.0], 1.0, 0.01).unwrap();
    assert!((t - 1.5).abs() < 1e-12);
    // overshoot leaves the band from above
    let t = settling_time(&times, &[0.0, 1.03, 1.0, 1.0], 1.0, 0.01).unwrap();
    assert!((t - (1.0 + 2.0 / 3.0)).abs() < 1e-12);
    assert!(matches!(
        settling_time(&times, &[0.0; 4], 0.0, 0.01),
        Err(TransientError::InvalidWaveform(_))
    ));
    assert!(settling_time(&[], &[], 1.0, 0.01).is_err());
}

#[test]
fn dc_divider() {
    let mut net = RcNetwork::new();
    let src = net.node("in");
    let mid = net.node("mid");
    net.add_source(src, Pwl::constant(3.0).unwrap()).unwrap();
    net.add_resistor(src, mid, 1e3).unwrap();
    net.add_resistor(mid, GROUND, 2e3).unwrap();
    let v = dc_solve(&net, 0.0).unwrap();
    assert_eq!(v[0], 0.0);
    assert_eq!(v[src.0], 3.0);
    assert!((v[mid.0] - 2.0).abs() < 1e-12);
}

#[test]
fn network_validation() {
    let mut net = RcNetwork::new();
    let a = net.node("a");
    let b = net.node("b");
    assert!(net.add_resistor(a, a, 1.0).is_err());
    assert!(net.add_resistor(a, b, 0.0).is_err());
    assert!(net.add_capacitor(a, b, f64::NAN).is_err());
    assert!(net.add_source(GROUND, Pwl::constant(1.0).unwrap()).is_err());
    net.add_source(a, Pwl::constant(1.0).unwrap()).unwrap();
    assert_eq!(
        net.add_source(a, Pwl::constant(2.0).unwrap()),
        Err(TransientError::DuplicateSource("a".into()))
    );
    net.add_capacitor(a, b, 1e-15).unwrap();
    assert_eq!(net.validate(), Err(TransientError::FloatingNode("b".into())));
    assert!(Simulator::new(&net, 1e-12).is_err());
    net.add_resistor(b, GROUND, 1.0).unwrap();
    assert!(Simulator::new(&net, 0.0).is_err());
    assert!(Simulator::new(&net, 1e-12).unwrap().run(-1.0, &[b]).is_err());
}

#[test]
fn pwl_interpolates_and_holds() {
    let w = Pwl::new(vec![(1.0, 0.0), (2.0, 4.0), (4.0, 0.0)]).unwrap();
    assert_eq!(w.value(0.0), 0.0);
    assert_eq!(w.value(1.5), 2.0);
    assert_eq!(w.value(3.0), 2.0);
    assert_eq!(w.value(9.0), 0.0);
    assert!(Pwl::new(vec![]).is_err());
    assert!(Pwl::new(vec![(1.0, 0.0), (1.0, 1.0)]).is_err());
}

#[test]
fn waveform_csv_is_long_format() {
    let (net, out) = single_rc(1.0, 1.0);
    let w = Simulator::new(&net, 0.5).unwrap().run(1.0, &[out]).unwrap();
    let csv = w.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "time_s,node,volts");
    assert_eq!(lines.len(), 1 + w.times.len());
    assert!(lines[1].starts_with("0e0,out,"));
    assert_eq!(w.get("out").unwrap().len(), 3);
    assert!(w.get("nope").is_none());
}

fn ladder_net(rs: &[f64], cs: &[f64]) -> (RcNetwork, Vec<NodeId>) {
    let mut net = RcNetwork::new();
    let src = net.node("in");
    net.add_source(src, Pwl::step(0.0, 0.0, 1.0).unwrap()).unwrap();
    let mut prev = src;
    let mut nodes = Vec::new();
    for (k, (&r, &c)) in rs.iter().zip(cs).enumerate() {
        let n = net.node(&format!("x{k}"));
        net.add_resistor(prev, n, r).unwrap();
        net.add_capacitor(n, GROUND, c).unwrap();
        nodes.push(n);
        prev = n;
    }
    (net, nodes)
}

#[test]
fn far_node_half_delay_within_elmore_bounds() {
    let rates = ParasiticRates::default();
    let ladder = crate::parasitics::build_ladder(crate::arch::LineKind::Sel, 64, &rates).unwrap();
    let rs: Vec<f64> = ladder.segments().iter().map(|s| s.series_r).collect();
    let cs: Vec<f64> = ladder.segments().iter().map(|s| s.shunt_c).collect();
    let (net, nodes) = ladder_net(&rs, &cs);
    let elmore = elmore_delay(&ladder);
    let far = *nodes.last().unwrap();
    let w = Simulator::new(&net, elmore / 2000.0).unwrap().run(3.0 * elmore, &[far]).unwrap();
    let i = w.values[0].iter().position(|&v| v >= 0.5).unwrap();
    let t50 = w.times[i];
    assert!(t50 <= elmore, "{t50} > {elmore}");
    assert!(t50 >= 0.5 * elmore, "{t50} < elmore/2");
}

/// `C·v' + G·v = b` solved with a matrix exponential.
fn expm_reference(g: &DMatrix<f64>, c: &DMatrix<f64>, b: &DVector<f64>, t: f64) -> DVector<f64> {
    let c_inv = c.clone().try_inverse().unwrap();
    let v_inf = g.clone().lu().solve(b).unwrap();
    let a = -(&c_inv * g) * t;
    &v_inf - a.exp() * &v_inf
}

#[test]
fn matches_matrix_exponential_with_floating_cap() {
    // in -R1- a -R2- b -R3- gnd, Ca and Cb to ground, Cab across
    let (r1, r2, r3) = (100.0, 250.0, 400.0);
    let (ca, cb, cab) = (2e-12, 3e-12, 1e-12);
    let mut net = RcNetwork::new();
    let src = net.node("in");
    let a = net.node("a");
    let b = net.node("b");
    net.add_source(src, Pwl::step(0.0, 0.0, 1.0).unwrap()).unwrap();
    net.add_resistor(src, a, r1).unwrap();
    net.add_resistor(a, b, r2).unwrap();
    net.add_resistor(b, GROUND, r3).unwrap();
    net.add_capacitor(a, GROUND, ca).unwrap();
    net.add_capacitor(b, GROUND, cb).unwrap();
    net.add_capacitor(a, b, cab).unwrap();

    let g = DMatrix::from_row_slice(2, 2, &[1.0 / r1 + 1.0 / r2, -1.0 / r2, -1.0 / r2, 1.0 / r2 + 1.0 / r3]);
    let c = DMatrix::from_row_slice(2, 2, &[ca + cab, -cab, -cab, cb + cab]);
    let rhs = DVector::from_vec(vec![1.0 / r1, 0.0]);

    let tau = open_circuit_time_constant(&net).unwrap();
    let w = Simulator::new(&net, tau / 2000.0).unwrap().run(4.0 * tau, &[a, b]).unwrap();
    for m in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let t = m * tau;
        let want = expm_reference(&g, &c, &rhs, t);
        for k in 0..2 {
            let got = sample_at(&w, k, t);
            assert!((got - want[k]).abs() < 1e-3 * want[k].abs().max(1e-2), "node {k} at {m}τ: {got} vs {}", want[k]);
        }
    }
}

#[test]
fn open_circuit_tau_of_single_rc() {
    let (net, _) = single_rc(1e3, 2e-12);
    assert!((open_circuit_time_constant(&net).unwrap() - 2e-9).abs() < 1e-21);
}

#[test]
fn testbench_structure_and_dc() {
    let rates = ParasiticRates::default();
    let params = TestbenchParams::default();
    let corner = CornerModel {
        corner: Corner::Tt,
        r_switch: 300.0,
    };
    for n in [1, 8, 33] {
        let tb = build_read_testbench(n, &rates, &corner, &params).unwrap();
        assert_eq!(tb.net.resistors().len(), 2 * n + 2);
        assert_eq!(tb.net.capacitors().len(), 2 * n + 1);
        assert_eq!(tb.net.sources().len(), 2);
        let dc = dc_solve(&tb.net, 1e-9).unwrap();
        let v = dc[tb.mem_n.0] - dc[tb.mem_p.0];
        let r_n = n as f64 * rates.r_per_cell(crate::arch::LineKind::N);
        let r_p = n as f64 * rates.r_per_cell(crate::arch::LineKind::P);
        let want = params.vdd * params.r_mem / (params.r_mem + corner.r_switch + r_n + r_p);
        assert!((v - want).abs() / want < 1e-9);
        assert!((tb.dc_memristor_voltage(&corner, &params) - want).abs() / want < 1e-12);
    }
    let bad = CornerModel {
        corner: Corner::Ss,
        r_switch: 0.0,
    };
    assert!(build_read_testbench(8, &rates, &bad, &params).is_err());
    assert!(build_read_testbench(0, &rates, &corner, &params).is_err());
}

#[test]
fn calibration_hits_target_and_is_monotone() {
    let rates = ParasiticRates::default();
    let params = TestbenchParams::default();
    let r = calibrate_switch_resistance(DEFAULT_TARGET_SETTLING, DEFAULT_N_REF, &rates, &params).unwrap();
    let ss = CornerModel {
        corner: Corner::Ss,
        r_switch: r,
    };
    let t = worst_case_settling(DEFAULT_N_REF, &ss, &rates, &params).unwrap().settling_time;
    assert!((t - DEFAULT_TARGET_SETTLING).abs() / DEFAULT_TARGET_SETTLING < 0.01, "{t}");
    let r_slow = calibrate_switch_resistance(2.0 * DEFAULT_TARGET_SETTLING, DEFAULT_N_REF, &rates, &params).unwrap();
    assert!(r_slow > r);
    assert!(matches!(
        calibrate_switch_resistance(1e-18, DEFAULT_N_REF, &rates, &params),
        Err(TransientError::CalibrationFailed(_))
    ));
}

#[test]
fn sweep_orders_corners_and_sizes() {
    let rates = ParasiticRates::default();
    let params = TestbenchParams::default();
    let corners = corners_from_ss(230.0);
    assert_eq!(corners[1].r_switch, 230.0 * TT_SCALE);
    assert_eq!(corners[2].r_switch, 230.0 * FF_SCALE);
    let sizes = [8, 16, 32, 64, 128];
    let res = settling_sweep(&sizes, &corners, &rates, &params).unwrap();
    assert_eq!(res.len(), 15);
    for chunk in res.chunks(3) {
        assert_eq!(
            chunk.iter().map(|r| r.corner).collect::<Vec<_>>(),
            vec![Corner::Ss, Corner::Tt, Corner::Ff]
        );
        assert!(chunk[0].settling_time >= chunk[1].settling_time);
        assert!(chunk[1].settling_time >= chunk[2].settling_time);
    }
    for c in 0..3 {
        let t: Vec<f64> = res.iter().skip(c).step_by(3).map(|r| r.settling_time).collect();
        assert!(t.windows(2).all(|w| w[1] >= w[0]), "{t:?}");
        let ratio = t[4] / t[0];
        assert!((1.2..=4.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn fit_recovers_exponential() {
    let (a, k): (f64, f64) = (5.223e-10, 0.004207);
    let pts: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0, 128.0]
        .iter()
        .map(|&n| (n, a * (k * n).exp()))
        .collect();
    let fit = fit_exponential(&pts).unwrap();
    assert!((fit.a - a).abs() / a < 1e-6);
    assert!((fit.k - k).abs() / k < 1e-6);
    assert!((fit.eval(64.0) - pts[3].1).abs() / pts[3].1 < 1e-9);

    let flat = fit_exponential(&[(8.0, 1e-9), (16.0, 1e-9), (32.0, 1e-9)]).unwrap();
    assert!(flat.k.abs() < 1e-15);

    let mut rev = pts.clone();
    rev.reverse();
    let fit_rev = fit_exponential(&rev).unwrap();
    assert!((fit_rev.k - fit.k).abs() < 1e-12 * k);
}

#[test]
fn fit_rejects_degenerate_input() {
    assert!(matches!(fit_exponential(&[]), Err(TransientError::DegenerateFit(_))));
    assert!(matches!(
        fit_exponential(&[(8.0, 1e-9), (8.0, 2e-9)]),
        Err(TransientError::DegenerateFit(_))
    ));
    assert!(matches!(
        fit_exponential(&[(8.0, 1e-9), (16.0, 0.0)]),
        Err(TransientError::DegenerateFit(_))
    ));
}

#[test]
fn corner_names_round_trip() {
    for c in Corner::ALL {
        assert_eq!(Corner::parse(c.as_str()), Some(c));
        assert_eq!(Corner::parse(&c.as_str().to_lowercase()), Some(c));
    }
    assert_eq!(Corner::parse("XX"), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ladder_step_is_monotone_and_reaches_dc(
        vals in prop::collection::vec((10.0f64..1e3, 1e-15f64..1e-14), 1..8)
    ) {
        let rs: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let cs: Vec<f64> = vals.iter().map(|v| v.1).collect();
        let (net, nodes) = ladder_net(&rs, &cs);
        // Gershgorin bound on the fastest mode keeps trapezoidal steps non-oscillating
        let lambda = (0..rs.len())
            .map(|k| 2.0 * (1.0 / rs[k] + rs.get(k + 1).map_or(0.0, |r| 1.0 / r)) / cs[k])
            .fold(0.0, f64::max);
        let tau = open_circuit_time_constant(&net).unwrap();
        let dt = (0.5 / lambda).min(tau / 200.0);
        let w = Simulator::new(&net, dt).unwrap().run(12.0 * tau, &nodes).unwrap();
        for series in &w.values {
            prop_assert!(series.windows(2).all(|p| p[1] >= p[0] - 1e-12));
            prop_assert!((series.last().unwrap() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn fit_is_order_invariant(seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut pts: Vec<(f64, f64)> = (1..=6).map(|i| {
            let n = 8.0 * i as f64;
            (n, 1e-10 * (0.01 * n).exp() * (1.0 + 0.01 * ((i * 7) % 5) as f64))
        }).collect();
        let base = fit_exponential(&pts).unwrap();
        pts.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled = fit_exponential(&pts).unwrap();
        prop_assert!((base.k - shuffled.k).abs() <= 1e-12 * base.k.abs());
        prop_assert!((base.a - shuffled.a).abs() <= 1e-12 * base.a);
    }
}
