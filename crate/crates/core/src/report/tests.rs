// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use super::*;

fn settling_fixture() -> Vec<SettlingResult> {
    let mut out = Vec::new();
    for (corner, scale) in [(Corner::Ss, 1.0), (Corner::Tt, 0.7), (Corner::Ff, 0.5)] {
        for n in [8usize, 16, 32, 64, 128] {
            out.push(SettlingResult {
                n_cells: n,
                corner,
                settling_time: scale * 5.223e-10 * (0.004207 * n as f64).exp(),
                final_value: 1.8,
                dt_used: 1e-13,
                t_stop: 1e-9,
            });
        }
    }
    out
}

fn fixture() -> Characterization {
    let table = sweep_parasitics(&[16, 32, 64, 128], &ParasiticRates::default()).unwrap();
    Characterization::new(table, settling_fixture()).unwrap()
}

#[test]
fn sel_capacitance_sweep_values() {
    let t = sweep_parasitics(&[32, 64, 128], &ParasiticRates::default()).unwrap();
    let c: Vec<f64> = t.series("c_sel").iter().map(|p| p.1 * 1e15).collect();
    for (got, want) in c.iter().zip([186.56, 373.12, 746.24]) {
        assert!((got - want).abs() / want < 1e-9, "{got} vs {want}");
    }
    assert_eq!(t.rows().len(), 3 * 3 * 2);
    assert_eq!(t.unit("c_sel"), Some(UNIT_FARAD));
    assert_eq!(t.unit("r_p"), Some(UNIT_OHM));
    assert_eq!(t.metrics(), vec!["c_sel", "c_n", "c_p", "r_sel", "r_n", "r_p"]);
    assert!(t.metadata.iter().any(|(k, _)| k == "c_sel_f_per_cell"));
}

#[test]
fn sweep_normalizes_and_rejects_sizes() {
    let t = sweep_parasitics(&[64, 16, 64], &ParasiticRates::default()).unwrap();
    assert_eq!(t.series("r_n").len(), 2);
    assert!(sweep_parasitics(&[], &ParasiticRates::default()).is_err());
    assert!(sweep_parasitics(&[0, 8], &ParasiticRates::default()).is_err());
}

#[test]
fn exact_line_fits_exactly() {
    let pts: Vec<(f64, f64)> = (1..=8).map(|n| (n as f64, 5.83 * n as f64)).collect();
    let f = linear_fit(&pts).unwrap();
    assert!((f.slope - 5.83).abs() < 1e-12);
    assert!(f.intercept.abs() < 1e-12);
    assert!((f.r_squared - 1.0).abs() < 1e-12);
}

#[test]
fn two_points_define_the_line() {
    let f = linear_fit(&[(2.0, 7.0), (6.0, 15.0)]).unwrap();
    assert!((f.slope - 2.0).abs() < 1e-15);
    assert!((f.intercept - 3.0).abs() < 1e-15);
    assert_eq!(f.r_squared, 1.0);
}

#[test]
fn three_point_noise_moves_slope_by_at_most_epsilon() {
    // x = 0, 1, 2 has sxx = 2 and Σ|x - x̄| = 2, so ±ε noise moves the slope by at most ε
    let eps = 0.125;
    // alternating +ε, -ε, +ε is orthogonal to x - x̄: slope stays 2, intercept 1 + ε/3
    let f = linear_fit(&[(0.0, 1.0 + eps), (1.0, 3.0 - eps), (2.0, 5.0 + eps)]).unwrap();
    assert!((f.slope - 2.0).abs() < 1e-15);
    assert!((f.intercept - (1.0 + eps / 3.0)).abs() < 1e-15);
    assert!(f.r_squared < 1.0 && f.r_squared > 0.9);
    // +ε, 0, -ε is the worst case: slope 2 - ε
    let f = linear_fit(&[(0.0, 1.0 + eps), (1.0, 3.0), (2.0, 5.0 - eps)]).unwrap();
    assert!((f.slope - (2.0 - eps)).abs() < 1e-15);
}

#[test]
fn degenerate_linear_fits() {
    assert!(matches!(linear_fit(&[]), Err(ReportError::DegenerateFit(_))));
    assert!(matches!(
        linear_fit(&[(3.0, 1.0), (3.0, 2.0)]),
        Err(ReportError::DegenerateFit(_))
    ));
    let flat = linear_fit(&[(1.0, 4.0), (2.0, 4.0)]).unwrap();
    assert_eq!(flat.slope, 0.0);
    assert_eq!(flat.r_squared, 1.0);
}

#[test]
fn parasitic_fits_recover_rates() {
    let rates = ParasiticRates::default();
    let r = fixture();
    for kind in LineKind::ALL {
        let c = r.linear_fit(&metric_name(kind, true)).unwrap();
        let want = rates.c_per_cell(kind);
        assert!((c.slope - want).abs() / want < 1e-9);
        assert!(c.intercept.abs() < 1e-18);
        let res = r.linear_fit(&metric_name(kind, false)).unwrap();
        let want = rates.r_per_cell(kind);
        assert!((res.slope - want).abs() / want < 1e-9);
        assert!(res.intercept.abs() < 1e-18);
    }
}

#[test]
fn table_push_enforces_order_and_units() {
    let mut t = SweepTable::new();
    let row = |n, unit: &str| SweepRow {
        n_cells: n,
        metric: "c_sel".into(),
        value: 1.0,
        unit: unit.into(),
    };
    t.push(row(8, "F")).unwrap();
    assert!(matches!(t.push(row(8, "F")), Err(ReportError::InconsistentTable(_))));
    assert!(matches!(t.push(row(16, "ohm")), Err(ReportError::InconsistentTable(_))));
    t.push(row(16, "F")).unwrap();
}

#[test]
fn csv_round_trip() {
    let t = sweep_parasitics(&[8, 16, 32, 64, 128], &ParasiticRates::default()).unwrap();
    let text = t.to_csv().unwrap();
    assert!(text.starts_with("n_cells,metric,value,unit\n"));
    let back = SweepTable::from_csv(&text).unwrap();
    assert_eq!(back.rows(), t.rows());
    assert!(SweepTable::from_csv("n_cells,metric,value,unit\nx,c_sel,1,F\n").is_err());
}

#[test]
fn settling_and_fit_tables() {
    let r = fixture();
    let s = r.settling_csv().unwrap();
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "n_cells,corner,settling_s,final_v");
    assert_eq!(lines.len(), 16);
    assert!(lines[1].starts_with("8,SS,"));
    assert!(lines[3].starts_with("8,FF,"));
    let ss = r.settling_fit(Corner::Ss).unwrap();
    assert!((ss.k - 0.004207).abs() / 0.004207 < 1e-9);
    let f = r.fits_csv().unwrap();
    assert_eq!(f.lines().count(), 1 + 6 + 3);
    assert!(f.contains("\nc_sel,linear,F/cell,"));
    assert!(f.contains("\nsettling_SS,exponential,s,,,,"));
}

#[test]
fn characterization_rejects_empty_inputs() {
    let table = sweep_parasitics(&[16, 32], &ParasiticRates::default()).unwrap();
    assert!(matches!(
        Characterization::new(table, Vec::new()),
        Err(ReportError::EmptyInput(_))
    ));
    let single: Vec<SettlingResult> = settling_fixture().into_iter().filter(|r| r.n_cells == 8).collect();
    let table = sweep_parasitics(&[16, 32], &ParasiticRates::default()).unwrap();
    assert!(matches!(
        Characterization::new(table, single),
        Err(ReportError::DegenerateFit(_))
    ));
}

#[test]
fn svg_is_well_formed_with_one_polyline_per_series() {
    let r = fixture();
    let svg = render_plots(&r);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let polylines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    let count = |class: &str| polylines.iter().filter(|n| n.attribute("class") == Some(class)).count();
    assert_eq!(count("series"), 3 + 3 + 3);
    assert_eq!(count("fit"), 3);
    assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("panel")).count(), 3);
    let labels: Vec<&str> = doc.descendants().filter_map(|n| n.text()).collect();
    assert!(labels.contains(&"C (fF)"));
    assert!(labels.contains(&"R (Ω)"));
    assert!(labels.contains(&"settling time (ps)"));
    assert!(labels.iter().any(|l| l.starts_with("C_SEL (5.83/cell)")));
}

#[test]
fn overlay_samples_the_fit() {
    let fit = ExpFit { a: 5.223e-10, k: 0.004207 };
    let ns = [8.0, 16.0, 100.0];
    for (n, t) in fit_overlay(&fit, &ns) {
        assert_eq!(t, 5.223e-10 * (0.004207 * n).exp());
    }
}

#[test]
fn emit_writes_deterministic_files() {
    let r = fixture();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let fa = emit_report(&r, &a, &[ReportFormat::Csv, ReportFormat::Svg]).unwrap();
    let fb = emit_report(&r, &b, &[ReportFormat::Csv, ReportFormat::Svg]).unwrap();
    let names: Vec<_> = fa.iter().map(|p| p.file_name().unwrap().to_str().unwrap()).collect();
    assert_eq!(names, vec![PARASITICS_CSV, SETTLING_CSV, FITS_CSV, PLOTS_SVG]);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let svg_only = emit_report(&r, &dir.path().join("c"), &[ReportFormat::Svg]).unwrap();
    assert_eq!(svg_only.len(), 1);
}

#[test]
fn emit_surfaces_io_path() {
    let r = fixture();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    match emit_report(&r, &blocker, &[ReportFormat::Csv]) {
        Err(ReportError::Io { path, .. }) => assert_eq!(path, blocker),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #[test]
    fn fitted_slope_matches_any_rate(sizes in prop::collection::btree_set(1usize..4096, 2..10)) {
        let sizes: Vec<usize> = sizes.into_iter().collect();
        let t = sweep_parasitics(&sizes, &ParasiticRates::default()).unwrap();
        for metric in t.metrics() {
            let f = linear_fit(&t.series(metric)).unwrap();
            let rate = t.series(metric)[0].1 / sizes[0] as f64;
            prop_assert!((f.slope - rate).abs() / rate < 1e-9);
            prop_assert!((f.r_squared - 1.0).abs() < 1e-9);
        }
    }
}
