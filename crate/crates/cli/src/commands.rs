// SPDX-License-Identifier: Apache-2.0

//! The four compiler commands. Each computes everything first and then
//! writes its files in a fixed order.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rramc_core::layout::{emit_gdsii_with, parse_gdsii, render_svg, tile_array, GdsOptions, LayoutDb, SvgOptions};
use rramc_core::netlist::{build_array, build_extracted_array, emit_spice, parse_spice, CellParams, Netlist};
use rramc_core::report::{emit_report, sweep_parasitics, Characterization, ReportError, ReportFormat};
use rramc_core::transient::{
    calibrate_switch_resistance, corners_from_ss, settling_sweep, TestbenchParams, TransientError,
};
use rramc_core::verify::{
    drc, drc_report_csv, drc_report_text, extract_connectivity, inject_layout_fault, inject_netlist_fault, lvs,
    FaultKind, MatchReport,
};

use crate::config::CompilerConfig;
use crate::error::CliError;
use crate::protocol::{parse_script, run_script};

pub const NETLIST: &str = "netlist/array.sp";
pub const NETLIST_EXTRACTED: &str = "netlist/array_extracted.sp";
pub const NETLIST_FAULT: &str = "netlist/array_fault.sp";
pub const GDS: &str = "layout/array.gds";
pub const GDS_FAULT: &str = "layout/array_fault.gds";
pub const LAYOUT_SVG: &str = "layout/array.svg";
pub const DRC_DIR: &str = "drc";
pub const LVS_DIR: &str = "lvs";
pub const PEX_DIR: &str = "pex";
pub const DRC_REPORT: &str = "drc/report.txt";
pub const DRC_CSV: &str = "drc/violations.csv";
pub const LVS_REPORT: &str = "lvs/report.txt";
pub const CALIBRATION: &str = "pex/calibration.kv";
pub const PROTOCOL_TRACE: &str = "protocol/trace.txt";
pub const PROTOCOL_EVENTS: &str = "protocol/events.txt";
pub const CONFIG_RESOLVED: &str = "config.resolved";

/// Fault planted before verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FaultTarget {
    /// Narrow one layout shape below the minimum width
    Drc,
    /// Swap P and N of one cell in the reference netlist
    Lvs,
}

fn write_all(out: &Path, files: &[(&str, Vec<u8>)]) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for (rel, body) in files {
        let path = out.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        }
        fs::write(&path, body).map_err(CliError::io(&path))?;
        written.push(path);
    }
    Ok(written)
}

fn create_dirs(out: &Path, dirs: &[&str]) -> Result<(), CliError> {
    for d in dirs {
        let p = out.join(d);
        fs::create_dir_all(&p).map_err(CliError::io(&p))?;
    }
    Ok(())
}

fn reference_netlist(cfg: &CompilerConfig) -> Result<Netlist, CliError> {
    build_array(&cfg.array, &CellParams::default()).map_err(CliError::generation)
}

/// Writes the schematic, extracted netlist, GDSII and SVG views and the
/// empty verification folders.
pub fn cmd_generate(cfg: &CompilerConfig) -> Result<Vec<PathBuf>, CliError> {
    let netlist = reference_netlist(cfg)?;
    let extracted =
        build_extracted_array(&cfg.array, &cfg.rates, &CellParams::default()).map_err(CliError::generation)?;
    let db = tile_array(&cfg.array, &cfg.template);
    let gds = emit_gdsii_with(
        &db,
        GdsOptions {
            real_timestamps: cfg.real_timestamps,
        },
    )
    .map_err(CliError::generation)?;
    let svg = render_svg(
        &db,
        &SvgOptions {
            layers: cfg.layers.clone(),
            ..SvgOptions::default()
        },
    );
    let files = [
        (NETLIST, emit_spice(&netlist).map_err(CliError::generation)?.into_bytes()),
        (NETLIST_EXTRACTED, emit_spice(&extracted).map_err(CliError::generation)?.into_bytes()),
        (GDS, gds),
        (LAYOUT_SVG, svg.into_bytes()),
        (CONFIG_RESOLVED, cfg.resolved_text().into_bytes()),
    ];
    let written = write_all(&cfg.out, &files)?;
    create_dirs(&cfg.out, &[DRC_DIR, LVS_DIR, PEX_DIR])?;
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub violations: usize,
    pub lvs: MatchReport,
    pub drc_report: PathBuf,
    pub lvs_report: PathBuf,
}

fn load_artifacts(cfg: &CompilerConfig) -> Result<(LayoutDb, Netlist), CliError> {
    let gds_path = cfg.out.join(GDS);
    let sp_path = cfg.out.join(NETLIST);
    if !gds_path.exists() || !sp_path.exists() {
        cmd_generate(cfg)?;
    }
    let bytes = fs::read(&gds_path).map_err(CliError::io(&gds_path))?;
    let db = parse_gdsii(&bytes).map_err(|e| CliError::Generation(format!("{}: {e}", gds_path.display())))?;
    let text = fs::read_to_string(&sp_path).map_err(CliError::io(&sp_path))?;
    let netlist = parse_spice(&text).map_err(|e| CliError::Generation(format!("{}: {e}", sp_path.display())))?;
    Ok((db, netlist))
}

/// DRC, extraction and LVS over the generated artifacts, regenerating them
/// first if they are missing.
pub fn cmd_verify(cfg: &CompilerConfig, fault: Option<FaultTarget>) -> Result<VerifyOutcome, CliError> {
    let (mut db, mut netlist) = load_artifacts(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.fault_seed);
    let mut extra: Vec<(&str, Vec<u8>)> = Vec::new();
    match fault {
        Some(FaultTarget::Drc) => {
            let (faulty, info) = inject_layout_fault(&db, &cfg.template, &cfg.deck, FaultKind::Shrink, &mut rng)
                .map_err(CliError::generation)?;
            eprintln!("injected layout fault: {}", info.description);
            let gds = emit_gdsii_with(
                &faulty,
                GdsOptions {
                    real_timestamps: cfg.real_timestamps,
                },
            )
            .map_err(CliError::generation)?;
            extra.push((GDS_FAULT, gds));
            db = faulty;
        }
        Some(FaultTarget::Lvs) => {
            let (faulty, info) = inject_netlist_fault(&netlist, &mut rng).map_err(CliError::generation)?;
            eprintln!("injected netlist fault: {}", info.description);
            extra.push((NETLIST_FAULT, emit_spice(&faulty).map_err(CliError::generation)?.into_bytes()));
            netlist = faulty;
        }
        None => {}
    }

    let violations = drc(&db, &cfg.deck);
    let graph = extract_connectivity(&db, &cfg.template).map_err(CliError::generation)?;
    let report = lvs(&graph, &netlist).map_err(CliError::generation)?;

    extra.push((DRC_REPORT, drc_report_text(&violations, &cfg.deck).into_bytes()));
    extra.push((DRC_CSV, drc_report_csv(&violations, &cfg.deck).into_bytes()));
    extra.push((LVS_REPORT, report.to_string().into_bytes()));
    write_all(&cfg.out, &extra)?;
    create_dirs(&cfg.out, &[PEX_DIR])?;

    let outcome = VerifyOutcome {
        violations: violations.len(),
        drc_report: cfg.out.join(DRC_REPORT),
        lvs_report: cfg.out.join(LVS_REPORT),
        lvs: report,
    };
    if outcome.violations > 0 {
        return Err(CliError::Drc {
            count: outcome.violations,
            report: outcome.drc_report,
        });
    }
    if !outcome.lvs.matched {
        return Err(CliError::Lvs {
            reason: outcome.lvs.divergence.clone().unwrap_or_default(),
            report: outcome.lvs_report,
        });
    }
    Ok(outcome)
}

fn characterize_error(e: TransientError) -> CliError {
    CliError::Characterize(e.to_string())
}

/// Parasitic sweep, switch calibration, settling sweep over the selected
/// corners and fits, written into `pex/`.
pub fn cmd_characterize(cfg: &CompilerConfig) -> Result<Characterization, CliError> {
    let table = sweep_parasitics(&cfg.sizes, &cfg.rates).map_err(|e| CliError::Characterize(e.to_string()))?;
    let params = TestbenchParams {
        c_port: cfg.c_port,
        ..TestbenchParams::default()
    };
    let r_ss = calibrate_switch_resistance(cfg.target_settling, cfg.n_ref, &cfg.rates, &params)
        .map_err(characterize_error)?;
    let corners: Vec<_> = corners_from_ss(r_ss)
        .into_iter()
        .filter(|c| cfg.corners.contains(&c.corner))
        .collect();
    let settling = settling_sweep(&cfg.sizes, &corners, &cfg.rates, &params).map_err(characterize_error)?;
    let report = Characterization::new(table, settling).map_err(|e| CliError::Characterize(e.to_string()))?;

    let pex = cfg.out.join(PEX_DIR);
    emit_report(&report, &pex, &[ReportFormat::Csv, ReportFormat::Svg]).map_err(|e| match e {
        ReportError::Io { path, source } => CliError::Io { path, source },
        other => CliError::Characterize(other.to_string()),
    })?;
    let mut cal = String::new();
    cal.push_str(&format!("n_ref={}\n", cfg.n_ref));
    cal.push_str(&format!("target_settling_s={:e}\n", cfg.target_settling));
    cal.push_str(&format!("c_port_f={:e}\n", cfg.c_port));
    for c in &corners {
        cal.push_str(&format!(
            "r_switch_{}_ohm={:e}\n",
            c.corner.as_str().to_ascii_lowercase(),
            c.r_switch
        ));
    }
    write_all(
        &cfg.out,
        &[
            (CALIBRATION, cal.into_bytes()),
            (CONFIG_RESOLVED, cfg.resolved_text().into_bytes()),
        ],
    )?;
    Ok(report)
}

/// Executes a read/write script and writes the trace and line events.
pub fn cmd_protocol(cfg: &CompilerConfig, script: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(script).map_err(|e| CliError::Config(format!("{}: {e}", script.display())))?;
    let ops = parse_script(&text, &cfg.array)?;
    let trace = run_script(&ops, &cfg.array)?;
    let plans = crate::protocol::plan_script(&ops, &cfg.array)?;
    let events = rramc_core::arch::event_trace(&plans);
    write_all(
        &cfg.out,
        &[
            (PROTOCOL_TRACE, trace.clone().into_bytes()),
            (PROTOCOL_EVENTS, events.into_bytes()),
        ],
    )?;
    Ok(trace)
}
