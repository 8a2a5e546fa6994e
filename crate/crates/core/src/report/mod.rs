// SPDX-License-Identifier: Apache-2.0

//! Characterization tables, least-squares fits and their CSV/SVG artifacts.

mod plot;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::arch::LineKind;
use crate::parasitics::{line_capacitance, line_resistance, ParasiticRates};
use crate::transient::{fit_exponential, Corner, ExpFit, SettlingResult, TransientError};

pub use plot::{fit_overlay, render_plots};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("inconsistent table: {0}")]
    InconsistentTable(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<csv::Error> for ReportError {
    fn from(e: csv::Error) -> Self {
        ReportError::Csv(e.to_string())
    }
}

impl From<TransientError> for ReportError {
    fn from(e: TransientError) -> Self {
        ReportError::DegenerateFit(e.to_string())
    }
}

pub const UNIT_FARAD: &str = "F";
pub const UNIT_OHM: &str = "ohm";

/// Metric name for a line kind's capacitance or resistance, e.g. `c_sel`.
pub fn metric_name(kind: LineKind, capacitance: bool) -> String {
    let k = kind.as_str().to_ascii_lowercase();
    if capacitance {
        format!("c_{k}")
    } else {
        format!("r_{k}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_cells: usize,
    pub metric: String,
    pub value: f64,
    pub unit: String,
}

/// Long-format table of per-size metrics. Sizes strictly increase within a
/// metric and each metric has a single unit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    rows: Vec<SweepRow>,
    /// Provenance, e.g. the rates the sweep was computed from.
    pub metadata: Vec<(String, String)>,
}

impl SweepTable {
    pub fn new() -> Self {
        SweepTable::default()
    }

    pub fn push(&mut self, row: SweepRow) -> Result<(), ReportError> {
        if let Some(prev) = self.rows.iter().rev().find(|r| r.metric == row.metric) {
            if prev.unit != row.unit {
                return Err(ReportError::InconsistentTable(format!(
                    "{} mixes units {} and {}",
                    row.metric, prev.unit, row.unit
                )));
            }
            if row.n_cells <= prev.n_cells {
                return Err(ReportError::InconsistentTable(format!(
                    "{} sizes must increase ({} after {})",
                    row.metric, row.n_cells, prev.n_cells
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[SweepRow] {
        &self.rows
    }

    /// Metric names in order of first appearance.
    pub fn metrics(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.metric.as_str()) {
                out.push(&r.metric);
            }
        }
        out
    }

    pub fn unit(&self, metric: &str) -> Option<&str> {
        self.rows.iter().find(|r| r.metric == metric).map(|r| r.unit.as_str())
    }

    pub fn series(&self, metric: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| (r.n_cells as f64, r.value))
            .collect()
    }

    /// `n_cells,metric,value,unit` with full-precision values.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(["n_cells", "metric", "value", "unit"])?;
        for r in &self.rows {
            w.write_record([
                r.n_cells.to_string(),
                r.metric.clone(),
                format!("{:e}", r.value),
                r.unit.clone(),
            ])?;
        }
        finish(w)
    }

    pub fn from_csv(text: &str) -> Result<Self, ReportError> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let mut table = SweepTable::new();
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(ReportError::Csv(format!("expected 4 fields, got {}", rec.len())));
            }
            let parse_err = |what: &str, v: &str| ReportError::Csv(format!("bad {what} `{v}`"));
            table.push(SweepRow {
                n_cells: rec[0].parse().map_err(|_| parse_err("size", &rec[0]))?,
                metric: rec[1].to_string(),
                value: rec[2].parse().map_err(|_| parse_err("value", &rec[2]))?,
                unit: rec[3].to_string(),
            })?;
        }
        Ok(table)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ReportError::Csv(e.to_string()))
}

/// Sorted, de-duplicated sizes; rejects empty lists and zero.
fn normalize_sizes(sizes: &[usize]) -> Result<Vec<usize>, ReportError> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(ReportError::EmptyInput(
            "sweep sizes must be non-empty and positive".into(),
        ));
    }
    let mut s = sizes.to_vec();
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

/// Line capacitance and resistance of every line kind at every size.
pub fn sweep_parasitics(sizes: &[usize], rates: &ParasiticRates) -> Result<SweepTable, ReportError> {
    let sizes = normalize_sizes(sizes)?;
    let mut table = SweepTable::new();
    for kind in LineKind::ALL {
        for &n in &sizes {
            table.push(SweepRow {
                n_cells: n,
                metric: metric_name(kind, true),
                value: line_capacitance(kind, n, rates),
                unit: UNIT_FARAD.into(),
            })?;
        }
    }
    for kind in LineKind::ALL {
        for &n in &sizes {
            table.push(SweepRow {
                n_cells: n,
                metric: metric_name(kind, false),
                value: line_resistance(kind, n, rates),
                unit: UNIT_OHM.into(),
            })?;
        }
    }
    let kv = rates.to_kv();
    table.metadata = kv
        .keys()
        .map(|k| (k.to_string(), kv.get(k).unwrap_or_default().to_string()))
        .collect();
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit, ReportError> {
    let first = points.first().map(|p| p.0);
    if first.is_none() || points.iter().all(|p| Some(p.0) == first) {
        return Err(ReportError::DegenerateFit(
            "need at least two distinct abscissae".into(),
        ));
    }
    if points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(ReportError::DegenerateFit("non-finite point".into()));
    }
    let m = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
        syy += (y - mean_y) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Everything the characterization step reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Characterization {
    pub parasitics: SweepTable,
    /// Per metric: (metric, unit, fit).
    pub linear_fits: Vec<(String, String, LinearFit)>,
    /// Ordered by size, then corner.
    pub settling: Vec<SettlingResult>,
    pub settling_fits: Vec<(Corner, ExpFit)>,
}

impl Characterization {
    pub fn new(parasitics: SweepTable, mut settling: Vec<SettlingResult>) -> Result<Self, ReportError> {
        if parasitics.rows().is_empty() {
            return Err(ReportError::EmptyInput("parasitic table".into()));
        }
        if settling.is_empty() {
            return Err(ReportError::EmptyInput("settling results".into()));
        }
        let mut linear_fits = Vec::new();
        for metric in parasitics.metrics() {
            let fit = linear_fit(&parasitics.series(metric))?;
            let unit = parasitics.unit(metric).unwrap_or_default().to_string();
            linear_fits.push((metric.to_string(), unit, fit));
        }
        settling.sort_by_key(|r| (r.n_cells, r.corner));
        let mut by_corner: BTreeMap<Corner, Vec<(f64, f64)>> = BTreeMap::new();
        for r in &settling {
            by_corner
                .entry(r.corner)
                .or_default()
                .push((r.n_cells as f64, r.settling_time));
        }
        let settling_fits = by_corner
            .into_iter()
            .map(|(c, pts)| Ok((c, fit_exponential(&pts)?)))
            .collect::<Result<Vec<_>, ReportError>>()?;
        Ok(Characterization {
            parasitics,
            linear_fits,
            settling,
            settling_fits,
        })
    }

    pub fn linear_fit(&self, metric: &str) -> Option<&LinearFit> {
        self.linear_fits.iter().find(|f| f.0 == metric).map(|f| &f.2)
    }

    pub fn settling_fit(&self, corner: Corner) -> Option<&ExpFit> {
        self.settling_fits.iter().find(|f| f.0 == corner).map(|f| &f.1)
    }

    /// `n_cells,corner,settling_s,final_v`.
    pub fn settling_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(["n_cells", "corner", "settling_s", "final_v"])?;
        for r in &self.settling {
            w.write_record([
                r.n_cells.to_string(),
                r.corner.to_string(),
                format!("{:e}", r.settling_time),
                format!("{:e}", r.final_value),
            ])?;
        }
        finish(w)
    }

    /// `series,model,unit,slope,intercept,r_squared,prefactor,rate`; columns
    /// that do not apply to a model are empty.
    pub fn fits_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record([
            "series", "model", "unit", "slope", "intercept", "r_squared", "prefactor", "rate",
        ])?;
        for (metric, unit, f) in &self.linear_fits {
            w.write_record([
                metric.clone(),
                "linear".into(),
                format!("{unit}/cell"),
                format!("{:e}", f.slope),
                format!("{:e}", f.intercept),
                format!("{:e}", f.r_squared),
                String::new(),
                String::new(),
            ])?;
        }
        for (corner, f) in &self.settling_fits {
            w.write_record([
                format!("settling_{corner}"),
                "exponential".into(),
                "s".into(),
                String::new(),
                String::new(),
                String::new(),
                format!("{:e}", f.a),
                format!("{:e}", f.k),
            ])?;
        }
        finish(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

pub const PARASITICS_CSV: &str = "parasitics.csv";
pub const SETTLING_CSV: &str = "settling.csv";
pub const FITS_CSV: &str = "fits.csv";
pub const PLOTS_SVG: &str = "plots.svg";

/// Writes the requested artifacts into `dir` and returns their paths in
/// write order.
pub fn emit_report(
    report: &Characterization,
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>, ReportError> {
    let mut files: Vec<(&str, String)> = Vec::new();
    if formats.contains(&ReportFormat::Csv) {
        files.push((PARASITICS_CSV, report.parasitics.to_csv()?));
        files.push((SETTLING_CSV, report.settling_csv()?));
        files.push((FITS_CSV, report.fits_csv()?));
    }
    if formats.contains(&ReportFormat::Svg) {
        files.push((PLOTS_SVG, render_plots(report)));
    }
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|source| ReportError::Io {
            path: path.clone(),
            source,
        })?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
