// SPDX-License-Identifier: Apache-2.0

//! Array architecture: geometry, addressing, read/write plans and a
//! behavioral protocol simulator.
//!
//! An array has `M = 2^Y` rows sharing horizontal SEL lines and
//! `N = b·2^X` columns sharing vertical P and N lines. A Y-to-2^Y decoder
//! picks one SEL line; two `b·2^X`-to-`b` multiplexers connect one word's
//! P and N lines to the read/write circuits.

use std::fmt;

use sha2::{Digest, Sha256};

pub const DEFAULT_VDD: f64 = 1.8;
pub const DEFAULT_V_READ: f64 = 0.2;
/// Read voltages at or above this level may disturb the stored state.
pub const READ_DISTURB_LIMIT: f64 = 0.5;
/// Write threshold as a fraction of VDD.
pub const WRITE_THRESHOLD_FRACTION: f64 = 0.9;
pub const DEFAULT_T_WRITE: f64 = 10e-9;
pub const DEFAULT_T_READ: f64 = 10e-9;
/// Worst-case high resistive state.
pub const DEFAULT_R_HIGH: f64 = 5e6;
pub const DEFAULT_R_LOW: f64 = 10e3;

/// Resistive state stored by a logic `1`. A `0` is the other state.
pub const ONE_STATE: CellState = CellState::Low;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArchError {
    #[error("{what} = {value} is not a power of two")]
    NotPowerOfTwo { what: &'static str, value: usize },
    #[error("{0} must be at least 1")]
    ZeroDimension(&'static str),
    #[error("invalid voltages: {0}")]
    InvalidVoltage(String),
    #[error("row {row} out of range for {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("word select {word} out of range for {words} words per row")]
    WordOutOfRange { word: usize, words: usize },
    #[error("data word {data:#x} does not fit in {bits} bits")]
    DataOutOfRange { data: u64, bits: usize },
    #[error("{0} out of range")]
    LineOutOfRange(LineId),
    #[error("cell ({row}, {col}) has no specified resistive state")]
    UnspecifiedCell { row: usize, col: usize },
    #[error("state matrix is {got_rows}x{got_cols}, array is {rows}x{cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("read would apply {volts:.3} V across cell ({row}, {col}), limit {limit:.3} V")]
    DisturbViolation {
        row: usize,
        col: usize,
        volts: f64,
        limit: f64,
    },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LineKind {
    Sel,
    P,
    N,
}

impl LineKind {
    pub const ALL: [LineKind; 3] = [LineKind::Sel, LineKind::N, LineKind::P];

    pub fn as_str(self) -> &'static str {
        match self {
            LineKind::Sel => "SEL",
            LineKind::P => "P",
            LineKind::N => "N",
        }
    }
}

impl fmt::Display for LineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Number of decimal digits needed to print every index below `count`.
pub fn index_width(count: usize) -> usize {
    count.saturating_sub(1).max(1).to_string().len()
}

/// Zero-padded line name, e.g. `SEL007` in a 128-row array.
pub fn line_name(kind: LineKind, index: usize, count: usize) -> String {
    format!("{}{:0w$}", kind.as_str(), index, w = index_width(count))
}

/// How word bits are spread over the columns of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnMapping {
    /// Bit `k` of word `w` sits in column `k·2^X + w`.
    #[default]
    Grouped,
}

/// Validated array geometry and electrical operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    rows: usize,
    cols: usize,
    word_bits: usize,
    row_addr_bits: u32,
    col_sel_bits: u32,
    vdd: f64,
    v_read: f64,
    v_write_threshold: f64,
    t_write: f64,
    t_read: f64,
    mapping: ColumnMapping,
}

fn log2_exact(value: usize, what: &'static str) -> Result<u32, ArchError> {
    if value.is_power_of_two() {
        Ok(value.trailing_zeros())
    } else {
        Err(ArchError::NotPowerOfTwo { what, value })
    }
}

impl ArrayConfig {
    /// Derives `Y = log2(rows)` and `X = log2(cols / word_bits)` with default
    /// voltages and pulse widths.
    pub fn derive_geometry(rows: usize, cols: usize, word_bits: usize) -> Result<Self, ArchError> {
        if rows == 0 {
            return Err(ArchError::ZeroDimension("rows"));
        }
        if cols == 0 {
            return Err(ArchError::ZeroDimension("cols"));
        }
        if word_bits == 0 {
            return Err(ArchError::ZeroDimension("word_bits"));
        }
        if word_bits > 64 {
            return Err(ArchError::InvalidPlan(format!(
                "word_bits = {word_bits} exceeds 64"
            )));
        }
        let row_addr_bits = log2_exact(rows, "rows")?;
        if cols % word_bits != 0 {
            return Err(ArchError::NotPowerOfTwo {
                what: "cols / word_bits",
                value: cols / word_bits,
            });
        }
        let col_sel_bits = log2_exact(cols / word_bits, "cols / word_bits")?;
        Ok(Self {
            rows,
            cols,
            word_bits,
            row_addr_bits,
            col_sel_bits,
            vdd: DEFAULT_VDD,
            v_read: DEFAULT_V_READ,
            v_write_threshold: WRITE_THRESHOLD_FRACTION * DEFAULT_VDD,
            t_write: DEFAULT_T_WRITE,
            t_read: DEFAULT_T_READ,
            mapping: ColumnMapping::Grouped,
        })
    }

    /// Replaces the supply and read voltages; the write threshold tracks VDD.
    pub fn with_voltages(mut self, vdd: f64, v_read: f64) -> Result<Self, ArchError> {
        if !(v_read > 0.0 && v_read < READ_DISTURB_LIMIT) {
            return Err(ArchError::InvalidVoltage(format!(
                "v_read = {v_read} must lie in (0, {READ_DISTURB_LIMIT})"
            )));
        }
        if !(vdd.is_finite() && vdd > v_read) {
            return Err(ArchError::InvalidVoltage(format!(
                "vdd = {vdd} must exceed v_read = {v_read}"
            )));
        }
        self.vdd = vdd;
        self.v_read = v_read;
        self.v_write_threshold = WRITE_THRESHOLD_FRACTION * vdd;
        Ok(self)
    }

    pub fn with_write_pulse(mut self, t_write: f64) -> Result<Self, ArchError> {
        if !(t_write.is_finite() && t_write > 0.0) {
            return Err(ArchError::InvalidPlan(format!("t_write = {t_write}")));
        }
        self.t_write = t_write;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn word_bits(&self) -> usize {
        self.word_bits
    }
    pub fn row_addr_bits(&self) -> u32 {
        self.row_addr_bits
    }
    pub fn col_sel_bits(&self) -> u32 {
        self.col_sel_bits
    }
    pub fn vdd(&self) -> f64 {
        self.vdd
    }
    pub fn v_read(&self) -> f64 {
        self.v_read
    }
    pub fn v_write_threshold(&self) -> f64 {
        self.v_write_threshold
    }
    pub fn t_write(&self) -> f64 {
        self.t_write
    }
    pub fn t_read(&self) -> f64 {
        self.t_read
    }
    pub fn mapping(&self) -> ColumnMapping {
        self.mapping
    }

    /// Words per row, `2^X`.
    pub fn words_per_row(&self) -> usize {
        1 << self.col_sel_bits
    }

    /// Total addressable words, `2^(X+Y)`.
    pub fn word_count(&self) -> usize {
        self.rows * self.words_per_row()
    }

    pub fn line_count(&self, kind: LineKind) -> usize {
        match kind {
            LineKind::Sel => self.rows,
            LineKind::P | LineKind::N => self.cols,
        }
    }

    pub fn address(&self, row: usize, word_select: usize) -> Result<Address, ArchError> {
        if row >= self.rows {
            return Err(ArchError::RowOutOfRange {
                row,
                rows: self.rows,
            });
        }
        if word_select >= self.words_per_row() {
            return Err(ArchError::WordOutOfRange {
                word: word_select,
                words: self.words_per_row(),
            });
        }
        Ok(Address { row, word_select })
    }

    /// Splits a flat word address: high `Y` bits pick the row, low `X` bits
    /// the word within it.
    pub fn address_from_flat(&self, flat: usize) -> Result<Address, ArchError> {
        let x = self.col_sel_bits;
        self.address(flat >> x, flat & (self.words_per_row() - 1))
    }

    /// One-hot SEL vector for the addressed row.
    pub fn decode_row(&self, address: Address) -> Vec<bool> {
        assert!(address.row < self.rows, "row out of range");
        (0..self.rows).map(|i| i == address.row).collect()
    }

    /// Columns holding bits `0..b` of word `word_select`.
    pub fn select_word_columns(&self, word_select: usize) -> Vec<usize> {
        assert!(word_select < self.words_per_row(), "word select out of range");
        match self.mapping {
            ColumnMapping::Grouped => (0..self.word_bits)
                .map(|k| (k << self.col_sel_bits) + word_select)
                .collect(),
        }
    }

    pub fn line(&self, kind: LineKind, index: usize) -> Result<LineId, ArchError> {
        let id = LineId { kind, index };
        if index < self.line_count(kind) {
            Ok(id)
        } else {
            Err(ArchError::LineOutOfRange(id))
        }
    }

    /// Read plan: SEL high on the addressed row, `v_read` on the word's P
    /// lines, every N line grounded.
    pub fn plan_read(&self, address: Address) -> OperationPlan {
        let mut events = vec![LineEvent {
            time: 0.0,
            line: LineId::sel(address.row),
            voltage: self.vdd,
        }];
        events.extend(
            self.select_word_columns(address.word_select)
                .into_iter()
                .map(|col| LineEvent {
                    time: 0.0,
                    line: LineId::p(col),
                    voltage: self.v_read,
                }),
        );
        events.extend((0..self.cols).map(|col| LineEvent {
            time: 0.0,
            line: LineId::n(col),
            voltage: 0.0,
        }));
        OperationPlan {
            kind: OpKind::Read,
            target: address,
            data: None,
            events,
            duration: self.t_read,
        }
    }

    /// Write plan: SEL high on the addressed row; each bit drives its column
    /// to `N = vdd, P = 0` for H or `P = vdd, N = 0` for L.
    pub fn plan_write(&self, address: Address, word: u64) -> Result<OperationPlan, ArchError> {
        if self.word_bits < 64 && word >> self.word_bits != 0 {
            return Err(ArchError::DataOutOfRange {
                data: word,
                bits: self.word_bits,
            });
        }
        let mut events = vec![LineEvent {
            time: 0.0,
            line: LineId::sel(address.row),
            voltage: self.vdd,
        }];
        for (bit, col) in self
            .select_word_columns(address.word_select)
            .into_iter()
            .enumerate()
        {
            let (vp, vn) = match CellState::from_bit(word >> bit & 1 == 1) {
                CellState::High => (0.0, self.vdd),
                CellState::Low => (self.vdd, 0.0),
            };
            events.push(LineEvent {
                time: 0.0,
                line: LineId::p(col),
                voltage: vp,
            });
            events.push(LineEvent {
                time: 0.0,
                line: LineId::n(col),
                voltage: vn,
            });
        }
        Ok(OperationPlan {
            kind: OpKind::Write,
            target: address,
            data: Some(word),
            events,
            duration: self.t_write,
        })
    }
}

/// Row and word-select fields of a word address, validated against a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Address {
    row: usize,
    word_select: usize,
}

impl Address {
    pub fn row(&self) -> usize {
        self.row
    }
    pub fn word_select(&self) -> usize {
        self.word_select
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LineId {
    pub kind: LineKind,
    pub index: usize,
}

impl LineId {
    pub fn sel(index: usize) -> Self {
        Self {
            kind: LineKind::Sel,
            index,
        }
    }
    pub fn p(index: usize) -> Self {
        Self {
            kind: LineKind::P,
            index,
        }
    }
    pub fn n(index: usize) -> Self {
        Self {
            kind: LineKind::N,
            index,
        }
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineEvent {
    pub time: f64,
    pub line: LineId,
    pub voltage: f64,
}

/// Timed line-voltage events for one read or write.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationPlan {
    pub kind: OpKind,
    pub target: Address,
    pub data: Option<u64>,
    pub events: Vec<LineEvent>,
    pub duration: f64,
}

impl OperationPlan {
    /// Checks ordering, ranges, one-hot row selection and read-safe levels.
    pub fn validate(&self, config: &ArrayConfig) -> Result<(), ArchError> {
        self.validate_structure(config)?;
        if self.kind == OpKind::Read {
            for ev in &self.events {
                match ev.line.kind {
                    LineKind::P if ev.voltage > config.v_read() => {
                        return Err(ArchError::InvalidPlan(format!(
                            "read drives {} to {} V above v_read",
                            ev.line, ev.voltage
                        )))
                    }
                    LineKind::N if ev.voltage != 0.0 => {
                        return Err(ArchError::InvalidPlan(format!(
                            "read drives {} to {} V, N lines must be grounded",
                            ev.line, ev.voltage
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Ordering, ranges and one-hot row selection only.
    pub fn validate_structure(&self, config: &ArrayConfig) -> Result<(), ArchError> {
        let mut last = 0.0;
        for ev in &self.events {
            if !(ev.time >= last && ev.time.is_finite()) {
                return Err(ArchError::InvalidPlan(format!(
                    "event times must be sorted and non-negative (at {})",
                    ev.line
                )));
            }
            last = ev.time;
            config.line(ev.line.kind, ev.line.index)?;
        }
        if self.duration < last {
            return Err(ArchError::InvalidPlan(format!(
                "duration {} precedes last event at {last}",
                self.duration
            )));
        }
        let high_sel: std::collections::BTreeSet<usize> = self
            .events
            .iter()
            .filter(|e| e.line.kind == LineKind::Sel && e.voltage >= 0.5 * config.vdd())
            .map(|e| e.line.index)
            .collect();
        if high_sel.len() != 1 {
            return Err(ArchError::InvalidPlan(format!(
                "{} SEL lines driven high, expected exactly one",
                high_sel.len()
            )));
        }
        Ok(())
    }
}

/// Plain-text event trace, one `time line voltage` line per event. Plans
/// run back to back, so times are offset by the preceding durations.
pub fn event_trace(plans: &[OperationPlan]) -> String {
    let mut out = String::new();
    let mut offset = 0.0;
    for plan in plans {
        for ev in &plan.events {
            out.push_str(&format!(
                "{:.6e} {} {:.6}\n",
                offset + ev.time,
                ev.line,
                ev.voltage
            ));
        }
        offset += plan.duration;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    High,
    Low,
}

impl CellState {
    pub fn from_bit(bit: bool) -> Self {
        match (bit, ONE_STATE) {
            (true, s) => s,
            (false, CellState::Low) => CellState::High,
            (false, CellState::High) => CellState::Low,
        }
    }

    pub fn bit(self) -> bool {
        self == ONE_STATE
    }
}

/// Resistive state of every cell, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStateMatrix {
    rows: usize,
    cols: usize,
    states: Vec<CellState>,
    r_high: f64,
    r_low: f64,
}

impl CellStateMatrix {
    pub fn uniform(rows: usize, cols: usize, state: CellState) -> Self {
        Self {
            rows,
            cols,
            states: vec![state; rows * cols],
            r_high: DEFAULT_R_HIGH,
            r_low: DEFAULT_R_LOW,
        }
    }

    /// Builds a matrix from possibly-unknown states; any unknown cell is
    /// rejected.
    pub fn from_partial(
        rows: usize,
        cols: usize,
        states: &[Option<CellState>],
    ) -> Result<Self, ArchError> {
        if states.len() != rows * cols {
            return Err(ArchError::ShapeMismatch {
                rows,
                cols,
                got_rows: states.len() / cols.max(1),
                got_cols: cols,
            });
        }
        let states = states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.ok_or(ArchError::UnspecifiedCell {
                    row: i / cols,
                    col: i % cols,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            rows,
            cols,
            states,
            r_high: DEFAULT_R_HIGH,
            r_low: DEFAULT_R_LOW,
        })
    }

    pub fn with_resistances(mut self, r_high: f64, r_low: f64) -> Result<Self, ArchError> {
        if !(r_low > 0.0 && r_high > r_low && r_high.is_finite()) {
            return Err(ArchError::InvalidPlan(format!(
                "need r_high > r_low > 0, got {r_high} / {r_low}"
            )));
        }
        self.r_high = r_high;
        self.r_low = r_low;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn r_high(&self) -> f64 {
        self.r_high
    }
    pub fn r_low(&self) -> f64 {
        self.r_low
    }

    pub fn get(&self, row: usize, col: usize) -> CellState {
        self.states[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, state: CellState) {
        self.states[row * self.cols + col] = state;
    }

    pub fn resistance(&self, row: usize, col: usize) -> f64 {
        match self.get(row, col) {
            CellState::High => self.r_high,
            CellState::Low => self.r_low,
        }
    }

    /// SHA-256 over the dimensions and states, as lowercase hex.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.rows as u64).to_le_bytes());
        h.update((self.cols as u64).to_le_bytes());
        h.update(
            self.states
                .iter()
                .map(|s| match s {
                    CellState::High => b'H',
                    CellState::Low => b'L',
                })
                .collect::<Vec<u8>>(),
        );
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    pub final_state: CellStateMatrix,
    /// One word per read plan, in plan order.
    pub reads: Vec<u64>,
}

/// Runs plans against a bistable cell model.
///
/// A cell switches only while its SEL line is high and `|V_P - V_N|`
/// reaches the write threshold: positive polarity sets L, negative sets H.
/// Undriven lines sit at 0 V. Reads sample the selected word after the
/// last event and fail if any selected cell sees more than `v_read`.
pub fn simulate_protocol(
    config: &ArrayConfig,
    initial: &CellStateMatrix,
    plans: &[OperationPlan],
) -> Result<ProtocolOutcome, ArchError> {
    if initial.rows != config.rows() || initial.cols != config.cols() {
        return Err(ArchError::ShapeMismatch {
            rows: config.rows(),
            cols: config.cols(),
            got_rows: initial.rows,
            got_cols: initial.cols,
        });
    }
    let mut state = initial.clone();
    let mut reads = Vec::new();
    let half_vdd = 0.5 * config.vdd();
    for plan in plans {
        plan.validate_structure(config)?;
        let mut sel = vec![0.0; config.rows()];
        let mut vp = vec![0.0; config.cols()];
        let mut vn = vec![0.0; config.cols()];
        let mut i = 0;
        while i < plan.events.len() {
            let t = plan.events[i].time;
            while i < plan.events.len() && plan.events[i].time == t {
                let ev = plan.events[i];
                match ev.line.kind {
                    LineKind::Sel => sel[ev.line.index] = ev.voltage,
                    LineKind::P => vp[ev.line.index] = ev.voltage,
                    LineKind::N => vn[ev.line.index] = ev.voltage,
                }
                i += 1;
            }
            for (row, _) in sel.iter().enumerate().filter(|(_, v)| **v >= half_vdd) {
                for col in 0..config.cols() {
                    let dv = vp[col] - vn[col];
                    if plan.kind == OpKind::Read && dv.abs() > config.v_read() {
                        return Err(ArchError::DisturbViolation {
                            row,
                            col,
                            volts: dv.abs(),
                            limit: config.v_read(),
                        });
                    }
                    if dv.abs() >= config.v_write_threshold() {
                        let next = if dv > 0.0 {
                            CellState::Low
                        } else {
                            CellState::High
                        };
                        state.set(row, col, next);
                    }
                }
            }
        }
        if plan.kind == OpKind::Read {
            let row = plan.target.row();
            let word = config
                .select_word_columns(plan.target.word_select())
                .into_iter()
                .enumerate()
                .fold(0u64, |acc, (bit, col)| {
                    acc | (u64::from(state.get(row, col).bit()) << bit)
                });
            reads.push(word);
        }
    }
    Ok(ProtocolOutcome {
        final_state: state,
        reads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_geometry_examples() {
        let c = ArrayConfig::derive_geometry(128, 128, 8).unwrap();
        assert_eq!((c.row_addr_bits(), c.col_sel_bits()), (7, 4));
        let c = ArrayConfig::derive_geometry(4, 4, 1).unwrap();
        assert_eq!((c.row_addr_bits(), c.col_sel_bits()), (2, 2));
        assert!(matches!(
            ArrayConfig::derive_geometry(100, 128, 8),
            Err(ArchError::NotPowerOfTwo { what: "rows", .. })
        ));
        assert!(matches!(
            ArrayConfig::derive_geometry(8, 24, 8),
            Err(ArchError::NotPowerOfTwo { .. })
        ));
        assert!(matches!(
            ArrayConfig::derive_geometry(8, 20, 8),
            Err(ArchError::NotPowerOfTwo { .. })
        ));
        assert!(matches!(
            ArrayConfig::derive_geometry(0, 8, 1),
            Err(ArchError::ZeroDimension("rows"))
        ));
    }

    #[test]
    fn voltage_bounds() {
        let c = ArrayConfig::derive_geometry(4, 4, 1).unwrap();
        assert!(c.clone().with_voltages(1.8, 0.5).is_err());
        assert!(c.clone().with_voltages(1.8, 0.0).is_err());
        assert!(c.clone().with_voltages(0.1, 0.2).is_err());
        let c = c.with_voltages(3.3, 0.3).unwrap();
        assert!((c.v_write_threshold() - 2.97).abs() < 1e-12);
    }

    #[test]
    fn decode_row_examples() {
        let c = ArrayConfig::derive_geometry(4, 4, 1).unwrap();
        assert_eq!(
            c.decode_row(c.address(0b10, 0).unwrap()),
            vec![false, false, true, false]
        );
        assert_eq!(
            c.decode_row(c.address(0, 0).unwrap()),
            vec![true, false, false, false]
        );
    }

    #[test]
    fn decode_row_is_one_hot_exhaustive() {
        for y in 0..=8 {
            let c = ArrayConfig::derive_geometry(1 << y, 1, 1).unwrap();
            for row in 0..c.rows() {
                let v = c.decode_row(c.address(row, 0).unwrap());
                assert_eq!(v.iter().filter(|b| **b).count(), 1);
                assert!(v[row]);
            }
        }
    }

    #[test]
    fn word_columns() {
        let c = ArrayConfig::derive_geometry(128, 128, 8).unwrap();
        assert_eq!(c.select_word_columns(0), vec![0, 16, 32, 48, 64, 80, 96, 112]);
        let c = ArrayConfig::derive_geometry(4, 4, 1).unwrap();
        assert_eq!(c.select_word_columns(3), vec![3]);
        let c = ArrayConfig::derive_geometry(2, 4, 2).unwrap();
        assert_eq!(c.select_word_columns(1), vec![1, 3]);
    }

    #[test]
    fn word_columns_one_per_group() {
        let c = ArrayConfig::derive_geometry(2, 64, 4).unwrap();
        let group = c.words_per_row();
        let mut seen = vec![false; c.cols()];
        for w in 0..group {
            let cols = c.select_word_columns(w);
            assert_eq!(cols.len(), c.word_bits());
            for (k, col) in cols.into_iter().enumerate() {
                assert_eq!(col / group, k);
                assert!(!seen[col]);
                seen[col] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn read_plan_drives_expected_lines() {
        let c = ArrayConfig::derive_geometry(4, 4, 1).unwrap();
        let plan = c.plan_read(c.address(1, 2).unwrap());
        plan.validate(&c).unwrap();
        let has = |line: LineId, v: f64| plan.events.iter().any(|e| e.line == line && e.voltage == v);
        assert!(has(LineId::sel(1), c.vdd()));
        assert!(has(LineId::p(2), c.v_read()));
        for n in 0..4 {
            assert!(has(LineId::n(n), 0.0));
        }
        assert_eq!(plan.events.len(), 1 + c.word_bits() + c.cols());
        let max_p = plan
            .events
            .iter()
            .filter(|e| e.line.kind == LineKind::P)
            .map(|e| e.voltage)
            .fold(0.0, f64::max);
        assert!(max_p < READ_DISTURB_LIMIT);
    }

    #[test]
    fn write_polarity() {
        let c = ArrayConfig::derive_geometry(2, 2, 2).unwrap();
        let a = c.address(0, 0).unwrap();
        let h_word = if CellState::from_bit(true) == CellState::High { 0b01 } else { 0b10 };
        let plan = c.plan_write(a, h_word).unwrap();
        plan.validate(&c).unwrap();
        let v = |line| plan.events.iter().find(|e| e.line == line).unwrap().voltage;
        // column 0 holds H, column 1 holds L
        assert_eq!((v(LineId::n(0)), v(LineId::p(0))), (c.vdd(), 0.0));
        assert_eq!((v(LineId::p(1)), v(LineId::n(1))), (c.vdd(), 0.0));
        let sel_high = plan
            .events
            .iter()
            .filter(|e| e.line.kind == LineKind::Sel && e.voltage > 0.0)
            .count();
        assert_eq!(sel_high, 1);
        assert!(c.plan_write(a, 0b100).is_err());
    }

    #[test]
    fn figure_sequence_on_one_cell() {
        let c = ArrayConfig::derive_geometry(1, 1, 1).unwrap();
        let a = c.address(0, 0).unwrap();
        let l = u64::from(CellState::Low.bit());
        let h = u64::from(CellState::High.bit());
        for start in [CellState::High, CellState::Low] {
            let init = CellStateMatrix::uniform(1, 1, start);
            let plans = vec![
                c.plan_write(a, l).unwrap(),
                c.plan_read(a),
                c.plan_write(a, h).unwrap(),
            ];
            let out = simulate_protocol(&c, &init, &plans).unwrap();
            assert_eq!(out.reads, vec![l]);
            assert_eq!(out.final_state.get(0, 0), CellState::High);
        }
    }

    #[test]
    fn reads_do_not_mutate() {
        let c = ArrayConfig::derive_geometry(4, 8, 2).unwrap();
        let mut init = CellStateMatrix::uniform(4, 8, CellState::High);
        init.set(2, 5, CellState::Low);
        let plans: Vec<_> = (0..c.word_count())
            .map(|f| c.plan_read(c.address_from_flat(f).unwrap()))
            .collect();
        let out = simulate_protocol(&c, &init, &plans).unwrap();
        assert_eq!(out.final_state, init);
        assert_eq!(out.final_state.digest(), init.digest());
    }

    #[test]
    fn disturbing_read_is_rejected() {
        let c = ArrayConfig::derive_geometry(2, 2, 1).unwrap();
        let a = c.address(0, 1).unwrap();
        let mut plan = c.plan_read(a);
        for ev in plan.events.iter_mut() {
            if ev.line == LineId::p(1) {
                ev.voltage = 0.3;
            }
        }
        assert!(plan.validate(&c).is_err());
        let init = CellStateMatrix::uniform(2, 2, CellState::High);
        let err = simulate_protocol(&c, &init, &[plan]).unwrap_err();
        assert!(matches!(
            err,
            ArchError::DisturbViolation { row: 0, col: 1, .. }
        ));
    }

    #[test]
    fn unknown_initial_state_rejected() {
        let cells = [Some(CellState::High), None, Some(CellState::Low), Some(CellState::Low)];
        let err = CellStateMatrix::from_partial(2, 2, &cells).unwrap_err();
        assert_eq!(err, ArchError::UnspecifiedCell { row: 0, col: 1 });
        let full: Vec<_> = cells.iter().map(|c| c.or(Some(CellState::High))).collect();
        assert!(CellStateMatrix::from_partial(2, 2, &full).is_ok());
    }

    #[test]
    fn line_names_are_padded() {
        assert_eq!(line_name(LineKind::Sel, 7, 128), "SEL007");
        assert_eq!(line_name(LineKind::P, 0, 1), "P0");
        assert_eq!(line_name(LineKind::N, 3, 4), "N3");
        assert_eq!(line_name(LineKind::N, 3, 11), "N03");
    }

    #[test]
    fn trace_offsets_plans() {
        let c = ArrayConfig::derive_geometry(1, 1, 1).unwrap();
        let a = c.address(0, 0).unwrap();
        let trace = event_trace(&[c.plan_write(a, 1).unwrap(), c.plan_read(a)]);
        let lines: Vec<_> = trace.lines().collect();
        assert_eq!(lines.len(), 3 + 3);
        assert_eq!(lines[0], "0.000000e0 SEL0 1.800000");
        assert!(lines[3].starts_with("1.000000e-8 SEL0"));
    }
}
