// SPDX-License-Identifier: Apache-2.0

//! Per-cell line parasitics and distributed RC ladders.
//!
//! Line capacitance (self plus coupling) and resistance grow linearly with
//! the number of cells on the line. Rates are stored on a dyadic grid with a
//! 32-bit mantissa, so `n · rate` and the running sums along a ladder are
//! exact in `f64` for any realistic line length. That keeps totals, ladder
//! sums and least-squares slopes bit-consistent with each other.

use crate::arch::LineKind;
use crate::kv::{KvError, KvMap};

pub const DEFAULT_C_SEL: f64 = 5.83e-15;
pub const DEFAULT_C_N: f64 = 3.31e-15;
pub const DEFAULT_C_P: f64 = 2.48e-15;
pub const DEFAULT_R_SEL: f64 = 1.28;
pub const DEFAULT_R_N: f64 = 0.14;
pub const DEFAULT_R_P: f64 = 0.14;

const RATE_KEYS: [&str; 7] = [
    "c_sel_f_per_cell",
    "c_n_f_per_cell",
    "c_p_f_per_cell",
    "r_sel_ohm_per_cell",
    "r_n_ohm_per_cell",
    "r_p_ohm_per_cell",
    "c_gate_f_per_cell",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParasiticsError {
    #[error("invalid rates: {0}")]
    InvalidRates(String),
    #[error("a line needs at least one cell")]
    EmptyLine,
    #[error(transparent)]
    File(#[from] KvError),
}

/// Rounds to the nearest value with a 32-bit mantissa.
fn quantize(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let exp = x.abs().log2().floor() as i32;
    let scale = 2f64.powi(31 - exp);
    (x * scale).round() / scale
}

/// Per-cell capacitance and resistance for each line kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ParasiticRates {
    c_sel: f64,
    c_n: f64,
    c_p: f64,
    r_sel: f64,
    r_n: f64,
    r_p: f64,
    /// Optional access-gate loading added to SEL, default 0.
    c_gate: f64,
}

impl Default for ParasiticRates {
    fn default() -> Self {
        Self::new(
            [DEFAULT_C_SEL, DEFAULT_C_N, DEFAULT_C_P],
            [DEFAULT_R_SEL, DEFAULT_R_N, DEFAULT_R_P],
        )
        .expect("default rates are valid")
    }
}

impl ParasiticRates {
    /// Rates ordered `[SEL, N, P]`.
    pub fn new(c: [f64; 3], r: [f64; 3]) -> Result<Self, ParasiticsError> {
        let rates = Self {
            c_sel: quantize(c[0]),
            c_n: quantize(c[1]),
            c_p: quantize(c[2]),
            r_sel: quantize(r[0]),
            r_n: quantize(r[1]),
            r_p: quantize(r[2]),
            c_gate: 0.0,
        };
        rates.validate()?;
        Ok(rates)
    }

    pub fn with_gate_capacitance(mut self, c_gate: f64) -> Result<Self, ParasiticsError> {
        if !(c_gate >= 0.0 && c_gate.is_finite()) {
            return Err(ParasiticsError::InvalidRates(format!(
                "gate capacitance {c_gate} must be >= 0"
            )));
        }
        self.c_gate = quantize(c_gate);
        Ok(self)
    }

    fn validate(&self) -> Result<(), ParasiticsError> {
        let all = [self.c_sel, self.c_n, self.c_p, self.r_sel, self.r_n, self.r_p];
        if !all.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(ParasiticsError::InvalidRates(
                "all rates must be finite and positive".into(),
            ));
        }
        if !(self.c_sel > self.c_n && self.c_n > self.c_p) {
            return Err(ParasiticsError::InvalidRates(format!(
                "expected C_SEL > C_N > C_P, got {:e} / {:e} / {:e}",
                self.c_sel, self.c_n, self.c_p
            )));
        }
        if self.r_n != self.r_p {
            return Err(ParasiticsError::InvalidRates(format!(
                "N and P lines share a shape, so R_N must equal R_P ({} vs {})",
                self.r_n, self.r_p
            )));
        }
        Ok(())
    }

    /// Loads a `key=value` rates file; missing keys keep their defaults.
    pub fn from_kv(kv: &KvMap) -> Result<Self, ParasiticsError> {
        kv.check_keys(&RATE_KEYS)?;
        let d = Self::default();
        let get = |k: &str, dv: f64| kv.get_f64(k).map(|v| v.unwrap_or(dv));
        let rates = Self::new(
            [
                get(RATE_KEYS[0], DEFAULT_C_SEL)?,
                get(RATE_KEYS[1], DEFAULT_C_N)?,
                get(RATE_KEYS[2], DEFAULT_C_P)?,
            ],
            [
                get(RATE_KEYS[3], DEFAULT_R_SEL)?,
                get(RATE_KEYS[4], DEFAULT_R_N)?,
                get(RATE_KEYS[5], DEFAULT_R_P)?,
            ],
        )?;
        rates.with_gate_capacitance(get(RATE_KEYS[6], d.c_gate)?)
    }

    pub fn parse(text: &str) -> Result<Self, ParasiticsError> {
        Self::from_kv(&KvMap::parse(text)?)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::default();
        let values = [
            self.c_sel, self.c_n, self.c_p, self.r_sel, self.r_n, self.r_p, self.c_gate,
        ];
        for (k, v) in RATE_KEYS.iter().zip(values) {
            kv.insert(*k, format!("{v:e}"));
        }
        kv
    }

    /// Capacitance each cell adds to a line, gate loading included for SEL.
    pub fn c_per_cell(&self, kind: LineKind) -> f64 {
        match kind {
            LineKind::Sel => quantize(self.c_sel + self.c_gate),
            LineKind::N => self.c_n,
            LineKind::P => self.c_p,
        }
    }

    pub fn r_per_cell(&self, kind: LineKind) -> f64 {
        match kind {
            LineKind::Sel => self.r_sel,
            LineKind::N => self.r_n,
            LineKind::P => self.r_p,
        }
    }
}

/// Total capacitance of a line spanning `n_cells` cells.
pub fn line_capacitance(kind: LineKind, n_cells: usize, rates: &ParasiticRates) -> f64 {
    n_cells as f64 * rates.c_per_cell(kind)
}

/// Total series resistance of a line spanning `n_cells` cells.
pub fn line_resistance(kind: LineKind, n_cells: usize, rates: &ParasiticRates) -> f64 {
    n_cells as f64 * rates.r_per_cell(kind)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderSegment {
    pub series_r: f64,
    pub shunt_c: f64,
}

/// RC ladder from the driven node (index 0) to the far node (index
/// `segments.len()`). Segment `i` is a series resistor from node `i` to
/// node `i + 1` followed by a shunt capacitor at node `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RcLadder {
    segments: Vec<LadderSegment>,
}

impl RcLadder {
    pub fn new(segments: Vec<LadderSegment>) -> Result<Self, ParasiticsError> {
        if segments.is_empty() {
            return Err(ParasiticsError::EmptyLine);
        }
        if segments
            .iter()
            .any(|s| !(s.series_r >= 0.0 && s.shunt_c >= 0.0 && s.series_r.is_finite() && s.shunt_c.is_finite()))
        {
            return Err(ParasiticsError::InvalidRates(
                "ladder values must be finite and non-negative".into(),
            ));
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[LadderSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn source_node(&self) -> usize {
        0
    }

    pub fn far_node(&self) -> usize {
        self.segments.len()
    }

    pub fn total_r(&self) -> f64 {
        self.segments.iter().map(|s| s.series_r).sum()
    }

    pub fn total_c(&self) -> f64 {
        self.segments.iter().map(|s| s.shunt_c).sum()
    }
}

/// Uniform ladder with one segment per cell.
pub fn build_ladder(
    kind: LineKind,
    n_cells: usize,
    rates: &ParasiticRates,
) -> Result<RcLadder, ParasiticsError> {
    if n_cells == 0 {
        return Err(ParasiticsError::EmptyLine);
    }
    let seg = LadderSegment {
        series_r: rates.r_per_cell(kind),
        shunt_c: rates.c_per_cell(kind),
    };
    RcLadder::new(vec![seg; n_cells])
}

/// Elmore delay at the far node: `Σ_i r_i · Σ_{j≥i} c_j`.
pub fn elmore_delay(ladder: &RcLadder) -> f64 {
    let mut downstream = 0.0;
    let mut delay = 0.0;
    for seg in ladder.segments.iter().rev() {
        downstream += seg.shunt_c;
        delay += seg.series_r * downstream;
    }
    delay
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn capacitance_examples() {
        let r = ParasiticRates::default();
        assert!(close(line_capacitance(LineKind::Sel, 128, &r), 746.24e-15, 1e-9));
        assert_eq!(line_capacitance(LineKind::P, 0, &r), 0.0);
        assert!(close(line_capacitance(LineKind::N, 100, &r), 331e-15, 1e-9));
    }

    #[test]
    fn resistance_examples() {
        let r = ParasiticRates::default();
        assert!(close(line_resistance(LineKind::Sel, 100, &r), 128.0, 1e-9));
        assert!(close(line_resistance(LineKind::N, 1, &r), 0.14, 1e-9));
        assert_eq!(line_resistance(LineKind::P, 0, &r), 0.0);
    }

    #[test]
    fn ladder_examples() {
        let r = ParasiticRates::default();
        let l = build_ladder(LineKind::Sel, 3, &r).unwrap();
        assert_eq!(l.len(), 3);
        for s in l.segments() {
            assert!(close(s.series_r, 1.28, 1e-9) && close(s.shunt_c, 5.83e-15, 1e-9));
        }
        let l = build_ladder(LineKind::P, 1, &r).unwrap();
        assert!(close(l.segments()[0].series_r, 0.14, 1e-9));
        assert!(close(l.segments()[0].shunt_c, 2.48e-15, 1e-9));
        assert_eq!(build_ladder(LineKind::N, 0, &r), Err(ParasiticsError::EmptyLine));
    }

    #[test]
    fn ordering_with_defaults() {
        let r = ParasiticRates::default();
        for n in [1, 7, 128] {
            let c = |k| line_capacitance(k, n, &r);
            let res = |k| line_resistance(k, n, &r);
            assert!(c(LineKind::Sel) > c(LineKind::N) && c(LineKind::N) > c(LineKind::P));
            assert!(res(LineKind::Sel) > res(LineKind::N));
            assert_eq!(res(LineKind::N), res(LineKind::P));
        }
    }

    #[test]
    fn invalid_rates_rejected() {
        assert!(ParasiticRates::new([1e-15, 2e-15, 0.5e-15], [1.0, 0.1, 0.1]).is_err());
        assert!(ParasiticRates::new([3e-15, 2e-15, 1e-15], [1.0, 0.1, 0.2]).is_err());
        assert!(ParasiticRates::new([3e-15, 2e-15, -1e-15], [1.0, 0.1, 0.1]).is_err());
    }

    #[test]
    fn elmore_examples() {
        let seg = LadderSegment {
            series_r: 1.0,
            shunt_c: 1.0,
        };
        assert_eq!(elmore_delay(&RcLadder::new(vec![seg; 2]).unwrap()), 3.0);
        let one = RcLadder::new(vec![LadderSegment {
            series_r: 2.5,
            shunt_c: 4.0,
        }])
        .unwrap();
        assert_eq!(elmore_delay(&one), 10.0);
    }

    #[test]
    fn elmore_uniform_closed_form() {
        let r = ParasiticRates::default();
        let (rr, cc) = (r.r_per_cell(LineKind::N), r.c_per_cell(LineKind::N));
        for n in 1..=1000usize {
            let ladder = build_ladder(LineKind::N, n, &r).unwrap();
            // independent double loop over (i, j>=i)
            let mut brute = 0.0;
            for i in 0..n {
                for _ in i..n {
                    brute += rr * cc;
                }
            }
            let closed = rr * cc * (n * (n + 1)) as f64 / 2.0;
            assert!(close(elmore_delay(&ladder), closed, 1e-12), "n={n}");
            assert!(close(brute, closed, 1e-9), "n={n}");
        }
    }

    #[test]
    fn elmore_is_quadratic() {
        let r = ParasiticRates::default();
        for n in [64usize, 128, 256, 512] {
            let a = elmore_delay(&build_ladder(LineKind::Sel, n, &r).unwrap());
            let b = elmore_delay(&build_ladder(LineKind::Sel, 2 * n, &r).unwrap());
            assert!((b / a - 4.0).abs() / 4.0 < 0.05);
        }
    }

    #[test]
    fn rates_file_round_trip() {
        let r = ParasiticRates::default();
        let back = ParasiticRates::from_kv(&r.to_kv()).unwrap();
        assert_eq!(back, r);
        let custom = ParasiticRates::parse("c_sel_f_per_cell=6e-15\nc_gate_f_per_cell=1e-15\n").unwrap();
        assert!(close(custom.c_per_cell(LineKind::Sel), 7e-15, 1e-9));
        assert!(ParasiticRates::parse("bogus=1").is_err());
    }

    proptest! {
        #[test]
        fn linear_in_cell_count(a in 0usize..100_000, b in 0usize..100_000, k in 0usize..3) {
            let kind = LineKind::ALL[k];
            let r = ParasiticRates::default();
            prop_assert_eq!(
                line_capacitance(kind, a + b, &r),
                line_capacitance(kind, a, &r) + line_capacitance(kind, b, &r)
            );
            prop_assert_eq!(
                line_resistance(kind, a + b, &r),
                line_resistance(kind, a, &r) + line_resistance(kind, b, &r)
            );
        }

        #[test]
        fn ladder_totals_match_line_totals(n in 1usize..5000, k in 0usize..3) {
            let kind = LineKind::ALL[k];
            let r = ParasiticRates::default();
            let l = build_ladder(kind, n, &r).unwrap();
            prop_assert_eq!(l.total_r(), line_resistance(kind, n, &r));
            prop_assert_eq!(l.total_c(), line_capacitance(kind, n, &r));
        }

        #[test]
        fn arbitrary_rates_stay_linear(c in 1e-16f64..1e-13, r in 1e-3f64..10.0, a in 0usize..50_000, b in 0usize..50_000) {
            let rates = ParasiticRates::new([3.0 * c, 2.0 * c, c], [r, r, r]).unwrap();
            prop_assert_eq!(
                line_capacitance(LineKind::P, a + b, &rates),
                line_capacitance(LineKind::P, a, &rates) + line_capacitance(LineKind::P, b, &rates)
            );
        }
    }
}
