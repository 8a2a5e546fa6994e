// SPDX-License-Identifier: Apache-2.0

//! Read/write scripts: `write <addr> <hexword>` and `read <addr>`, one per
//! line, `#` comments. Addresses are decimal or `0x` hex flat word
//! addresses.

use std::fmt::Write as _;

use rramc_core::arch::{simulate_protocol, ArrayConfig, CellState, CellStateMatrix, OperationPlan};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptOp {
    Write { addr: usize, word: u64 },
    Read { addr: usize },
}

fn parse_addr(s: &str) -> Option<usize> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => usize::from_str_radix(h, 16).ok(),
        None => s.parse().ok(),
    }
}

fn parse_word(s: &str) -> Option<u64> {
    let h = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    u64::from_str_radix(h, 16).ok()
}

/// Parses and range-checks a script against `config`.
pub fn parse_script(text: &str, config: &ArrayConfig) -> Result<Vec<ScriptOp>, CliError> {
    let mut ops = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| CliError::Script { line, message };
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        let addr_of = |s: &str| {
            let a = parse_addr(s).ok_or_else(|| err(format!("bad address `{s}`")))?;
            if a >= config.word_count() {
                return Err(err(format!(
                    "address {a} out of range for {} words",
                    config.word_count()
                )));
            }
            Ok(a)
        };
        let op = match fields.as_slice() {
            ["write", a, w] => {
                let word = parse_word(w).ok_or_else(|| err(format!("bad hex word `{w}`")))?;
                let bits = config.word_bits();
                if bits < 64 && word >> bits != 0 {
                    return Err(err(format!("word {word:#x} does not fit in {bits} bits")));
                }
                ScriptOp::Write {
                    addr: addr_of(a)?,
                    word,
                }
            }
            ["read", a] => ScriptOp::Read { addr: addr_of(a)? },
            _ => return Err(err(format!("expected `write <addr> <hexword>` or `read <addr>`, got `{body}`"))),
        };
        ops.push(op);
    }
    Ok(ops)
}

/// Operation plans for `ops`, in order.
pub fn plan_script(ops: &[ScriptOp], config: &ArrayConfig) -> Result<Vec<OperationPlan>, CliError> {
    ops.iter()
        .map(|op| {
            let addr = match op {
                ScriptOp::Write { addr, .. } | ScriptOp::Read { addr } => *addr,
            };
            let a = config.address_from_flat(addr).map_err(CliError::generation)?;
            match op {
                ScriptOp::Write { word, .. } => config.plan_write(a, *word).map_err(CliError::generation),
                ScriptOp::Read { .. } => Ok(config.plan_read(a)),
            }
        })
        .collect()
}

/// Runs `ops` from an all-`0` array and renders the trace.
pub fn run_script(ops: &[ScriptOp], config: &ArrayConfig) -> Result<String, CliError> {
    let plans = plan_script(ops, config)?;
    let zero = CellState::from_bit(false);
    let initial = CellStateMatrix::uniform(config.rows(), config.cols(), zero);
    let outcome = simulate_protocol(config, &initial, &plans).map_err(CliError::generation)?;
    let digits = config.word_bits().div_ceil(4).max(1);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# rramc protocol trace rows={} cols={} word_bits={}",
        config.rows(),
        config.cols(),
        config.word_bits()
    );
    let _ = writeln!(out, "initial_digest {}", initial.digest());
    let mut reads = outcome.reads.iter();
    for op in ops {
        match op {
            ScriptOp::Write { addr, word } => {
                let _ = writeln!(out, "write {addr} 0x{word:0digits$x}");
            }
            ScriptOp::Read { addr } => {
                let word = reads.next().copied().unwrap_or_default();
                let _ = writeln!(out, "read {addr} 0x{word:0digits$x}");
            }
        }
    }
    let _ = writeln!(out, "final_digest {}", outcome.final_state.digest());
    Ok(out)
}
