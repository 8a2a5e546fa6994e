// SPDX-License-Identifier: Apache-2.0

//! Generator, verifier and characterizer for M×N 1T1R resistive-RAM arrays.
//!
//! The flow mirrors a classic memory compiler: [`arch`] derives the array
//! geometry and read/write plans, [`netlist`] and [`layout`] produce the
//! schematic and physical views, [`verify`] runs native DRC/LVS on them,
//! and [`parasitics`], [`transient`] and [`report`] characterize line
//! loading and worst-case settling.

pub mod arch;
pub mod kv;
pub mod layout;
pub mod netlist;
pub mod parasitics;
pub mod report;
pub mod transient;
pub mod verify;

pub use arch::{ArrayConfig, LineKind};
