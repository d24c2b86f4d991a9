//! trojan-forge: automated board-level hardware Trojan benchmark generation.
//!
//! The tool ingests KiCad-style PCB netlists, picks rarely-active nets from
//! simulation traces, instantiates discrete-logic trigger and payload
//! circuits into the board's component–net graph, verifies the result, and
//! emits benchmark suites with machine-readable ground-truth manifests.

pub mod activity;
pub mod boardgen;
pub mod cli;
pub mod graph;
pub mod insert;
pub mod netlist;
pub mod power;
pub mod seed;
pub mod sexpr;
pub mod sim;
pub mod suite;
pub mod templates;
pub mod values;
pub mod verify;
