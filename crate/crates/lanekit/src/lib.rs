//! IO, synthetic scenarios, parallel evaluation and the command line on top
//! of [`lanekit_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod format;
pub mod losses;
pub mod report;
pub mod synth;

pub use lanekit_core as core;
