//! Simulation and diagnostics for closed loops between a decision system and
//! the people it decides about.
//!
//! - [`markov`]: Markov systems, graph conditions and trajectory diagnostics.
//! - [`closed_loop`]: stochastic users, filters and policies in feedback.
//! - [`fairness`]: equal-treatment and equal-impact checks, default rates.
//! - [`credit`]: the mortgage-lending case study.
//! - [`io`]: configuration, result files and the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod closed_loop;
pub mod credit;
pub mod error;
pub mod fairness;
pub mod io;
pub mod markov;
pub mod numerics;

pub use error::{Error, Result};
