//! Capacity bounds for deletion-type channels.
//!
//! This crate computes rigorous upper and lower bounds on the capacity of the
//! binary deletion channel (BDC) and the Poisson repeat channel (PRC):
//!
//! - **Upper bounds** come from the fixed-length subsequence channels
//!   `W(n, k)` (n input bits, a uniformly random k-bit subsequence as output).
//!   Three Blahut-Arimoto engines ([`baa`]) bound their capacities `C(n, k)`;
//!   [`tables`] fills the unreachable entries with combination inequalities
//!   and folds a full table into a bound curve over the deletion probability.
//! - **Lower bounds** come from run-length-distribution codes ([`repetition`]
//!   evaluates the rigorous rate bound for a given distribution) together
//!   with a heuristic optimizer ([`heuristic`]) that searches for good
//!   distributions via cost-constrained Blahut-Arimoto inner solves and
//!   basin hopping over its two external parameters.
//!
//! Memory is the binding constraint at scale, so the transition matrices are
//! never materialized unless asked for: [`bitstring`] provides an exact
//! integer-count transition oracle backed by a half-length embedding cache,
//! and [`sparse`] a compressed column format with row companions for the
//! near-diagonal regime.

#![forbid(unsafe_code)]

#[cfg(not(target_pointer_width = "64"))]
compile_error!("index arithmetic assumes a 64-bit target");

pub mod baa;
pub mod bitstring;
pub mod error;
pub mod heuristic;
pub mod repetition;
pub mod sparse;
pub mod tables;
pub mod util;

pub use baa::{BaaConfig, BaaResult, ProbVector};
pub use bitstring::{BitChannelSpec, BitString, EmbeddingCache, TransitionOracle};
pub use error::{Error, Result};
pub use heuristic::{HeuristicParams, OptimizerReport, RunChannelMatrix};
pub use repetition::{
    RateBreakdown, RepetitionChannelSpec, RunLengthDistribution, TruncationConfig,
};
pub use sparse::SparseTransitionMatrix;
pub use tables::{BoundCurve, CapacityTable};
