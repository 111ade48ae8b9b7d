//! Blahut-Arimoto engines.
//!
//! Three implementations of the same alternating maximization, sharing one
//! convergence contract (stop when `max_i log2(P'(i)/P(i))` drops below the
//! accuracy parameter, in which case the returned rate is within that
//! accuracy of capacity):
//!
//! - [`baa_dense`]: the textbook version over a materialized transition
//!   matrix, including the intermediate posterior matrix. The reference.
//! - [`baa_lno`]: loop-nest-optimized; never materializes the matrix or the
//!   posterior, touching transition probabilities only through a
//!   [`TransitionOracle`] and keeping O(|inputs| + |outputs|) intermediates.
//! - [`baa_sparse`]: iterates only the stored nonzeros of a
//!   [`SparseTransitionMatrix`], columns via CSC and rows via the CSR
//!   companions.
//!
//! All three produce the same iterate sequence on the same channel: every
//! per-entry term is evaluated with the same expression and accumulated in
//! the same order (outputs ascending within a row, inputs ascending within
//! a column), and parallelism only ever splits across independent
//! accumulators, so results do not depend on thread count.
//!
//! Products over outputs run in log domain (a sum of `p * log2(...)`) and
//! are exponentiated once with the maximum subtracted: direct products of
//! thousands of sub-unity factors underflow doubles. Undefined operations
//! (0^0, division by zero) follow the fixed-to-zero convention: letters
//! with zero current mass stay at zero and are skipped by the convergence
//! test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitstring::{BitChannelSpec, TransitionOracle};
use crate::error::{Error, Result};
use crate::sparse::SparseTransitionMatrix;

/// A probability distribution over a finite alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbVector {
    probs: Vec<f64>,
}

impl ProbVector {
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    /// Validates nonnegativity and normalization within 1e-12.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidDistribution(
                "negative or NaN entry".to_string(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// Convergence parameters shared by all engines.
#[derive(Clone, Debug)]
pub struct BaaConfig {
    /// Capacity approximation parameter: at convergence the returned rate
    /// is within this of the true capacity.
    pub accuracy: f64,
    /// Safety cap on iterations.
    pub max_iterations: u64,
    /// Record the input distribution after every iteration.
    pub record_iterates: bool,
    /// Record the information rate of every iterate.
    pub record_rate_trace: bool,
}

impl Default for BaaConfig {
    fn default() -> Self {
        Self {
            accuracy: 1e-4,
            max_iterations: 1_000_000,
            record_iterates: false,
            record_rate_trace: false,
        }
    }
}

impl BaaConfig {
    pub fn with_accuracy(accuracy: f64) -> Self {
        assert!(accuracy > 0.0);
        Self {
            accuracy,
            ..Self::default()
        }
    }
}

/// Output of one engine run.
#[derive(Clone, Debug)]
pub struct BaaResult {
    /// Information rate (bits) of the last iterate used to form the
    /// returned distribution; within `accuracy` of capacity when converged.
    pub rate: f64,
    pub input_distribution: ProbVector,
    pub iterations: u64,
    pub converged: bool,
    /// Per-iteration rates, when requested.
    pub rate_trace: Vec<f64>,
    /// Per-iteration distributions, when requested.
    pub iterates: Vec<Vec<f64>>,
}

/// Row-visitor access to a channel's nonzero transitions.
pub trait TransitionRows: Sync {
    fn num_inputs(&self) -> usize;
    fn num_outputs(&self) -> usize;
    /// Visit `(output, probability)` for the nonzero transitions of one
    /// input, outputs ascending.
    fn for_each_nonzero(&self, input: usize, visit: &mut dyn FnMut(usize, f64));
}

/// Entry-wise oracle access to a transition matrix, the interface of the
/// loop-nest-optimized engine. Subsequence-channel oracles get this for
/// free through their exact integer counts.
pub trait ChannelOracle: Sync {
    fn num_inputs(&self) -> usize;
    fn num_outputs(&self) -> usize;
    fn transition(&self, input: usize, output: usize) -> f64;
}

impl<T: TransitionOracle> ChannelOracle for T {
    fn num_inputs(&self) -> usize {
        self.spec().num_inputs()
    }

    fn num_outputs(&self) -> usize {
        self.spec().num_outputs()
    }

    fn transition(&self, input: usize, output: usize) -> f64 {
        let count = self.embedding_count(input as u32, output as u32);
        count as f64 / self.spec().denominator() as f64
    }
}

/// A dense row-major transition matrix.
#[derive(Clone, Debug)]
pub struct DenseChannel {
    n_inputs: usize,
    n_outputs: usize,
    probs: Vec<f64>,
}

impl DenseChannel {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n_inputs = rows.len();
        let n_outputs = rows.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(n_inputs * n_outputs);
        for row in rows {
            assert_eq!(row.len(), n_outputs);
            probs.extend(row);
        }
        Self {
            n_inputs,
            n_outputs,
            probs,
        }
    }

    /// Binary symmetric channel with the given flip probability.
    pub fn bsc(flip: f64) -> Self {
        Self::from_rows(vec![vec![1.0 - flip, flip], vec![flip, 1.0 - flip]])
    }

    /// Materialize a `W(n, k)` channel from an oracle.
    pub fn from_oracle(ch: BitChannelSpec, oracle: &dyn TransitionOracle) -> Self {
        assert_eq!(oracle.spec(), ch);
        let n_inputs = ch.num_inputs();
        let n_outputs = ch.num_outputs();
        let mut probs = vec![0.0; n_inputs * n_outputs];
        probs
            .par_chunks_mut(n_outputs)
            .enumerate()
            .for_each(|(x, row)| {
                for (y, slot) in row.iter_mut().enumerate() {
                    *slot = oracle.probability(x as u32, y as u32);
                }
            });
        Self {
            n_inputs,
            n_outputs,
            probs,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n_outputs..(i + 1) * self.n_outputs]
    }

    fn check_row_stochastic(&self) -> Result<()> {
        for i in 0..self.n_inputs {
            let sum: f64 = self.row(i).iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::NotRowStochastic { row: i, sum });
            }
        }
        Ok(())
    }
}

impl TransitionRows for DenseChannel {
    fn num_inputs(&self) -> usize {
        self.n_inputs
    }

    fn num_outputs(&self) -> usize {
        self.n_outputs
    }

    fn for_each_nonzero(&self, input: usize, visit: &mut dyn FnMut(usize, f64)) {
        for (o, &p) in self.row(input).iter().enumerate() {
            if p > 0.0 {
                visit(o, p);
            }
        }
    }
}

impl ChannelOracle for DenseChannel {
    fn num_inputs(&self) -> usize {
        self.n_inputs
    }

    fn num_outputs(&self) -> usize {
        self.n_outputs
    }

    fn transition(&self, input: usize, output: usize) -> f64 {
        self.probs[input * self.n_outputs + output]
    }
}

impl TransitionRows for SparseTransitionMatrix {
    fn num_inputs(&self) -> usize {
        self.n_rows
    }

    fn num_outputs(&self) -> usize {
        self.n_cols
    }

    fn for_each_nonzero(&self, input: usize, visit: &mut dyn FnMut(usize, f64)) {
        for q in self.row_ptr_csr[input]..self.row_ptr_csr[input + 1] {
            visit(self.col_ind_csr[q], self.data[self.perm_data[q]]);
        }
    }
}

/// Oracle-backed channel rows for a `W(n, k)` channel.
pub struct OracleRows<'a> {
    ch: BitChannelSpec,
    oracle: &'a dyn TransitionOracle,
}

impl<'a> OracleRows<'a> {
    pub fn new(ch: BitChannelSpec, oracle: &'a dyn TransitionOracle) -> Self {
        assert_eq!(oracle.spec(), ch);
        Self { ch, oracle }
    }
}

impl TransitionRows for OracleRows<'_> {
    fn num_inputs(&self) -> usize {
        self.ch.num_inputs()
    }

    fn num_outputs(&self) -> usize {
        self.ch.num_outputs()
    }

    fn for_each_nonzero(&self, input: usize, visit: &mut dyn FnMut(usize, f64)) {
        for y in 0..self.ch.num_outputs() {
            let p = self.oracle.probability(input as u32, y as u32);
            if p > 0.0 {
                visit(y, p);
            }
        }
    }
}

/// Mutual information I(input; output) in bits for a given input
/// distribution, with 0 log 0 terms dropped.
pub fn dmc_rate(p_in: &ProbVector, channel: &impl TransitionRows) -> f64 {
    assert_eq!(p_in.len(), channel.num_inputs());
    let mut q = vec![0.0f64; channel.num_outputs()];
    for i in 0..channel.num_inputs() {
        let pi = p_in.get(i);
        if pi == 0.0 {
            continue;
        }
        channel.for_each_nonzero(i, &mut |o, p| q[o] += pi * p);
    }
    let mut rate = 0.0;
    for i in 0..channel.num_inputs() {
        let pi = p_in.get(i);
        if pi == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        channel.for_each_nonzero(i, &mut |o, p| acc += p * (p / q[o]).log2());
        rate += pi * acc;
    }
    rate
}

/// Shared per-iteration state transition: turn log-weights into the next
/// distribution and report the largest log2 improvement ratio.
fn advance(
    p_prev: &[f64],
    logw: &[f64],
    p_next: &mut [f64],
) -> (f64, f64) {
    let max_logw = logw
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut norm = 0.0;
    for (slot, &lw) in p_next.iter_mut().zip(logw) {
        let w = if lw == f64::NEG_INFINITY {
            0.0
        } else {
            (lw - max_logw).exp2()
        };
        *slot = w;
        norm += w;
    }
    let mut delta = f64::NEG_INFINITY;
    for i in 0..p_next.len() {
        p_next[i] /= norm;
        if p_prev[i] > 0.0 {
            let ratio = (p_next[i] / p_prev[i]).log2();
            if ratio > delta {
                delta = ratio;
            }
        }
    }
    // Rate of the previous iterate, recovered from the log-weights:
    // logw_i = log2 P(i) + sum_o p * log2(p / q_o) up to row normalization.
    let mut rate = 0.0;
    for i in 0..p_prev.len() {
        if p_prev[i] > 0.0 && logw[i] > f64::NEG_INFINITY {
            rate += p_prev[i] * (logw[i] - p_prev[i].log2());
        }
    }
    (delta, rate)
}

struct Loop {
    cfg: BaaConfig,
    p_prev: Vec<f64>,
    p_next: Vec<f64>,
    iterations: u64,
    converged: bool,
    rate_trace: Vec<f64>,
    iterates: Vec<Vec<f64>>,
}

impl Loop {
    fn new(n_inputs: usize, cfg: &BaaConfig) -> Self {
        Self {
            cfg: cfg.clone(),
            p_prev: vec![1.0 / n_inputs as f64; n_inputs],
            p_next: vec![0.0; n_inputs],
            iterations: 0,
            converged: false,
            rate_trace: Vec::new(),
            iterates: Vec::new(),
        }
    }

    /// Process one iteration's log-weights; returns true when the loop is
    /// done (converged or capped).
    fn step(&mut self, logw: &[f64]) -> bool {
        let (delta, rate) = advance(&self.p_prev, logw, &mut self.p_next);
        self.iterations += 1;
        if self.cfg.record_rate_trace {
            self.rate_trace.push(rate);
        }
        if self.cfg.record_iterates {
            self.iterates.push(self.p_next.clone());
        }
        if delta < self.cfg.accuracy {
            self.converged = true;
            return true;
        }
        if self.iterations >= self.cfg.max_iterations {
            return true;
        }
        std::mem::swap(&mut self.p_prev, &mut self.p_next);
        false
    }

    /// Package the result; `rate` is the exact information rate of the
    /// final pre-update iterate, computed by the caller from its q-array.
    fn finish(self, rate: f64) -> BaaResult {
        BaaResult {
            rate,
            input_distribution: ProbVector { probs: self.p_next },
            iterations: self.iterations,
            converged: self.converged,
            rate_trace: self.rate_trace,
            iterates: self.iterates,
        }
    }
}

/// The reference engine: materializes both the transition matrix rows and
/// the posterior matrix of each iteration.
pub fn baa_dense(channel: &DenseChannel, cfg: &BaaConfig) -> Result<BaaResult> {
    channel.check_row_stochastic()?;
    let n_in = channel.n_inputs;
    let n_out = channel.n_outputs;
    let mut state = Loop::new(n_in, cfg);
    let mut q = vec![0.0f64; n_out];
    let mut posterior = vec![0.0f64; n_in * n_out];
    let mut logw = vec![0.0f64; n_in];
    loop {
        let p_prev = &state.p_prev;
        q.par_iter_mut().enumerate().for_each(|(o, slot)| {
            let mut acc = 0.0;
            for i in 0..n_in {
                let p = channel.probs[i * n_out + o];
                if p > 0.0 {
                    acc += p_prev[i] * p;
                }
            }
            *slot = acc;
        });
        posterior
            .par_chunks_mut(n_out)
            .zip(logw.par_iter_mut())
            .enumerate()
            .for_each(|(i, (post_row, lw))| {
                let pi = p_prev[i];
                if pi == 0.0 {
                    post_row.fill(0.0);
                    *lw = f64::NEG_INFINITY;
                    return;
                }
                let row = channel.row(i);
                let mut acc = 0.0;
                for o in 0..n_out {
                    let p = row[o];
                    if p > 0.0 {
                        let post = (pi * p) / q[o];
                        post_row[o] = post;
                        acc += p * post.log2();
                    } else {
                        post_row[o] = 0.0;
                    }
                }
                *lw = acc;
            });
        if state.step(&logw) {
            break;
        }
    }
    let rate = final_rate(&state.p_prev, &q, |i, visit| {
        for (o, &p) in channel.row(i).iter().enumerate() {
            if p > 0.0 {
                visit(o, p);
            }
        }
    });
    Ok(state.finish(rate))
}

/// Loop-nest-optimized engine: oracle access to the transition
/// probabilities, O(|inputs| + |outputs|) intermediates.
pub fn baa_lno<O: ChannelOracle + ?Sized>(oracle: &O, cfg: &BaaConfig) -> Result<BaaResult> {
    let n_in = oracle.num_inputs();
    let n_out = oracle.num_outputs();
    let mut state = Loop::new(n_in, cfg);
    let mut q = vec![0.0f64; n_out];
    let mut logw = vec![0.0f64; n_in];
    loop {
        let p_prev = &state.p_prev;
        q.par_iter_mut().enumerate().for_each(|(o, slot)| {
            let mut acc = 0.0;
            for i in 0..n_in {
                let p = oracle.transition(i, o);
                if p > 0.0 {
                    acc += p_prev[i] * p;
                }
            }
            *slot = acc;
        });
        logw.par_iter_mut().enumerate().for_each(|(i, lw)| {
            let pi = p_prev[i];
            if pi == 0.0 {
                *lw = f64::NEG_INFINITY;
                return;
            }
            let mut acc = 0.0;
            for o in 0..n_out {
                let p = oracle.transition(i, o);
                if p > 0.0 {
                    acc += p * ((pi * p) / q[o]).log2();
                }
            }
            *lw = acc;
        });
        if state.step(&logw) {
            break;
        }
    }
    let rate = final_rate(&state.p_prev, &q, |i, visit| {
        for o in 0..n_out {
            let p = oracle.transition(i, o);
            if p > 0.0 {
                visit(o, p);
            }
        }
    });
    Ok(state.finish(rate))
}

/// Sparse engine: per-iteration arithmetic is linear in the number of
/// stored nonzeros.
pub fn baa_sparse(m: &SparseTransitionMatrix, cfg: &BaaConfig) -> Result<BaaResult> {
    assert!(
        m.has_csr_companions(),
        "build_csr_companions must run before baa_sparse"
    );
    let n_in = m.n_rows;
    let n_out = m.n_cols;
    let mut state = Loop::new(n_in, cfg);
    let mut q = vec![0.0f64; n_out];
    let mut logw = vec![0.0f64; n_in];
    loop {
        let p_prev = &state.p_prev;
        q.par_iter_mut().enumerate().for_each(|(o, slot)| {
            let mut acc = 0.0;
            for p in m.col_ptr[o]..m.col_ptr[o + 1] {
                acc += p_prev[m.row_ind[p]] * m.data[p];
            }
            *slot = acc;
        });
        logw.par_iter_mut().enumerate().for_each(|(i, lw)| {
            let pi = p_prev[i];
            if pi == 0.0 {
                *lw = f64::NEG_INFINITY;
                return;
            }
            let mut acc = 0.0;
            for pos in m.row_ptr_csr[i]..m.row_ptr_csr[i + 1] {
                let o = m.col_ind_csr[pos];
                let p = m.data[m.perm_data[pos]];
                acc += p * ((pi * p) / q[o]).log2();
            }
            *lw = acc;
        });
        if state.step(&logw) {
            break;
        }
    }
    let rate = final_rate(&state.p_prev, &q, |i, visit| {
        for pos in m.row_ptr_csr[i]..m.row_ptr_csr[i + 1] {
            visit(m.col_ind_csr[pos], m.data[m.perm_data[pos]]);
        }
    });
    Ok(state.finish(rate))
}

/// Rate of the final iterate: `sum_i P(i) sum_o p log2(p / q_o)`, reusing
/// the q-array of the iteration that produced it.
fn final_rate<F>(p_prev: &[f64], q: &[f64], row: F) -> f64
where
    F: Fn(usize, &mut dyn FnMut(usize, f64)),
{
    let mut rate = 0.0;
    for (i, &pi) in p_prev.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        row(i, &mut |o, p| acc += p * (p / q[o]).log2());
        rate += pi * acc;
    }
    rate
}
