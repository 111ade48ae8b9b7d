//! Compressed sparse column storage with row companions.
//!
//! When k is close to n, the `W(n, k)` transition matrix has at most
//! `C(n, n-k)` nonzeros per row while the full matrix is `2^(n+k)` wide, so
//! the sparse Blahut-Arimoto engine stores only the nonzeros. Columns are
//! the primary (CSC) ordering; two companion arrays expose the same data in
//! row (CSR) order without duplicating the values: `perm_data[p]` is the
//! CSC position of the p-th entry in CSR order, so gathering
//! `data[perm_data[p]]` for p = 0..nnz yields the CSR data array.

use crate::bitstring::{BitChannelSpec, TransitionOracle};
use crate::error::{Error, Result};
use crate::util::binomial_u64;

/// Values below this are treated as structural zeros when building from
/// dense input; transition probabilities here are rationals with
/// denominator `C(n, k)`, far above it.
const STRUCTURAL_ZERO: f64 = 1e-300;

#[derive(Clone, Debug)]
pub struct SparseTransitionMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Nonzero values in column-major order.
    pub data: Vec<f64>,
    /// Row index of each entry of `data`.
    pub row_ind: Vec<usize>,
    /// Cumulative nonzero counts per column; length `n_cols + 1`.
    pub col_ptr: Vec<usize>,
    /// CSR position -> CSC position.
    pub perm_data: Vec<usize>,
    /// Cumulative nonzero counts per row; length `n_rows + 1`.
    pub row_ptr_csr: Vec<usize>,
    /// Column index of each entry in CSR order.
    pub col_ind_csr: Vec<usize>,
}

impl SparseTransitionMatrix {
    /// Construct from raw CSC arrays. Companions start empty; call
    /// [`Self::build_csr_companions`].
    pub fn from_csc(
        n_rows: usize,
        n_cols: usize,
        data: Vec<f64>,
        row_ind: Vec<usize>,
        col_ptr: Vec<usize>,
    ) -> Self {
        assert_eq!(col_ptr.len(), n_cols + 1);
        assert_eq!(data.len(), row_ind.len());
        assert_eq!(*col_ptr.last().unwrap(), data.len());
        Self {
            n_rows,
            n_cols,
            data,
            row_ind,
            col_ptr,
            perm_data: Vec::new(),
            row_ptr_csr: Vec::new(),
            col_ind_csr: Vec::new(),
        }
    }

    /// Build from a dense row-major matrix, skipping (sub-)zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut col_counts = vec![0usize; n_cols];
        for row in rows {
            for (c, &v) in row.iter().enumerate() {
                if v >= STRUCTURAL_ZERO {
                    col_counts[c] += 1;
                }
            }
        }
        let mut col_ptr = vec![0usize; n_cols + 1];
        for c in 0..n_cols {
            col_ptr[c + 1] = col_ptr[c] + col_counts[c];
        }
        let nnz = col_ptr[n_cols];
        let mut data = vec![0.0; nnz];
        let mut row_ind = vec![0usize; nnz];
        let mut next = col_ptr.clone();
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v >= STRUCTURAL_ZERO {
                    let p = next[c];
                    data[p] = v;
                    row_ind[p] = r;
                    next[c] += 1;
                }
            }
        }
        let mut m = Self::from_csc(n_rows, n_cols, data, row_ind, col_ptr);
        m.build_csr_companions();
        m
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Rough in-memory footprint of a matrix with `nnz` entries.
    pub fn estimated_bytes(nnz: u64) -> u64 {
        nnz * 32
    }

    /// Populate `perm_data`, `row_ptr_csr` and `col_ind_csr` from the CSC
    /// arrays. Entries within each row come out in ascending column order.
    pub fn build_csr_companions(&mut self) {
        let nnz = self.nnz();
        let mut row_counts = vec![0usize; self.n_rows];
        for &r in &self.row_ind {
            row_counts[r] += 1;
        }
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        for r in 0..self.n_rows {
            row_ptr[r + 1] = row_ptr[r] + row_counts[r];
        }
        let mut perm = vec![0usize; nnz];
        let mut col_ind = vec![0usize; nnz];
        let mut next = row_ptr.clone();
        for c in 0..self.n_cols {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_ind[p];
                let q = next[r];
                next[r] += 1;
                perm[q] = p;
                col_ind[q] = c;
            }
        }
        self.perm_data = perm;
        self.row_ptr_csr = row_ptr;
        self.col_ind_csr = col_ind;
    }

    pub fn has_csr_companions(&self) -> bool {
        self.row_ptr_csr.len() == self.n_rows + 1 && self.perm_data.len() == self.nnz()
    }

    /// Dense reconstruction from the CSC arrays.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for c in 0..self.n_cols {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                out[self.row_ind[p]][c] = self.data[p];
            }
        }
        out
    }

    /// Dense reconstruction walking the CSR companions instead.
    pub fn to_dense_via_csr(&self) -> Vec<Vec<f64>> {
        assert!(self.has_csr_companions());
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for r in 0..self.n_rows {
            for q in self.row_ptr_csr[r]..self.row_ptr_csr[r + 1] {
                out[r][self.col_ind_csr[q]] = self.data[self.perm_data[q]];
            }
        }
        out
    }

    /// Check the structural invariants; used by tests.
    pub fn validate(&self) -> Result<()> {
        let nnz = self.nnz();
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidChannel(format!("sparse invariant broken: {what}")))
            }
        };
        check(self.col_ptr[0] == 0 && *self.col_ptr.last().unwrap() == nnz, "col_ptr range")?;
        check(self.col_ptr.windows(2).all(|w| w[0] <= w[1]), "col_ptr monotone")?;
        check(self.data.iter().all(|&v| v > 0.0), "stored zeros")?;
        if self.has_csr_companions() {
            check(
                self.row_ptr_csr[0] == 0 && *self.row_ptr_csr.last().unwrap() == nnz,
                "row_ptr_csr range",
            )?;
            check(self.row_ptr_csr.windows(2).all(|w| w[0] <= w[1]), "row_ptr_csr monotone")?;
            let mut seen = vec![false; nnz];
            for &p in &self.perm_data {
                check(p < nnz && !seen[p], "perm_data bijection")?;
                seen[p] = true;
            }
        }
        Ok(())
    }
}

/// Materialize the `W(n, k)` transition matrix in sparse form.
///
/// Rows are input strings, columns are output strings; only the distinct
/// attainable outputs of each row are stored, so `nnz <= 2^n * C(n, n-k)`.
/// Refuses up front if the estimated footprint exceeds `budget_bytes`.
pub fn csc_from_oracle(
    ch: BitChannelSpec,
    oracle: &dyn TransitionOracle,
    budget_bytes: u64,
) -> Result<SparseTransitionMatrix> {
    assert_eq!(oracle.spec(), ch);
    let n = ch.n;
    let k = ch.k;
    let per_row = binomial_u64(n, n - k).min(1u64 << k);
    let nnz_bound = per_row.saturating_mul(1u64 << n);
    let needed = SparseTransitionMatrix::estimated_bytes(nnz_bound);
    if needed > budget_bytes {
        return Err(Error::MemoryBudget {
            what: "sparse transition matrix",
            needed_bytes: needed,
            budget_bytes,
        });
    }

    let n_rows = ch.num_inputs();
    let n_cols = ch.num_outputs();
    let denom = ch.denominator() as f64;

    // Pass 1: nonzero count per column.
    let mut scratch = Vec::new();
    let mut col_counts = vec![0usize; n_cols];
    for x in 0..n_rows as u32 {
        distinct_outputs(ch, oracle, x, &mut scratch);
        for &y in &scratch {
            col_counts[y as usize] += 1;
        }
    }
    let mut col_ptr = vec![0usize; n_cols + 1];
    for c in 0..n_cols {
        col_ptr[c + 1] = col_ptr[c] + col_counts[c];
    }
    let nnz = col_ptr[n_cols];

    // Pass 2: fill values; rows ascend within each column.
    let mut data = vec![0.0; nnz];
    let mut row_ind = vec![0usize; nnz];
    let mut next = col_ptr.clone();
    for x in 0..n_rows as u32 {
        distinct_outputs(ch, oracle, x, &mut scratch);
        for &y in &scratch {
            let p = next[y as usize];
            next[y as usize] += 1;
            data[p] = oracle.embedding_count(x, y) as f64 / denom;
            row_ind[p] = x as usize;
        }
    }

    let mut m = SparseTransitionMatrix::from_csc(n_rows, n_cols, data, row_ind, col_ptr);
    m.build_csr_companions();
    Ok(m)
}

/// Distinct k-bit subsequences of the n-bit input `x`, ascending.
fn distinct_outputs(
    ch: BitChannelSpec,
    oracle: &dyn TransitionOracle,
    x: u32,
    out: &mut Vec<u32>,
) {
    let n = ch.n;
    let k = ch.k;
    out.clear();
    if binomial_u64(n, n - k) <= (1u64 << k) {
        // Enumerate deletion position subsets; every one is attainable.
        let mut deletions = vec![0u32; (n - k) as usize];
        enumerate_deletions(x, n, &mut deletions, 0, 0, out);
        out.sort_unstable();
        out.dedup();
    } else {
        // Dense column scan: keep outputs with a nonzero count.
        for y in 0..(1u32 << k) {
            if oracle.embedding_count(x, y) > 0 {
                out.push(y);
            }
        }
    }
}

fn enumerate_deletions(
    x: u32,
    n: u32,
    deletions: &mut Vec<u32>,
    depth: usize,
    first: u32,
    out: &mut Vec<u32>,
) {
    if depth == deletions.len() {
        // Collect the surviving bits MSB-first.
        let mut y = 0u32;
        let mut d = 0usize;
        for i in 0..n {
            if d < deletions.len() && deletions[d] == i {
                d += 1;
            } else {
                y = (y << 1) | ((x >> (n - 1 - i)) & 1);
            }
        }
        out.push(y);
        return;
    }
    for i in first..n {
        deletions[depth] = i;
        enumerate_deletions(x, n, deletions, depth + 1, i + 1, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitstring::DpOracle;

    fn w_matrix(n: u32, k: u32) -> SparseTransitionMatrix {
        let ch = BitChannelSpec::new(n, k).unwrap();
        csc_from_oracle(ch, &DpOracle::new(ch), 1 << 30).unwrap()
    }

    #[test]
    fn identity_channel() {
        let m = w_matrix(1, 1);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.data, vec![1.0, 1.0]);
        m.validate().unwrap();
    }

    #[test]
    fn two_to_one() {
        // inputs 00 and 11 reach one output each; 01 and 10 reach two
        let m = w_matrix(2, 1);
        assert_eq!(m.nnz(), 6);
        let dense = m.to_dense();
        assert_eq!(dense[0b00], vec![1.0, 0.0]);
        assert_eq!(dense[0b01], vec![0.5, 0.5]);
        assert_eq!(dense[0b10], vec![0.5, 0.5]);
        assert_eq!(dense[0b11], vec![0.0, 1.0]);
    }

    #[test]
    fn row_nonzeros_bounded() {
        let m = w_matrix(3, 2);
        for r in 0..m.n_rows {
            let row_nnz = m.row_ptr_csr[r + 1] - m.row_ptr_csr[r];
            assert!(row_nnz <= 3);
        }
        // row sums reconstruct to 1
        for row in m.to_dense() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn companions_identity_perm() {
        let m = SparseTransitionMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(m.perm_data, vec![0, 1]);
        let m = SparseTransitionMatrix::from_dense(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert_eq!(m.perm_data, vec![0]);
    }

    #[test]
    fn budget_refusal() {
        let ch = BitChannelSpec::new(20, 19).unwrap();
        let err = csc_from_oracle(ch, &DpOracle::new(ch), 1024).unwrap_err();
        assert!(matches!(err, Error::MemoryBudget { .. }));
    }

    #[test]
    fn csr_round_trip_matches_csc() {
        for (n, k) in [(2, 1), (3, 2), (4, 2), (5, 4)] {
            let m = w_matrix(n, k);
            m.validate().unwrap();
            assert_eq!(m.to_dense(), m.to_dense_via_csr());
        }
    }

    #[test]
    fn near_diagonal_sparsity_bounds_per_iteration_work() {
        // k = n - 1: at most n nonzeros per row, so one engine pass costs
        // linear in n * 2^n arithmetic rather than 2^(n+k).
        let m = w_matrix(12, 11);
        let n = 12u64;
        assert!(m.nnz() as u64 <= n * (1 << 12));
        // each of the two passes per iteration touches every stored entry
        // once plus the per-axis vectors
        let per_iteration = 2 * m.nnz() as u64 + (m.n_rows + m.n_cols) as u64;
        assert!(per_iteration <= 4 * n * (1 << 12));
        assert!(per_iteration < (1 << 23) / 16);
    }
}
