//! Fixed-length deletion channels on bit strings.
//!
//! `W(n, k)` maps an n-bit input to a uniformly random k-bit subsequence of
//! it, so the transition probability from `x` to `y` is the number of ways
//! `y` embeds in `x` as a subsequence, divided by `C(n, k)`. This module
//! provides that count three ways:
//!
//! - [`dp_embedding_count`]: the O(n*k) dynamic program (the reference),
//! - [`DpOracle`]: the same, behind the [`TransitionOracle`] trait,
//! - [`EmbeddingCache`]: a precomputed table over half-length inputs that
//!   answers queries in O(k) lookups via the split identity
//!   `count(x, y) = sum_j count(x1, y[..j]) * count(x2, y[j..])`.
//!
//! All three routes go through exact integer counts and normalize by
//! `C(n, k)` once at the end, so they agree bit for bit.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::util::binomial_u64;

/// A bit string of up to 32 bits, encoded MSB-first in a machine integer.
///
/// `value < 2^len`; the integer value doubles as the canonical alphabet
/// index, so strings of a fixed length enumerate in lexicographic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitString {
    pub value: u32,
    pub len: u32,
}

impl BitString {
    pub fn new(value: u32, len: u32) -> Self {
        assert!(len <= 32, "bit strings are limited to 32 bits");
        assert!(
            len == 32 || value < (1u32 << len),
            "value {value} does not fit in {len} bits"
        );
        Self { value, len }
    }

    pub fn empty() -> Self {
        Self { value: 0, len: 0 }
    }

    /// Parse from text like "1101". Leftmost character is the first bit.
    pub fn parse(s: &str) -> Self {
        assert!(s.len() <= 32);
        let mut value = 0u32;
        for c in s.chars() {
            value = (value << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => panic!("bit strings contain only 0 and 1"),
                };
        }
        Self {
            value,
            len: s.len() as u32,
        }
    }

    /// Bit at position `i` counted from the start of the string.
    pub fn bit(&self, i: u32) -> u32 {
        debug_assert!(i < self.len);
        (self.value >> (self.len - 1 - i)) & 1
    }

    /// First `j` bits.
    pub fn prefix(&self, j: u32) -> Self {
        debug_assert!(j <= self.len);
        Self {
            value: if j == 0 { 0 } else { self.value >> (self.len - j) },
            len: j,
        }
    }

    /// Last `j` bits.
    pub fn suffix(&self, j: u32) -> Self {
        debug_assert!(j <= self.len);
        Self {
            value: self.value & mask(j),
            len: j,
        }
    }

    /// Bitwise complement of every position.
    pub fn complement(&self) -> Self {
        Self {
            value: !self.value & mask(self.len),
            len: self.len,
        }
    }

    /// The string read back to front.
    pub fn reversed(&self) -> Self {
        Self {
            value: if self.len == 0 {
                0
            } else {
                self.value.reverse_bits() >> (32 - self.len)
            },
            len: self.len,
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", self.bit(i))?;
        }
        Ok(())
    }
}

fn mask(len: u32) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX >> (32 - len)
    }
}

/// The channel `W(n, k)`: n input bits, a uniformly random k-bit
/// subsequence as output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BitChannelSpec {
    pub n: u32,
    pub k: u32,
}

impl BitChannelSpec {
    pub fn new(n: u32, k: u32) -> Result<Self> {
        if n > 32 || k > n {
            return Err(Error::InvalidChannel(format!(
                "need k <= n <= 32, got n = {n}, k = {k}"
            )));
        }
        Ok(Self { n, k })
    }

    pub fn num_inputs(&self) -> usize {
        1usize << self.n
    }

    pub fn num_outputs(&self) -> usize {
        1usize << self.k
    }

    pub fn denominator(&self) -> u64 {
        binomial_u64(self.n, self.k)
    }
}

/// Number of ways `y` occurs as a subsequence of `x`.
///
/// Runs the O(|x|*|y|) dynamic program over prefix pairs. Counts fit u64
/// comfortably: they are at most `C(32, 16) < 2^31`.
///
/// Panics if `|y| > |x|` (caller bug).
pub fn dp_embedding_count(x: BitString, y: BitString) -> u64 {
    assert!(
        y.len <= x.len,
        "output ({} bits) longer than input ({} bits)",
        y.len,
        x.len
    );
    let k = y.len as usize;
    // row[j] = number of embeddings of y[..j] in the scanned prefix of x
    let mut row = vec![0u64; k + 1];
    row[0] = 1;
    for i in 0..x.len {
        let xi = x.bit(i);
        let hi = (i as usize + 1).min(k);
        for j in (1..=hi).rev() {
            if y.bit(j as u32 - 1) == xi {
                row[j] += row[j - 1];
            }
        }
    }
    row[k]
}

/// Transition probability of `W(n, k)` from `x` to `y`.
pub fn transition_probability(ch: BitChannelSpec, x: BitString, y: BitString) -> Result<f64> {
    if x.len != ch.n {
        return Err(Error::LengthMismatch {
            expected: ch.n,
            got: x.len,
        });
    }
    if y.len != ch.k {
        return Err(Error::LengthMismatch {
            expected: ch.k,
            got: y.len,
        });
    }
    Ok(dp_embedding_count(x, y) as f64 / ch.denominator() as f64)
}

/// Oracle access to the transition structure of one `W(n, k)` channel.
///
/// `x` and `y` are the integer encodings of an n-bit input and a k-bit
/// output; lengths are fixed by [`TransitionOracle::spec`]. Implementations
/// must answer through exact integer counts so that different oracles for
/// the same channel agree exactly.
pub trait TransitionOracle: Sync {
    fn spec(&self) -> BitChannelSpec;

    /// Embedding count of output `y` in input `x`.
    fn embedding_count(&self, x: u32, y: u32) -> u64;

    /// `embedding_count / C(n, k)`.
    fn probability(&self, x: u32, y: u32) -> f64 {
        self.embedding_count(x, y) as f64 / self.spec().denominator() as f64
    }
}

/// Oracle that runs the dynamic program on every query.
#[derive(Clone, Copy, Debug)]
pub struct DpOracle {
    spec: BitChannelSpec,
}

impl DpOracle {
    pub fn new(spec: BitChannelSpec) -> Self {
        Self { spec }
    }
}

impl TransitionOracle for DpOracle {
    fn spec(&self) -> BitChannelSpec {
        self.spec
    }

    fn embedding_count(&self, x: u32, y: u32) -> u64 {
        dp_embedding_count(
            BitString::new(x, self.spec.n),
            BitString::new(y, self.spec.k),
        )
    }
}

const CACHE_MAGIC: &[u8; 4] = b"BDCC";
const CACHE_VERSION: u32 = 1;

/// Precomputed embedding counts for all inputs of length at most
/// `ceil(n/2)` and outputs of length at most `k`.
///
/// A query for the full channel splits the n-bit input into its first
/// `ceil(n/2)` and last `floor(n/2)` bits and combines cached counts over
/// the k+1 ways to split the output, normalizing by `C(n, k)` once at the
/// end. The table stores exact integer counts, never probabilities.
///
/// Layout: a flat array indexed by (input length `a` ascending, input value
/// ascending, output length `j` ascending, output value ascending), with a
/// rectangular per-input block over all `j <= k` (entries with `j > a` are
/// zero). This is also the on-disk order.
#[derive(Debug)]
pub struct EmbeddingCache {
    spec: BitChannelSpec,
    half_n: u32,
    max_k: u32,
    counts: Vec<u64>,
}

impl EmbeddingCache {
    /// Entries in the table for a given channel (including the structural
    /// zeros that keep the layout rectangular).
    pub fn table_entries(n: u32, k: u32) -> u64 {
        let half_n = n.div_ceil(2);
        let inputs = (1u64 << (half_n + 1)) - 1;
        let per_input = (1u64 << (k + 1)) - 1;
        inputs * per_input
    }

    /// Size estimate in bytes for the in-memory table.
    pub fn estimated_bytes(n: u32, k: u32) -> u64 {
        Self::table_entries(n, k) * 8
    }

    /// Build the cache, refusing if the table would exceed `budget_bytes`.
    pub fn build(spec: BitChannelSpec, budget_bytes: u64) -> Result<Self> {
        let needed = Self::estimated_bytes(spec.n, spec.k);
        if needed > budget_bytes {
            return Err(Error::MemoryBudget {
                what: "embedding cache",
                needed_bytes: needed,
                budget_bytes,
            });
        }
        let half_n = spec.n.div_ceil(2);
        let max_k = spec.k;
        let block = block_len(max_k);
        let mut counts = vec![0u64; (num_inputs(half_n) as usize) * block];

        // Length-0 input: one embedding of the empty output, none otherwise.
        counts[0] = 1;

        // Extend inputs one bit at a time: appending bit b to x gives
        //   count(x*b, y*c) = count(x, y*c) + [b == c] * count(x, y).
        for a in 1..=half_n {
            let parent_base = input_base(a - 1) * block;
            let level_base = input_base(a) * block;
            let (head, tail) = counts.split_at_mut(level_base);
            let parents = &head[parent_base..parent_base + (1usize << (a - 1)) * block];
            let level = &mut tail[..(1usize << a) * block];

            level
                .par_chunks_mut(block)
                .enumerate()
                .for_each(|(xv, row)| {
                    let b = (xv & 1) as u32;
                    let parent = &parents[(xv >> 1) * block..(xv >> 1) * block + block];
                    row[0] = 1; // empty output
                    for j in 1..=max_k.min(a) {
                        let off = block_offset(j);
                        let head_off = block_offset(j - 1);
                        for yv in 0..(1usize << j) {
                            let c = (yv & 1) as u32;
                            let mut count = parent[off + yv];
                            if b == c {
                                count += parent[head_off + (yv >> 1)];
                            }
                            row[off + yv] = count;
                        }
                    }
                });
        }

        Ok(Self {
            spec,
            half_n,
            max_k,
            counts,
        })
    }

    pub fn spec(&self) -> BitChannelSpec {
        self.spec
    }

    /// Cached count for an input of length `a` (value `x`) and an output of
    /// length `j` (value `y`). Zero when `j > a`.
    pub fn cached_count(&self, a: u32, x: u32, j: u32, y: u32) -> Result<u64> {
        if a > self.half_n || j > self.max_k {
            return Err(Error::CacheCoverage { n: a, k: j });
        }
        Ok(self.counts[(input_base(a) + x as usize) * block_len(self.max_k) + block_offset(j) + y as usize])
    }

    fn lookup(&self, a: u32, x: u32, j: u32, y: u32) -> u64 {
        self.counts
            [(input_base(a) + x as usize) * block_len(self.max_k) + block_offset(j) + y as usize]
    }

    /// Write the table to disk: magic "BDCC", version, n, k (all u32
    /// little-endian), then every count as little-endian u64 in layout
    /// order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(fs::File::create(path)?);
        file.write_all(CACHE_MAGIC)?;
        file.write_all(&CACHE_VERSION.to_le_bytes())?;
        file.write_all(&self.spec.n.to_le_bytes())?;
        file.write_all(&self.spec.k.to_le_bytes())?;
        for &c in &self.counts {
            file.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    /// Load a table, validating the header against the requested channel.
    pub fn load(path: &Path, spec: BitChannelSpec) -> Result<Self> {
        let mut file = std::io::BufReader::new(fs::File::open(path)?);
        let mut header = [0u8; 16];
        file.read_exact(&mut header)?;
        if &header[0..4] != CACHE_MAGIC {
            return Err(Error::CacheFile("bad magic bytes".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(Error::CacheFile(format!(
                "unsupported format version {version}"
            )));
        }
        let n = u32::from_le_bytes(header[8..12].try_into().unwrap());
        let k = u32::from_le_bytes(header[12..16].try_into().unwrap());
        if n != spec.n || k != spec.k {
            return Err(Error::CacheFile(format!(
                "cache is for (n, k) = ({n}, {k}), requested ({}, {})",
                spec.n, spec.k
            )));
        }
        let entries = Self::table_entries(n, k) as usize;
        let mut raw = vec![0u8; entries * 8];
        file.read_exact(&mut raw)?;
        let counts = raw
            .chunks_exact(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(Self {
            spec,
            half_n: n.div_ceil(2),
            max_k: k,
            counts,
        })
    }
}

impl TransitionOracle for EmbeddingCache {
    fn spec(&self) -> BitChannelSpec {
        self.spec
    }

    fn embedding_count(&self, x: u32, y: u32) -> u64 {
        let n = self.spec.n;
        let k = self.spec.k;
        let n1 = n.div_ceil(2);
        let n2 = n / 2;
        let x1 = if n1 == 0 { 0 } else { x >> n2 };
        let x2 = x & mask(n2);
        let mut total = 0u64;
        for split in 0..=k {
            let j1 = split; // bits of y assigned to the first half
            let j2 = k - split;
            if j1 > n1 || j2 > n2 {
                continue;
            }
            let y1 = if j1 == 0 { 0 } else { y >> j2 };
            let y2 = y & mask(j2);
            total += self.lookup(n1, x1, j1, y1) * self.lookup(n2, x2, j2, y2);
        }
        total
    }
}

fn num_inputs(half_n: u32) -> u64 {
    (1u64 << (half_n + 1)) - 1
}

/// Index of the first input of length `a` in the canonical enumeration.
fn input_base(a: u32) -> usize {
    ((1u64 << a) - 1) as usize
}

/// Per-input block: one slot for every output of length 0..=max_k.
fn block_len(max_k: u32) -> usize {
    ((1u64 << (max_k + 1)) - 1) as usize
}

fn block_offset(j: u32) -> usize {
    ((1u64 << j) - 1) as usize
}
