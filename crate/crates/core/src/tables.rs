//! The C(n, k) table and its combination into deletion-channel bounds.
//!
//! Entries are upper bounds on the capacity of `W(n, k)` in bits. Computed
//! entries store `rate + accuracy` so the recorded value is a one-sided
//! bound. Entries out of computational reach are filled from neighbours
//! using three inequalities:
//!
//! 1. lengthening the input cannot raise capacity:
//!    `C(n+1, k) <= C(n, k)`;
//! 2. a convex split over whether the last bit survives:
//!    `C(n+1, k) <= C(n, k-1) (1 - k/(n+1)) + (C(n, k) + 1) k/(n+1)`;
//! 3. a hypergeometric split of the input into two blocks:
//!    `C(n, k) <= sum_i [C(s,i) C(n-s,k-i) weight] (C(s, i) + C(n-s, k-i))`.
//!
//! A full row combines with the output-length law into an upper bound on
//! the deletion channel: `C(BDC_d) <= (1/n) sum_k S_d(n, k) C(n, k)`, and
//! the best bound minimizes that over n.

use std::collections::BTreeMap;
use std::io::Write as IoWrite;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::binomial_f64;

/// How a table entry was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Lno,
    Sparse,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    /// The trivial exact values C(n, 0) = 0 and C(n, n) = n.
    Exact,
    Computed {
        accuracy: f64,
        method: Method,
        iterations: u64,
    },
    Lemma1,
    Lemma2,
    Lemma3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableEntry {
    pub value: f64,
    pub provenance: Provenance,
}

/// Partially filled map from (n, k) to an upper bound on C(n, k).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CapacityTable {
    entries: BTreeMap<(u32, u32), TableEntry>,
}

/// Flat serialized form: one record per entry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableRecord {
    pub n: u32,
    pub k: u32,
    pub value: f64,
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
}

impl CapacityTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, n: u32, k: u32) -> Option<f64> {
        self.entries.get(&(n, k)).map(|e| e.value)
    }

    pub fn entry(&self, n: u32, k: u32) -> Option<&TableEntry> {
        self.entries.get(&(n, k))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, u32), &TableEntry)> {
        self.entries.iter()
    }

    fn require(&self, n: u32, k: u32) -> Result<f64> {
        self.get(n, k).ok_or(Error::MissingEntry { n, k })
    }

    /// Insert the exact entries C(n, 0) = 0 and C(n, n) = n for all
    /// n <= n_max, never overwriting.
    pub fn seed_exact(&mut self, n_max: u32) {
        for n in 0..=n_max {
            self.entries.entry((n, 0)).or_insert(TableEntry {
                value: 0.0,
                provenance: Provenance::Exact,
            });
            self.entries.entry((n, n)).or_insert(TableEntry {
                value: n as f64,
                provenance: Provenance::Exact,
            });
        }
    }

    /// Record a converged run on `W(n, k)`: the stored bound is
    /// `rate + accuracy` (the rate is within `accuracy` of capacity from
    /// below), clamped to the trivial bound k. Keeps the smaller value if
    /// an entry already exists, so re-recording is idempotent.
    pub fn record_computed(
        &mut self,
        n: u32,
        k: u32,
        rate: f64,
        accuracy: f64,
        method: Method,
        iterations: u64,
    ) {
        let value = (rate + accuracy).min(k as f64);
        let candidate = TableEntry {
            value,
            provenance: Provenance::Computed {
                accuracy,
                method,
                iterations,
            },
        };
        match self.entries.get_mut(&(n, k)) {
            Some(existing) if existing.value <= value => {}
            Some(existing) => *existing = candidate,
            None => {
                self.entries.insert((n, k), candidate);
            }
        }
    }

    /// Bound C(n, k) by C(n-1, k): capacity cannot grow with input length.
    pub fn lemma1_bound(&self, n: u32, k: u32) -> Result<f64> {
        if n == 0 {
            return Err(Error::MissingEntry { n: 0, k });
        }
        self.require(n - 1, k)
    }

    /// Bound C(n+1, k) by the convex combination over whether the last
    /// input bit survives. Requires k in [1, n].
    pub fn lemma2_bound(&self, n_plus_1: u32, k: u32) -> Result<f64> {
        if n_plus_1 == 0 || k == 0 || k > n_plus_1 - 1 {
            return Err(Error::Infeasible(format!(
                "second bound needs 1 <= k <= n, got n + 1 = {n_plus_1}, k = {k}"
            )));
        }
        let n = n_plus_1 - 1;
        let lo = self.require(n, k - 1)?;
        let hi = self.require(n, k)?;
        let frac = k as f64 / n_plus_1 as f64;
        Ok(lo * (1.0 - frac) + (hi + 1.0) * frac)
    }

    /// Bound C(n, k) by splitting the input into a block of s bits and one
    /// of n - s bits, weighting by how many surviving bits land in each.
    pub fn lemma3_bound(&self, n: u32, k: u32, s: u32) -> Result<f64> {
        assert!(s >= 1 && s <= n, "split size must be in [1, n]");
        let denom = binomial_f64(n, k);
        let mut acc = 0.0;
        for i in 0..=s.min(k) {
            if k - i > n - s {
                continue;
            }
            let weight = binomial_f64(s, i) * binomial_f64(n - s, k - i) / denom;
            if weight == 0.0 {
                continue;
            }
            let a = self.require(s, i)?;
            let b = self.require(n - s, k - i)?;
            acc += weight * (a + b);
        }
        Ok(acc)
    }

    /// Fill every missing (n, k) with n <= n_max using the minimum over
    /// the first and third bounds (and the second when `use_lemma2`),
    /// recording which one won. Existing entries are never overwritten.
    pub fn fill_unknowns(&mut self, n_max: u32, use_lemma2: bool) -> Result<()> {
        self.seed_exact(n_max);
        for n in 2..=n_max {
            for k in 1..n {
                if self.entries.contains_key(&(n, k)) {
                    continue;
                }
                let mut best = self.lemma1_bound(n, k)?;
                let mut provenance = Provenance::Lemma1;
                if use_lemma2 {
                    let b2 = self.lemma2_bound(n, k)?;
                    if b2 < best {
                        best = b2;
                        provenance = Provenance::Lemma2;
                    }
                }
                for s in 1..n {
                    let b3 = self.lemma3_bound(n, k, s)?;
                    if b3 < best {
                        best = b3;
                        provenance = Provenance::Lemma3;
                    }
                }
                self.entries.insert((n, k), TableEntry {
                    value: best,
                    provenance,
                });
            }
        }
        Ok(())
    }

    /// Upper bound on the deletion-channel capacity via one row:
    /// `(1/n) sum_{k=1..n} S_d(n, k) C(n, k)`.
    pub fn combine_bound(&self, n: u32, d: f64) -> Result<f64> {
        let missing: Vec<u32> = (1..=n).filter(|&k| self.get(n, k).is_none()).collect();
        if !missing.is_empty() {
            return Err(Error::IncompleteRow { n, missing });
        }
        let mut acc = 0.0;
        for k in 1..=n {
            acc += s_dnk(n, k, d) * self.get(n, k).unwrap();
        }
        Ok(acc / n as f64)
    }

    /// Minimize [`Self::combine_bound`] over n <= n_max. Ties resolve to
    /// the smallest n.
    pub fn best_bound(&self, d: f64, n_max: u32) -> Result<(f64, u32)> {
        let mut best: Option<(f64, u32)> = None;
        for n in 1..=n_max {
            let bound = self.combine_bound(n, d)?;
            if best.map_or(true, |(b, _)| bound < b) {
                best = Some((bound, n));
            }
        }
        best.ok_or(Error::Infeasible("best_bound needs n_max >= 1".into()))
    }

    pub fn to_records(&self) -> Vec<TableRecord> {
        self.entries
            .iter()
            .map(|(&(n, k), e)| {
                let (provenance, accuracy, method, iterations) = match e.provenance {
                    Provenance::Exact => ("exact", None, None, None),
                    Provenance::Computed {
                        accuracy,
                        method,
                        iterations,
                    } => ("computed", Some(accuracy), Some(method), Some(iterations)),
                    Provenance::Lemma1 => ("lemma1", None, None, None),
                    Provenance::Lemma2 => ("lemma2", None, None, None),
                    Provenance::Lemma3 => ("lemma3", None, None, None),
                };
                TableRecord {
                    n,
                    k,
                    value: e.value,
                    provenance: provenance.to_string(),
                    accuracy,
                    method,
                    iterations,
                }
            })
            .collect()
    }

    pub fn from_records(records: Vec<TableRecord>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for r in records {
            let provenance = match r.provenance.as_str() {
                "exact" => Provenance::Exact,
                "computed" => Provenance::Computed {
                    accuracy: r.accuracy.ok_or_else(|| {
                        Error::InvalidDistribution("computed entry without accuracy".into())
                    })?,
                    method: r.method.ok_or_else(|| {
                        Error::InvalidDistribution("computed entry without method".into())
                    })?,
                    iterations: r.iterations.unwrap_or(0),
                },
                "lemma1" => Provenance::Lemma1,
                "lemma2" => Provenance::Lemma2,
                "lemma3" => Provenance::Lemma3,
                other => {
                    return Err(Error::InvalidDistribution(format!(
                        "unknown provenance {other:?}"
                    )))
                }
            };
            entries.insert((r.n, r.k), TableEntry {
                value: r.value,
                provenance,
            });
        }
        Ok(Self { entries })
    }
}

/// Probability that n bits shrink to k bits under per-bit deletion
/// probability d: the binomial pmf `C(n, k) d^(n-k) (1-d)^k`.
pub fn s_dnk(n: u32, k: u32, d: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    binomial_f64(n, k) * d.powi((n - k) as i32) * (1.0 - d).powi(k as i32)
}

/// Scale a bound at deletion probability `d_prime` out to a larger `d`:
/// the normalized capacity `C(BDC_d) / (1-d)` is nonincreasing in d, so
/// `bound * (1-d) / (1-d_prime)` is valid for every `d >= d_prime`.
pub fn extrapolate_high_d(d_prime: f64, bound_at_d_prime: f64, d: f64) -> Result<f64> {
    if d < d_prime {
        return Err(Error::Infeasible(format!(
            "extrapolation runs upward only: d = {d} < d' = {d_prime}"
        )));
    }
    Ok(bound_at_d_prime * (1.0 - d) / (1.0 - d_prime))
}

/// One point of a bound curve over deletion probabilities.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoundPoint {
    pub d: f64,
    pub bound: f64,
    pub argmin_n: u32,
}

/// A computed upper-bound curve, writable as CSV.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BoundCurve {
    pub points: Vec<BoundPoint>,
}

impl BoundCurve {
    /// Write `d,bound,argmin_n` rows with 17 significant digits. Any
    /// `comments` go first, prefixed with `# `.
    pub fn write_csv<W: IoWrite>(&self, mut w: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "d,bound,argmin_n")?;
        for p in &self.points {
            writeln!(w, "{:.16e},{:.16e},{}", p.d, p.bound, p.argmin_n)?;
        }
        Ok(())
    }
}
