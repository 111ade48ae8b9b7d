//! Property suites over the numerical core.

use proptest::prelude::*;

use delcap::bitstring::{
    dp_embedding_count, transition_probability, BitChannelSpec, BitString, DpOracle,
    EmbeddingCache, TransitionOracle,
};
use delcap::repetition::{q_consecutive, rho, RepetitionChannelSpec, RunLengthDistribution};
use delcap::sparse::SparseTransitionMatrix;
use delcap::tables::s_dnk;

fn bit_pair() -> impl Strategy<Value = (BitString, BitString)> {
    (1u32..=12)
        .prop_flat_map(|n| (Just(n), 0u32..=n))
        .prop_flat_map(|(n, k)| {
            (
                (0u32..(1u32 << n)).prop_map(move |v| BitString::new(v, n)),
                (0u32..(1u32 << k)).prop_map(move |v| BitString::new(v, k)),
            )
        })
}

proptest! {
    /// The number of embeddings is invariant under complementing or
    /// reversing both strings.
    #[test]
    fn embedding_count_symmetries((x, y) in bit_pair()) {
        let count = dp_embedding_count(x, y);
        prop_assert_eq!(count, dp_embedding_count(x.complement(), y.complement()));
        prop_assert_eq!(count, dp_embedding_count(x.reversed(), y.reversed()));
    }

    /// Pascal-style recurrence on the leading bit: embeddings of y in x
    /// split by whether the first output bit uses the first input bit.
    #[test]
    fn embedding_count_recurrence((x, y) in bit_pair()) {
        prop_assume!(x.len > y.len && y.len >= 1);
        let tail = x.suffix(x.len - 1);
        let mut expected = dp_embedding_count(tail, y);
        if x.bit(0) == y.bit(0) {
            expected += dp_embedding_count(tail, y.suffix(y.len - 1));
        }
        prop_assert_eq!(dp_embedding_count(x, y), expected);
    }

    /// The split oracle agrees with direct counting, exactly.
    #[test]
    fn oracle_matches_dp((x, y) in bit_pair()) {
        let ch = BitChannelSpec::new(x.len, y.len).unwrap();
        let cache = EmbeddingCache::build(ch, 1 << 28).unwrap();
        let dp = DpOracle::new(ch);
        prop_assert_eq!(
            cache.embedding_count(x.value, y.value),
            dp.embedding_count(x.value, y.value)
        );
    }

    /// Transition rows are stochastic.
    #[test]
    fn transition_rows_sum_to_one(n in 1u32..=8, seed in any::<u32>()) {
        let k = seed % (n + 1);
        let x = BitString::new(seed.wrapping_mul(2654435761) & ((1 << n) - 1), n);
        let ch = BitChannelSpec::new(n, k).unwrap();
        let sum: f64 = (0..(1u32 << k))
            .map(|y| transition_probability(ch, x, BitString::new(y, k)).unwrap())
            .sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    /// Sparse storage round-trips through the CSR companions for random
    /// sparse matrices.
    #[test]
    fn sparse_round_trip(rows in proptest::collection::vec(
        proptest::collection::vec(0f64..1.0, 8),
        8,
    ), mask in any::<u64>()) {
        let masked: Vec<Vec<f64>> = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, &v)| if (mask >> ((i * 8 + j) % 64)) & 1 == 1 { v } else { 0.0 })
                    .collect()
            })
            .collect();
        let m = SparseTransitionMatrix::from_dense(&masked);
        m.validate().unwrap();
        prop_assert_eq!(m.to_dense(), m.to_dense_via_csr());
    }

    /// The output-length law is a probability distribution.
    #[test]
    fn s_dnk_normalizes(n in 1u32..=24, d in 0f64..=1.0) {
        let total: f64 = (0..=n).map(|k| s_dnk(n, k, d)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    /// The repetition law rows are stochastic for the deletion channel.
    #[test]
    fn rho_rows_normalize(a in 1u32..=48, d in 0f64..0.99) {
        let ch = RepetitionChannelSpec::bdc(d).unwrap();
        let total: f64 = (0..=a).map(|b| rho(&ch, a, b)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    /// Convolutions of the run-length law normalize.
    #[test]
    fn q_consecutive_normalizes(q in 0.05f64..0.95, m in 0usize..4) {
        let p = RunLengthDistribution::truncated_geometric(q, 6);
        let total: f64 = (0..=6 * m).map(|n| q_consecutive(&p, n, m)).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }
}
