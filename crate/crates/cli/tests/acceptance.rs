//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measurements (run with `--nocapture` to see them). Every
//! tolerance is pinned here in code.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::LazyLock;
use std::time::Instant;

use delcap::baa::{baa_dense, baa_lno, baa_sparse, BaaConfig, DenseChannel};
use delcap::bitstring::{BitChannelSpec, DpOracle, EmbeddingCache, TransitionOracle};
use delcap::heuristic::{
    basin_hopping, constrained_baa, recommended_z_max, BasinHoppingConfig, ConstrainedBaaConfig,
    RunChannelMatrix,
};
use delcap::repetition::{
    brute_force_reference, joint_tk_entropy, md_rate, prc_to_bdc, RateBreakdown,
    RepetitionChannelSpec, RunLengthDistribution, TruncationConfig,
};
use delcap::sparse::csc_from_oracle;
use delcap::tables::{CapacityTable, Method};
use delcap::util::binary_entropy;

const TABLE_ACCURACY: f64 = 1e-5;
const TABLE_N_MAX: u32 = 12;

/// The computed C(n, k) table shared by criteria 4 and 5: every
/// 1 <= k < n <= 12 at accuracy 1e-5 through the sparse engine.
static TABLE: LazyLock<CapacityTable> = LazyLock::new(|| {
    let mut table = CapacityTable::new();
    table.seed_exact(TABLE_N_MAX);
    let cfg = BaaConfig::with_accuracy(TABLE_ACCURACY);
    for n in 2..=TABLE_N_MAX {
        for k in 1..n {
            let ch = BitChannelSpec::new(n, k).unwrap();
            let cache = EmbeddingCache::build(ch, 1 << 32).unwrap();
            let m = csc_from_oracle(ch, &cache, 1 << 32).unwrap();
            let r = baa_sparse(&m, &cfg).unwrap();
            assert!(r.converged, "W({n},{k}) did not converge");
            table.record_computed(n, k, r.rate, TABLE_ACCURACY, Method::Sparse, r.iterations);
        }
    }
    table
});

fn certify(ch: &RepetitionChannelSpec, p: &RunLengthDistribution) -> RateBreakdown {
    let tc = TruncationConfig::auto(ch, p);
    md_rate(ch, p, &tc)
}

/// Criterion 1: all three engines reproduce the closed-form capacity
/// 1 - h(d) of the binary symmetric channel within accuracy + 1e-9, in
/// under a second each.
#[test]
fn criterion_1_analytic_channel_reproduction() {
    let accuracy = 1e-6;
    let cfg = BaaConfig::with_accuracy(accuracy);
    for flip in [0.0, 0.1, 0.25, 0.5] {
        let expected = 1.0 - binary_entropy(flip);
        let channel = DenseChannel::bsc(flip);
        let sparse_m = delcap::sparse::SparseTransitionMatrix::from_dense(&[
            vec![1.0 - flip, flip],
            vec![flip, 1.0 - flip],
        ]);
        let runs: [(&str, Box<dyn Fn() -> f64>); 3] = [
            ("dense", Box::new(|| baa_dense(&channel, &cfg).unwrap().rate)),
            ("lno", Box::new(|| baa_lno(&channel, &cfg).unwrap().rate)),
            ("sparse", Box::new(|| baa_sparse(&sparse_m, &cfg).unwrap().rate)),
        ];
        for (name, run) in runs {
            let t0 = Instant::now();
            let rate = run();
            let elapsed = t0.elapsed();
            assert!(
                (rate - expected).abs() <= accuracy + 1e-9,
                "{name} on BSC({flip}): rate {rate}, expected {expected}"
            );
            assert!(elapsed.as_secs_f64() < 1.0, "{name} took {elapsed:?}");
        }
    }
    println!("ACCEPTANCE 1: PASS — three engines match 1 - h(d) on the BSC grid");
}

/// Criterion 2: engine equivalence. Exhaustive over n <= 8 (all k) and 20
/// seeded draws with 9 <= n <= 12: rates within 1e-9, iterate sequences
/// within 1e-10.
#[test]
fn criterion_2_engine_equivalence() {
    let mut worst_rate: f64 = 0.0;
    let mut worst_iterate: f64 = 0.0;
    let mut compare = |n: u32, k: u32, cfg: &BaaConfig| {
        let ch = BitChannelSpec::new(n, k).unwrap();
        let cache = EmbeddingCache::build(ch, 1 << 32).unwrap();
        let dense = baa_dense(&DenseChannel::from_oracle(ch, &cache), cfg).unwrap();
        let lno = baa_lno(&cache, cfg).unwrap();
        let m = csc_from_oracle(ch, &cache, 1 << 32).unwrap();
        let sparse = baa_sparse(&m, cfg).unwrap();
        assert_eq!(dense.iterations, lno.iterations, "W({n},{k}) iteration count");
        assert_eq!(dense.iterations, sparse.iterations, "W({n},{k}) iteration count");
        for other in [&lno, &sparse] {
            let dr = (dense.rate - other.rate).abs();
            assert!(dr <= 1e-9, "W({n},{k}) rates differ by {dr}");
            worst_rate = worst_rate.max(dr);
            assert_eq!(dense.iterates.len(), other.iterates.len());
            for (a, b) in dense.iterates.iter().zip(&other.iterates) {
                for (x, y) in a.iter().zip(b) {
                    let di = (x - y).abs();
                    assert!(di <= 1e-10, "W({n},{k}) iterates differ by {di}");
                    worst_iterate = worst_iterate.max(di);
                }
            }
        }
    };

    let cfg_small = BaaConfig {
        accuracy: 1e-6,
        record_iterates: true,
        ..Default::default()
    };
    for n in 1..=8u32 {
        for k in 1..=n {
            compare(n, k, &cfg_small);
        }
    }
    // Seeded pseudo-random draws over 9 <= n <= 12; capped iterations
    // keep the recorded sequences small while still exercising every
    // engine on identical work.
    let cfg_large = BaaConfig {
        accuracy: 1e-4,
        max_iterations: 200,
        record_iterates: true,
        ..Default::default()
    };
    let mut state = 0x243f6a8885a308d3u64;
    for _ in 0..20 {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let n = 9 + (state >> 33) % 4;
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let k = 1 + (state >> 33) % n;
        compare(n as u32, k as u32, &cfg_large);
    }
    println!(
        "ACCEPTANCE 2: PASS — worst rate gap {worst_rate:.2e}, worst iterate gap {worst_iterate:.2e}"
    );
}

/// Criterion 3: oracle exactness. The cache-split oracle equals the
/// direct count for every pair at n <= 8 and for 1e5 seeded pairs at
/// n <= 16, as exact integers.
#[test]
fn criterion_3_oracle_exactness() {
    let t0 = Instant::now();
    for n in 1..=8u32 {
        for k in 0..=n {
            let ch = BitChannelSpec::new(n, k).unwrap();
            let cache = EmbeddingCache::build(ch, 1 << 28).unwrap();
            let dp = DpOracle::new(ch);
            for x in 0..(1u32 << n) {
                for y in 0..(1u32 << k) {
                    assert_eq!(
                        cache.embedding_count(x, y),
                        dp.embedding_count(x, y),
                        "n={n} k={k} x={x} y={y}"
                    );
                }
            }
        }
    }
    // Larger channels, sampled pairs.
    let combos = [(13u32, 9u32), (14, 10), (15, 11), (16, 12), (16, 8), (13, 12)];
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut checked = 0u64;
    for (n, k) in combos {
        let ch = BitChannelSpec::new(n, k).unwrap();
        let cache = EmbeddingCache::build(ch, 1 << 32).unwrap();
        let dp = DpOracle::new(ch);
        for _ in 0..(100_000 / combos.len()) {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let x = (state >> 32) as u32 & ((1 << n) - 1);
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let y = (state >> 32) as u32 & ((1 << k) - 1);
            assert_eq!(cache.embedding_count(x, y), dp.embedding_count(x, y));
            checked += 1;
        }
    }
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 60, "oracle check took {elapsed:?}");
    println!(
        "ACCEPTANCE 3: PASS — exhaustive n <= 8 plus {checked} sampled pairs, exact, in {elapsed:?}"
    );
}

/// Criterion 4: the three filling inequalities hold on computed entries
/// up to n = 12 at accuracy 1e-5 with slack 2a.
#[test]
fn criterion_4_lemma_consistency() {
    let table = &*TABLE;
    let slack = 2.0 * TABLE_ACCURACY;
    let mut checked = 0;
    for n in 2..=TABLE_N_MAX {
        for k in 1..n {
            let value = table.get(n, k).unwrap();
            assert!(value <= k as f64 + 1e-12);
            // monotone in input length
            let above = table.lemma1_bound(n, k).unwrap();
            assert!(
                value <= above + slack,
                "C({n},{k}) = {value} above C({},{k}) = {above}",
                n - 1
            );
            // convex split, where applicable
            if k <= n - 1 {
                let b2 = table.lemma2_bound(n, k).unwrap();
                assert!(value <= b2 + slack, "C({n},{k}) = {value} above split {b2}");
            }
            // block split for every s
            for s in 1..n {
                let b3 = table.lemma3_bound(n, k, s).unwrap();
                assert!(
                    value <= b3 + slack,
                    "C({n},{k}) = {value} above block bound {b3} at s = {s}"
                );
                checked += 1;
            }
        }
    }
    println!("ACCEPTANCE 4: PASS — {checked} inequality instances hold with slack {slack:.0e}");
}

/// Table 1 anchors: published (d, bound) pairs at their stated n; our
/// smaller-n bounds may be looser but must never dip below them.
const PUBLISHED_UPPER: &[(f64, f64)] = &[
    (0.05, 0.8139),
    (0.10, 0.6762),
    (0.15, 0.5660),
    (0.20, 0.4786),
    (0.25, 0.4083),
    (0.30, 0.3513),
    (0.35, 0.3045),
    (0.40, 0.2648),
    (0.45, 0.2309),
    (0.50, 0.2015),
    (0.55, 0.1755),
    (0.60, 0.1524),
    (0.65, 0.1313),
    (0.68, 0.1199),
];

/// Criterion 5: upper-bound validity. The n_max = 12 curve dominates the
/// certified lower bounds across the 0.05 grid, sits at or above the
/// published larger-n values, stays above 0.104075 at d = 0.5, and is
/// weakly decreasing in n_max.
#[test]
fn criterion_5_upper_bound_validity() {
    let mut table = TABLE.clone();
    table.fill_unknowns(TABLE_N_MAX, false).unwrap();

    // weakly decreasing in n_max
    for d in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let mut last = f64::INFINITY;
        for n_max in 1..=TABLE_N_MAX {
            let (bound, _) = table.best_bound(d, n_max).unwrap();
            assert!(
                bound <= last + 1e-12,
                "best bound grew with n_max at d={d}: {bound} > {last}"
            );
            last = bound;
        }
    }

    // never below the published larger-n bounds
    for &(d, published) in PUBLISHED_UPPER {
        let (bound, _) = table.best_bound(d, TABLE_N_MAX).unwrap();
        assert!(
            bound >= published - 1e-4,
            "bound {bound} at d={d} dips below the published {published}"
        );
    }

    let (bound_half, _) = table.best_bound(0.5, TABLE_N_MAX).unwrap();
    assert!(bound_half >= 0.104075, "upper bound at 0.5 is {bound_half}");

    // dominance over the certified lower-bound pipeline on the 0.05 grid
    let mut worst_margin = f64::INFINITY;
    for i in 1..=19u32 {
        let d = 0.05 * i as f64;
        let (upper, _) = table.best_bound(d, TABLE_N_MAX).unwrap();
        let ch = RepetitionChannelSpec::bdc(d).unwrap();
        let cfg = BasinHoppingConfig {
            iterations: 6,
            seed: 5,
            z_max: recommended_z_max(&ch).min(224),
            sweep_points: 10,
            ..Default::default()
        };
        let report = basin_hopping(&ch, &|p| certify(&ch, p), &cfg).unwrap();
        assert!(
            report.certified_rate <= upper,
            "lower bound {} beats upper bound {upper} at d={d}",
            report.certified_rate
        );
        worst_margin = worst_margin.min(upper - report.certified_rate);
    }
    println!(
        "ACCEPTANCE 5: PASS — n_max=12 curve dominates certified rates (closest margin {worst_margin:.4}), bound(0.5) = {bound_half:.6} >= 0.104075"
    );
}

/// Criterion 6: the decomposition of H(T, K) equals exhaustive type
/// enumeration within 1e-9 on small truncation windows.
#[test]
fn criterion_6_entropy_decomposition() {
    let t0 = Instant::now();
    let dists = [
        RunLengthDistribution::delta(2, 4),
        RunLengthDistribution::from_probs(vec![0.5, 0.5, 0.0, 0.0]).unwrap(),
        RunLengthDistribution::truncated_geometric(0.5, 4),
    ];
    let tc = TruncationConfig {
        z_max: 4,
        k_max: 8,
        i_max: 2,
        r_max: 8,
    };
    let mut worst: f64 = 0.0;
    for d in [0.2, 0.5] {
        let ch = RepetitionChannelSpec::bdc(d).unwrap();
        for p in &dists {
            let brute = brute_force_reference(&ch, p, &tc);
            let (h_tk, h_k) = joint_tk_entropy(&ch, p, &tc);
            let err = (h_tk - brute.h_tk).abs().max((h_k - brute.h_k).abs());
            assert!(
                err <= 1e-9,
                "d={d}: decomposition H(T,K)={h_tk}, H(K)={h_k} vs enumeration {}, {}",
                brute.h_tk,
                brute.h_k
            );
            worst = worst.max(err);
            assert!(h_tk >= h_k - 1e-12);
        }
    }
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 30);
    println!("ACCEPTANCE 6: PASS — worst deviation {worst:.2e} in {elapsed:?}");
}

/// Criterion 7: certified lower bounds with default budgets reach the
/// reproduction bands: 0.0120 at d=0.9, 0.1010 at d=0.5, and 0.0225 for
/// the Poisson repeat channel at 0.19; each within the 30-minute budget.
/// Rates above the published values must carry a sub-1e-9 certificate.
#[test]
fn criterion_7_lower_bound_reproduction() {
    let cases = [
        (RepetitionChannelSpec::bdc(0.9).unwrap(), 0.0120, 0.012379, "bdc d=0.9"),
        (RepetitionChannelSpec::bdc(0.5).unwrap(), 0.1010, 0.104075, "bdc d=0.5"),
        (RepetitionChannelSpec::prc(0.19).unwrap(), 0.0225, 0.0232, "prc lambda=0.19"),
    ];
    for (ch, floor, published, label) in cases {
        let t0 = Instant::now();
        let cfg = BasinHoppingConfig {
            seed: 11,
            ..BasinHoppingConfig::for_channel(&ch)
        };
        let report = basin_hopping(&ch, &|p| certify(&ch, p), &cfg).unwrap();
        let elapsed = t0.elapsed();
        assert!(
            report.certified_rate >= floor,
            "{label}: certified {} below the band floor {floor}",
            report.certified_rate
        );
        assert!(elapsed.as_secs() < 1800, "{label} took {elapsed:?}");
        if report.certified_rate > published {
            // exceeding the published value: audit the truncation loss
            assert!(
                report.tail_certificate < 1e-9,
                "{label}: rate {} above published {published} with certificate {}",
                report.certified_rate,
                report.tail_certificate
            );
        }
        if let RepetitionChannelSpec::Prc { lambda } = ch {
            let at_bdc = prc_to_bdc(report.certified_rate, lambda, 0.95);
            assert!(at_bdc > 0.0);
        }
        println!(
            "ACCEPTANCE 7 ({label}): PASS — certified {:.6} (floor {floor}, published {published}) in {elapsed:?}",
            report.certified_rate
        );
    }
}

/// Criterion 8: the constrained optimum is nondecreasing in the target
/// mean on a 12-point log grid, within 1e-6.
#[test]
fn criterion_8_constrained_optimum_monotone() {
    let ch = RepetitionChannelSpec::bdc(0.5).unwrap();
    let m = RunChannelMatrix::for_channel(&ch, 64);
    let cfg = ConstrainedBaaConfig {
        accuracy: 5e-7,
        max_iterations: 3_000_000,
        ..Default::default()
    };
    let mut values = Vec::new();
    for j in 0..12 {
        let ell = 12.0f64.powf(j as f64 / 11.0); // 1 .. 12 on a log grid
        let res = constrained_baa(&m, 1.0, ell, &cfg).unwrap();
        assert!(res.converged, "solver not certified at ell={ell}, gap {}", res.gap);
        values.push((ell, res.objective));
    }
    for pair in values.windows(2) {
        assert!(
            pair[1].1 >= pair[0].1 - 1e-6,
            "objective decreased along the grid: {pair:?}"
        );
    }
    println!("ACCEPTANCE 8: PASS — I(ell) nondecreasing over {values:.4?}");
}

/// Criterion 9: byte-identical outputs for every command under a fixed
/// seed, across two consecutive runs.
#[test]
fn criterion_9_cli_determinism() {
    let run = |dir: &Path, args: &[&str]| -> (Vec<u8>, Vec<u8>) {
        let out = Command::new(env!("CARGO_BIN_EXE_delcap"))
            .args(args)
            .current_dir(dir)
            .output()
            .expect("binary runs");
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        (out.stdout, out.stderr)
    };
    let dist = serde_json::json!({
        "channel": {"kind": "bdc", "param": 0.5},
        "Z_max": 4,
        "probs": [0.4, 0.3, 0.2, 0.1],
        "metadata": {}
    })
    .to_string();

    let commands: Vec<Vec<&str>> = vec![
        vec!["capacity-nk", "--n", "5", "--k", "3", "--accuracy", "1e-5", "--table", "t.json"],
        vec!["fill-table", "--table", "t.json", "--n-max", "7"],
        vec![
            "upper-bound", "--table", "t.json", "--n-max", "7", "--d-grid", "0.1:0.2:0.9",
            "--out-csv", "curve.csv",
        ],
        vec![
            "lower-bound", "--channel", "bdc", "--d", "0.9", "--seed", "7", "--hops", "2",
            "--z-max", "32", "--sweep-points", "4", "--out", "lb.json",
        ],
        vec!["eval-distribution", "--dist", "dist.json", "--out", "eval.json"],
        vec!["validate"],
    ];
    let artifacts = ["t.json", "curve.csv", "lb.json", "eval.json"];

    let mut captured: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("dist.json"), &dist).unwrap();
        let mut files = Vec::new();
        for args in &commands {
            let (stdout, _) = run(dir.path(), args);
            files.push((format!("stdout:{}", args[0]), stdout));
        }
        for name in artifacts {
            files.push((
                name.to_string(),
                fs::read(dir.path().join(name)).unwrap_or_default(),
            ));
        }
        captured.push(files);
    }
    for (a, b) in captured[0].iter().zip(&captured[1]) {
        assert_eq!(a.0, b.0);
        assert!(
            a.1 == b.1,
            "artifact {} differs between identical runs",
            a.0
        );
    }
    println!("ACCEPTANCE 9: PASS — byte-identical outputs across repeated runs");
}
