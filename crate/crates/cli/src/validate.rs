//! The `validate` subcommand: a quick self-check over the property suites
//! that guard the numerical core. One PASS/FAIL line per check.

use anyhow::{bail, Result};

use delcap::baa::{baa_dense, baa_lno, baa_sparse, BaaConfig, DenseChannel};
use delcap::bitstring::{transition_probability, BitChannelSpec, BitString, DpOracle, EmbeddingCache, TransitionOracle};
use delcap::heuristic::{constrained_baa, ConstrainedBaaConfig, RunChannelMatrix};
use delcap::repetition::{
    brute_force_reference, joint_tk_entropy, md_rate, output_run_distribution,
    RepetitionChannelSpec, RunLengthDistribution, TruncationConfig,
};
use delcap::sparse::csc_from_oracle;
use delcap::tables::{CapacityTable, Method};

type Check = (&'static str, fn() -> std::result::Result<(), String>);

pub fn run() -> Result<()> {
    let checks: &[Check] = &[
        ("row-stochasticity of W(n,k) transitions", check_rows),
        ("cache-split oracle equals direct counting", check_oracle),
        ("dense/lno/sparse engines agree", check_engines),
        ("sparse row companions round-trip", check_sparse),
        ("lemma consistency on computed entries", check_lemmas),
        ("noiseless rate bound collapses to entropy rate", check_noiseless),
        ("type-entropy decomposition matches enumeration", check_brute_force),
        ("output-run distribution mass is certified", check_k_mass),
        ("constrained solver pins the mean and ascends", check_constrained),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("PASS {name}"),
            Err(msg) => {
                failures += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    if failures > 0 {
        bail!("{failures} validation check(s) failed");
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

fn check_rows() -> std::result::Result<(), String> {
    for n in 1..=6u32 {
        for k in 0..=n {
            let ch = BitChannelSpec::new(n, k).unwrap();
            for x in 0..(1u32 << n) {
                let sum: f64 = (0..(1u32 << k))
                    .map(|y| {
                        transition_probability(ch, BitString::new(x, n), BitString::new(y, k))
                            .unwrap()
                    })
                    .sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(format!("row {x} of W({n},{k}) sums to {sum}"));
                }
            }
        }
    }
    Ok(())
}

fn check_oracle() -> std::result::Result<(), String> {
    for n in 1..=6u32 {
        for k in 0..=n {
            let ch = BitChannelSpec::new(n, k).unwrap();
            let cache = EmbeddingCache::build(ch, 1 << 28).map_err(|e| e.to_string())?;
            let dp = DpOracle::new(ch);
            for x in 0..(1u32 << n) {
                for y in 0..(1u32 << k) {
                    if cache.embedding_count(x, y) != dp.embedding_count(x, y) {
                        return Err(format!("count mismatch at n={n} k={k} x={x} y={y}"));
                    }
                }
            }
        }
    }
    Ok(())
}

fn check_engines() -> std::result::Result<(), String> {
    let cfg = BaaConfig::with_accuracy(1e-6);
    for (n, k) in [(5u32, 3u32), (6, 5), (6, 2)] {
        let ch = BitChannelSpec::new(n, k).unwrap();
        let oracle = DpOracle::new(ch);
        let dense = baa_dense(&DenseChannel::from_oracle(ch, &oracle), &cfg)
            .map_err(|e| e.to_string())?;
        let lno = baa_lno(&oracle, &cfg).map_err(|e| e.to_string())?;
        let m = csc_from_oracle(ch, &oracle, 1 << 28).map_err(|e| e.to_string())?;
        let sparse = baa_sparse(&m, &cfg).map_err(|e| e.to_string())?;
        if (dense.rate - lno.rate).abs() > 1e-9 || (dense.rate - sparse.rate).abs() > 1e-9 {
            return Err(format!(
                "rates diverge on W({n},{k}): dense {} lno {} sparse {}",
                dense.rate, lno.rate, sparse.rate
            ));
        }
    }
    Ok(())
}

fn check_sparse() -> std::result::Result<(), String> {
    let ch = BitChannelSpec::new(6, 4).unwrap();
    let m = csc_from_oracle(ch, &DpOracle::new(ch), 1 << 28).map_err(|e| e.to_string())?;
    m.validate().map_err(|e| e.to_string())?;
    if m.to_dense() != m.to_dense_via_csr() {
        return Err("CSC and CSR reconstructions differ".to_string());
    }
    Ok(())
}

fn check_lemmas() -> std::result::Result<(), String> {
    let accuracy = 1e-5;
    let cfg = BaaConfig::with_accuracy(accuracy);
    let mut table = CapacityTable::new();
    table.seed_exact(5);
    for n in 2..=5u32 {
        for k in 1..n {
            let ch = BitChannelSpec::new(n, k).unwrap();
            let m = csc_from_oracle(ch, &DpOracle::new(ch), 1 << 28).map_err(|e| e.to_string())?;
            let r = baa_sparse(&m, &cfg).map_err(|e| e.to_string())?;
            table.record_computed(n, k, r.rate, accuracy, Method::Sparse, r.iterations);
        }
    }
    let slack = 2.0 * accuracy;
    for n in 2..=5u32 {
        for k in 1..n {
            let value = table.get(n, k).unwrap();
            let above = table.lemma1_bound(n, k).map_err(|e| e.to_string())?;
            if value > above + slack {
                return Err(format!("C({n},{k}) = {value} exceeds C({},{k}) = {above}", n - 1));
            }
            for s in 1..n {
                let b3 = table.lemma3_bound(n, k, s).map_err(|e| e.to_string())?;
                if value > b3 + slack {
                    return Err(format!("C({n},{k}) = {value} exceeds split bound {b3} at s={s}"));
                }
            }
        }
    }
    Ok(())
}

fn check_noiseless() -> std::result::Result<(), String> {
    let ch = RepetitionChannelSpec::bdc(0.0).unwrap();
    let p = RunLengthDistribution::from_probs(vec![0.5, 0.5]).unwrap();
    let tc = TruncationConfig::auto(&ch, &p);
    let r = md_rate(&ch, &p, &tc);
    if (r.rate - 2.0 / 3.0).abs() > 1e-12 {
        return Err(format!("noiseless rate {} is not 2/3", r.rate));
    }
    Ok(())
}

fn check_brute_force() -> std::result::Result<(), String> {
    let ch = RepetitionChannelSpec::bdc(0.3).unwrap();
    let p = RunLengthDistribution::from_probs(vec![0.5, 0.5]).unwrap();
    let tc = TruncationConfig {
        z_max: 2,
        k_max: 8,
        i_max: 2,
        r_max: 4,
    };
    let brute = brute_force_reference(&ch, &p, &tc);
    let (h_tk, h_k) = joint_tk_entropy(&ch, &p, &tc);
    if (h_tk - brute.h_tk).abs() > 1e-9 || (h_k - brute.h_k).abs() > 1e-9 {
        return Err(format!(
            "decomposition H(T,K) = {h_tk}, H(K) = {h_k} vs enumeration {} / {}",
            brute.h_tk, brute.h_k
        ));
    }
    Ok(())
}

fn check_k_mass() -> std::result::Result<(), String> {
    let ch = RepetitionChannelSpec::bdc(0.5).unwrap();
    let p = RunLengthDistribution::truncated_geometric(0.5, 32);
    let tc = TruncationConfig::auto(&ch, &p);
    let kd = output_run_distribution(&ch, &p, &tc);
    let mass: f64 = kd.probs().iter().sum();
    if (1.0 - mass - kd.tail_certificate).abs() > 1e-12 {
        return Err(format!(
            "mass {mass} and certificate {} do not account for 1",
            kd.tail_certificate
        ));
    }
    if kd.tail_certificate > 1e-9 {
        return Err(format!("certificate {} above 1e-9", kd.tail_certificate));
    }
    Ok(())
}

fn check_constrained() -> std::result::Result<(), String> {
    let ch = RepetitionChannelSpec::bdc(0.4).unwrap();
    let m = RunChannelMatrix::for_channel(&ch, 16);
    let cfg = ConstrainedBaaConfig {
        accuracy: 1e-6,
        record_objective_trace: true,
        ..Default::default()
    };
    let res = constrained_baa(&m, 0.8, 3.0, &cfg).map_err(|e| e.to_string())?;
    if (res.distribution.mean() - 3.0).abs() > 1e-7 {
        return Err(format!("mean {} missed the target 3", res.distribution.mean()));
    }
    for pair in res.objective_trace.windows(2) {
        if pair[1] < pair[0] - 1e-12 {
            return Err(format!("objective decreased: {} -> {}", pair[0], pair[1]));
        }
    }
    Ok(())
}
