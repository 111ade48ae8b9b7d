//! Small numeric helpers shared across modules.

/// Exact binomial coefficient.
///
/// Callers stay within n <= 64 where every intermediate fits a u128;
/// the result itself is asserted to fit u64.
pub fn binomial_u64(n: u32, k: u32) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc * (n as u128 - i) / (i + 1);
    }
    u64::try_from(acc).expect("binomial coefficient exceeds u64")
}

/// Binomial coefficient as f64 (exact for the n <= 32 range used here).
pub fn binomial_f64(n: u32, k: u32) -> f64 {
    binomial_u64(n, k) as f64
}

/// x * log2(x) with the 0 log 0 = 0 convention.
pub fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits of a (sub)probability vector.
pub fn entropy_bits(probs: &[f64]) -> f64 {
    -probs.iter().map(|&p| xlog2x(p)).sum::<f64>()
}

/// Binary entropy function in bits.
pub fn binary_entropy(p: f64) -> f64 {
    -xlog2x(p) - xlog2x(1.0 - p)
}
