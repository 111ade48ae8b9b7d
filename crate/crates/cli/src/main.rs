//! Command-line driver for deletion-channel capacity bounds.

mod manifest;
mod validate;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use delcap::baa::{baa_dense, baa_lno, baa_sparse, BaaConfig, BaaResult, DenseChannel};
use delcap::bitstring::{BitChannelSpec, EmbeddingCache};
use delcap::heuristic::{basin_hopping, recommended_z_max, BasinHoppingConfig};
use delcap::repetition::{
    md_rate, DistributionFile, RateBreakdown, RepetitionChannelSpec, RunLengthDistribution,
    TruncationConfig,
};
use delcap::sparse::csc_from_oracle;
use delcap::tables::{extrapolate_high_d, BoundCurve, BoundPoint, CapacityTable, Method};
use delcap::util::binomial_u64;
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "delcap", version, about = "Capacity bounds for deletion-type channels")]
struct Cli {
    /// Cap on worker threads for the parallel passes.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Dense,
    Lno,
    Sparse,
    Auto,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ChannelArg {
    Bdc,
    Prc,
}

#[derive(Subcommand)]
enum Command {
    /// Bound C(n, k) with one engine run and record it in a table file.
    CapacityNk {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        k: u32,
        /// Engine; `auto` picks the cheapest that fits the memory budget.
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        #[arg(long, default_value_t = 1e-4)]
        accuracy: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iterations: u64,
        /// Table file to create or update.
        #[arg(long, default_value = "capacity_table.json")]
        table: PathBuf,
        #[arg(long, default_value_t = 8.0)]
        mem_budget_gb: f64,
    },
    /// Fill missing table entries from the combination inequalities.
    FillTable {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        n_max: u32,
        /// Also offer the convex-split inequality to the minimum.
        #[arg(long)]
        use_lemma2: bool,
        /// Output path (defaults to rewriting the input table).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Produce an upper-bound curve over deletion probabilities as CSV.
    UpperBound {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        n_max: u32,
        /// Comma-separated deletion probabilities.
        #[arg(long, conflicts_with = "d_grid")]
        d_list: Option<String>,
        /// Grid start:step:end, e.g. 0.05:0.05:0.95.
        #[arg(long)]
        d_grid: Option<String>,
        /// Replace points beyond this pivot with the scaling extrapolation
        /// from the bound at the pivot.
        #[arg(long)]
        extrapolate_from: Option<f64>,
        #[arg(long)]
        out_csv: PathBuf,
        #[arg(long)]
        use_lemma2: bool,
    },
    /// Optimize a run-length distribution and certify its rate, or
    /// certify a fixed distribution file.
    LowerBound {
        #[arg(long, value_enum)]
        channel: ChannelArg,
        #[arg(long, required_if_eq("channel", "bdc"))]
        d: Option<f64>,
        #[arg(long, required_if_eq("channel", "prc"))]
        lambda: Option<f64>,
        /// Basin-hopping perturbation count.
        #[arg(long, default_value_t = 80)]
        hops: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Support cap; defaults to a channel-dependent size.
        #[arg(long)]
        z_max: Option<usize>,
        #[arg(long, default_value_t = 24)]
        sweep_points: usize,
        /// Certify this fixed distribution file instead of optimizing.
        #[arg(long)]
        dist: Option<PathBuf>,
        /// Exit nonzero if the certified rate falls below this.
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the rate bound for a distribution file.
    EvalDistribution {
        #[arg(long)]
        dist: PathBuf,
        /// Override the file's deletion probability.
        #[arg(long)]
        d: Option<f64>,
        /// Override the file's Poisson parameter.
        #[arg(long, conflicts_with = "d")]
        lambda: Option<f64>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        i_max: Option<usize>,
        #[arg(long)]
        r_max: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the quick self-check property suite.
    Validate,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("thread pool")?;
    }
    match cli.command {
        Command::CapacityNk {
            n,
            k,
            method,
            accuracy,
            max_iterations,
            table,
            mem_budget_gb,
        } => capacity_nk(n, k, method, accuracy, max_iterations, &table, mem_budget_gb),
        Command::FillTable {
            table,
            n_max,
            use_lemma2,
            out,
        } => fill_table(&table, n_max, use_lemma2, out.as_deref()),
        Command::UpperBound {
            table,
            n_max,
            d_list,
            d_grid,
            extrapolate_from,
            out_csv,
            use_lemma2,
        } => upper_bound(
            &table,
            n_max,
            d_list.as_deref(),
            d_grid.as_deref(),
            extrapolate_from,
            &out_csv,
            use_lemma2,
        ),
        Command::LowerBound {
            channel,
            d,
            lambda,
            hops,
            seed,
            z_max,
            sweep_points,
            dist,
            floor,
            out,
        } => lower_bound(
            channel,
            d,
            lambda,
            hops,
            seed,
            z_max,
            sweep_points,
            dist.as_deref(),
            floor,
            &out,
        ),
        Command::EvalDistribution {
            dist,
            d,
            lambda,
            k_max,
            i_max,
            r_max,
            out,
        } => eval_distribution(&dist, d, lambda, k_max, i_max, r_max, &out),
        Command::Validate => validate::run(),
    }
}

/// Wrapper that puts the manifest alongside the payload fields.
#[derive(Serialize)]
struct ReportFile<T: Serialize> {
    manifest: RunManifest,
    #[serde(flatten)]
    body: T,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn budget_bytes(gb: f64) -> u64 {
    (gb * (1u64 << 30) as f64) as u64
}

/// Cheapest feasible engine for one channel under the memory budget:
/// sparse storage when the nonzeros fit comfortably (always the case near
/// the diagonal k close to n), the cache-backed oracle engine otherwise,
/// and the dense reference only when everything fits outright.
fn recommend_method(n: u32, k: u32, budget: u64) -> Result<Method> {
    let per_row = binomial_u64(n, n - k).min(1u64 << k);
    let sparse_bytes = per_row.saturating_mul(1u64 << n).saturating_mul(32);
    let cache_bytes = EmbeddingCache::estimated_bytes(n, k);
    let dense_bytes = 8u64.saturating_mul(1u64 << (n + k));
    if sparse_bytes.saturating_mul(4) <= budget {
        Ok(Method::Sparse)
    } else if cache_bytes.saturating_mul(2) <= budget {
        Ok(Method::Lno)
    } else if dense_bytes <= budget {
        Ok(Method::Dense)
    } else {
        bail!(
            "no engine fits the budget for ({n}, {k}): sparse needs about {sparse_bytes} bytes, \
             the oracle cache {cache_bytes}, dense {dense_bytes}"
        )
    }
}

/// Build the embedding cache, or reuse a cached file under
/// `BDC_CACHE_DIR` when one matches.
fn load_or_build_cache(ch: BitChannelSpec, budget: u64) -> Result<EmbeddingCache> {
    if let Ok(dir) = std::env::var("BDC_CACHE_DIR") {
        let path = Path::new(&dir).join(format!("bdcc_n{}_k{}.bin", ch.n, ch.k));
        if path.exists() {
            if let Ok(cache) = EmbeddingCache::load(&path, ch) {
                return Ok(cache);
            }
            eprintln!("note: ignoring stale cache file {}", path.display());
        }
        let cache = EmbeddingCache::build(ch, budget)?;
        if fs::create_dir_all(&dir).is_ok() {
            if let Err(e) = cache.save(&path) {
                eprintln!("note: could not persist cache: {e}");
            }
        }
        return Ok(cache);
    }
    Ok(EmbeddingCache::build(ch, budget)?)
}

fn load_table(path: &Path) -> Result<CapacityTable> {
    if !path.exists() {
        return Ok(CapacityTable::new());
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let records = serde_json::from_str(&text)
        .with_context(|| format!("parsing table {}", path.display()))?;
    Ok(CapacityTable::from_records(records)?)
}

fn save_table(path: &Path, table: &CapacityTable, manifest: &RunManifest) -> Result<()> {
    write_json(path, &table.to_records())?;
    let sidecar = path.with_extension("manifest.json");
    write_json(&sidecar, manifest)?;
    Ok(())
}

fn capacity_nk(
    n: u32,
    k: u32,
    method: MethodArg,
    accuracy: f64,
    max_iterations: u64,
    table_path: &Path,
    mem_budget_gb: f64,
) -> Result<()> {
    let ch = BitChannelSpec::new(n, k)?;
    let budget = budget_bytes(mem_budget_gb);
    let method = match method {
        MethodArg::Dense => Method::Dense,
        MethodArg::Lno => Method::Lno,
        MethodArg::Sparse => Method::Sparse,
        MethodArg::Auto => {
            let m = recommend_method(n, k, budget)?;
            eprintln!("auto-selected method: {m:?}");
            m
        }
    };
    let cfg = BaaConfig {
        accuracy,
        max_iterations,
        ..Default::default()
    };
    let result: BaaResult = match method {
        Method::Dense => {
            let dense_bytes = 8u64.saturating_mul(1u64 << (n + k));
            if dense_bytes > budget {
                bail!(
                    "dense matrix for ({n}, {k}) needs about {dense_bytes} bytes, \
                     budget is {budget}"
                );
            }
            let cache = load_or_build_cache(ch, budget)?;
            baa_dense(&DenseChannel::from_oracle(ch, &cache), &cfg)?
        }
        Method::Lno => {
            let cache = load_or_build_cache(ch, budget)?;
            baa_lno(&cache, &cfg)?
        }
        Method::Sparse => {
            let cache = load_or_build_cache(ch, budget)?;
            let matrix = csc_from_oracle(ch, &cache, budget)?;
            baa_sparse(&matrix, &cfg)?
        }
    };
    if !result.converged {
        eprintln!(
            "warning: engine hit the iteration cap ({max_iterations}); \
             the recorded bound uses the best iterate"
        );
    }

    let mut table = load_table(table_path)?;
    table.record_computed(n, k, result.rate, accuracy, method, result.iterations);
    let manifest = RunManifest::new("capacity-nk")
        .param("n", n)
        .param("k", k)
        .param("method", format!("{method:?}").to_lowercase())
        .param("accuracy", accuracy)
        .output(table_path.display());
    save_table(table_path, &table, &manifest)?;
    println!(
        "C({n}, {k}) <= {:.12} (rate {:.12}, {} iterations, converged: {})",
        table.get(n, k).unwrap(),
        result.rate,
        result.iterations,
        result.converged
    );
    Ok(())
}

fn fill_table(table_path: &Path, n_max: u32, use_lemma2: bool, out: Option<&Path>) -> Result<()> {
    let mut table = load_table(table_path)?;
    table.fill_unknowns(n_max, use_lemma2)?;
    let out = out.unwrap_or(table_path);
    let manifest = RunManifest::new("fill-table")
        .param("n_max", n_max)
        .param("use_lemma2", use_lemma2)
        .input(table_path.display())
        .output(out.display());
    save_table(out, &table, &manifest)?;
    println!("table now holds {} entries up to n = {n_max}", table.len());
    Ok(())
}

fn parse_d_values(d_list: Option<&str>, d_grid: Option<&str>) -> Result<Vec<f64>> {
    if let Some(list) = d_list {
        return list
            .split(',')
            .map(|s| s.trim().parse::<f64>().context("parsing --d-list"))
            .collect();
    }
    if let Some(grid) = d_grid {
        let parts: Vec<f64> = grid
            .split(':')
            .map(|s| s.trim().parse::<f64>().context("parsing --d-grid"))
            .collect::<Result<_>>()?;
        let [start, step, end] = parts[..] else {
            bail!("--d-grid expects start:step:end");
        };
        if step <= 0.0 {
            bail!("--d-grid step must be positive");
        }
        let mut out = Vec::new();
        let mut i = 0u32;
        loop {
            let d = start + step * i as f64;
            if d > end + 1e-12 {
                break;
            }
            out.push(d);
            i += 1;
        }
        return Ok(out);
    }
    bail!("one of --d-list or --d-grid is required")
}

fn upper_bound(
    table_path: &Path,
    n_max: u32,
    d_list: Option<&str>,
    d_grid: Option<&str>,
    extrapolate_from: Option<f64>,
    out_csv: &Path,
    use_lemma2: bool,
) -> Result<()> {
    let ds = parse_d_values(d_list, d_grid)?;
    let mut table = load_table(table_path)?;
    table.fill_unknowns(n_max, use_lemma2)?;

    let mut points = Vec::new();
    let pivot = match extrapolate_from {
        Some(p) => {
            let (bound, argmin) = table.best_bound(p, n_max)?;
            Some((p, bound, argmin))
        }
        None => None,
    };
    for &d in &ds {
        if !(0.0..=1.0).contains(&d) {
            bail!("deletion probability {d} outside [0, 1]");
        }
        let point = match pivot {
            Some((p, bound_p, argmin_p)) if d > p => BoundPoint {
                d,
                bound: extrapolate_high_d(p, bound_p, d)?,
                argmin_n: argmin_p,
            },
            _ => {
                let (bound, argmin_n) = table.best_bound(d, n_max)?;
                BoundPoint { d, bound, argmin_n }
            }
        };
        points.push(point);
    }
    let curve = BoundCurve { points };
    let manifest = RunManifest::new("upper-bound")
        .param("n_max", n_max)
        .param("d", d_list.or(d_grid).unwrap_or_default())
        .param(
            "extrapolate_from",
            extrapolate_from.map_or("none".to_string(), |p| p.to_string()),
        )
        .input(table_path.display())
        .output(out_csv.display());
    let mut out = Vec::new();
    curve.write_csv(&mut out, &[format!("manifest: {}", serde_json::to_string(&manifest)?)])?;
    fs::write(out_csv, out).with_context(|| format!("writing {}", out_csv.display()))?;
    println!("wrote {} curve points to {}", curve.points.len(), out_csv.display());
    Ok(())
}

fn parse_channel(
    channel: ChannelArg,
    d: Option<f64>,
    lambda: Option<f64>,
) -> Result<RepetitionChannelSpec> {
    Ok(match channel {
        ChannelArg::Bdc => {
            RepetitionChannelSpec::bdc(d.context("--d is required for the deletion channel")?)?
        }
        ChannelArg::Prc => RepetitionChannelSpec::prc(
            lambda.context("--lambda is required for the repeat channel")?,
        )?,
    })
}

#[derive(Serialize)]
struct FixedDistReport {
    channel: RepetitionChannelSpec,
    distribution: Vec<f64>,
    certified_rate: f64,
    tail_certificate: f64,
    breakdown: RateBreakdown,
}

#[allow(clippy::too_many_arguments)]
fn lower_bound(
    channel: ChannelArg,
    d: Option<f64>,
    lambda: Option<f64>,
    hops: u64,
    seed: u64,
    z_max: Option<usize>,
    sweep_points: usize,
    dist: Option<&Path>,
    floor: f64,
    out: &Path,
) -> Result<()> {
    let ch = parse_channel(channel, d, lambda)?;
    let certify = |p: &RunLengthDistribution| {
        let tc = TruncationConfig::auto(&ch, p);
        md_rate(&ch, p, &tc)
    };

    let certified_rate = if let Some(dist_path) = dist {
        // Fixed-input mode: certify the supplied distribution as-is.
        let file: DistributionFile = serde_json::from_str(
            &fs::read_to_string(dist_path)
                .with_context(|| format!("reading {}", dist_path.display()))?,
        )
        .with_context(|| format!("parsing {}", dist_path.display()))?;
        let p = file.distribution()?;
        let breakdown = certify(&p);
        let manifest = RunManifest::new("lower-bound")
            .param("mode", "fixed-distribution")
            .param("channel", format!("{ch:?}"))
            .input(dist_path.display())
            .output(out.display())
            .seed(seed);
        let rate = breakdown.rate;
        write_json(
            out,
            &ReportFile {
                manifest,
                body: FixedDistReport {
                    channel: ch,
                    distribution: p.probs().to_vec(),
                    certified_rate: rate,
                    tail_certificate: breakdown.tail_certificate,
                    breakdown,
                },
            },
        )?;
        rate
    } else {
        let cfg = BasinHoppingConfig {
            iterations: hops,
            seed,
            z_max: z_max.unwrap_or_else(|| recommended_z_max(&ch)),
            sweep_points,
            ..Default::default()
        };
        let report = basin_hopping(&ch, &certify, &cfg)?;
        let manifest = RunManifest::new("lower-bound")
            .param("channel", format!("{ch:?}"))
            .param("hops", hops)
            .param("z_max", cfg.z_max)
            .param("sweep_points", sweep_points)
            .output(out.display())
            .seed(seed);
        let rate = report.certified_rate;
        write_json(
            out,
            &ReportFile {
                manifest,
                body: report,
            },
        )?;
        rate
    };

    println!("certified rate {certified_rate:.12} (floor {floor})");
    if certified_rate < floor {
        std::process::exit(1);
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    channel: RepetitionChannelSpec,
    truncation: TruncationConfig,
    #[serde(flatten)]
    breakdown: RateBreakdown,
}

fn eval_distribution(
    dist_path: &Path,
    d: Option<f64>,
    lambda: Option<f64>,
    k_max: Option<usize>,
    i_max: Option<usize>,
    r_max: Option<usize>,
    out: &Path,
) -> Result<()> {
    let text = fs::read_to_string(dist_path)
        .with_context(|| format!("reading {}", dist_path.display()))?;
    let file: DistributionFile = serde_json::from_str(&text)
        .with_context(|| format!("schema error in {}", dist_path.display()))?;
    let ch = if let Some(d) = d {
        RepetitionChannelSpec::bdc(d)?
    } else if let Some(lambda) = lambda {
        RepetitionChannelSpec::prc(lambda)?
    } else {
        file.channel
    };
    let p = file.distribution()?;
    let mut tc = TruncationConfig::auto(&ch, &p);
    if let Some(k) = k_max {
        tc.k_max = k;
    }
    if let Some(i) = i_max {
        tc.i_max = i;
        tc.r_max = tc.r_max.min(p.z_max() * i);
    }
    if let Some(r) = r_max {
        tc.r_max = r;
    }
    let breakdown = md_rate(&ch, &p, &tc);
    let manifest = RunManifest::new("eval-distribution")
        .param("channel", format!("{ch:?}"))
        .input(dist_path.display())
        .output(out.display());
    println!(
        "rate {:.12} (tail certificate {:.3e})",
        breakdown.rate, breakdown.tail_certificate
    );
    write_json(
        out,
        &ReportFile {
            manifest,
            body: EvalReport {
                channel: ch,
                truncation: tc,
                breakdown,
            },
        },
    )?;
    Ok(())
}
