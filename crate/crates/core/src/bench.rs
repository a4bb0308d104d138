//! Seeded recovery and runtime sweeps over planted networks.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::baseline::degree_rank;
use crate::error::{Error, Result};
use crate::eval::nmi_cp;
use crate::nmf::{fit, Hyperparameters};
use crate::synthetic::{equal_pair_sizes, generate, PlantedConfig};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Number of planted pairs; sizes are split evenly.
    pub pairs: usize,
    /// Generator probabilities and core fraction; pair sizes and seed are
    /// overwritten per run.
    pub planted: PlantedConfig,
    /// Model settings; the seed is overwritten per run.
    pub hyperparameters: Hyperparameters,
    /// Independent runs executed at once.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    /// `None` marks the per-size average row.
    pub seed: Option<u64>,
    pub nmi_cp: f64,
    pub baseline_nmi_cp: f64,
    pub seconds_per_iter: f64,
    pub total_seconds: f64,
    pub iterations: f64,
}

/// Generates, fits and scores one network per `(size, seed)`, then appends
/// one average row per size.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.sizes.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidConfig("benchmark needs at least one size and one seed".into()));
    }
    cfg.hyperparameters.validate()?;
    let runs: Vec<(usize, u64)> = cfg
        .sizes
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let one = |&(n, seed): &(usize, u64)| run_one(cfg, n, seed);
    let rows: Vec<BenchRow> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| runs.par_iter().map(one).collect::<Result<_>>())?
    } else {
        runs.iter().map(one).collect::<Result<_>>()?
    };

    let mut out = Vec::with_capacity(rows.len() + cfg.sizes.len());
    for (chunk, &n) in rows.chunks(cfg.seeds.len()).zip(&cfg.sizes) {
        out.extend_from_slice(chunk);
        let mean = |f: fn(&BenchRow) -> f64| chunk.iter().map(f).sum::<f64>() / chunk.len() as f64;
        out.push(BenchRow {
            n,
            seed: None,
            nmi_cp: mean(|r| r.nmi_cp),
            baseline_nmi_cp: mean(|r| r.baseline_nmi_cp),
            seconds_per_iter: mean(|r| r.seconds_per_iter),
            total_seconds: mean(|r| r.total_seconds),
            iterations: mean(|r| r.iterations),
        });
    }
    Ok(out)
}

fn run_one(cfg: &BenchConfig, n: usize, seed: u64) -> Result<BenchRow> {
    let planted = PlantedConfig {
        pair_sizes: equal_pair_sizes(n, cfg.pairs)?,
        seed,
        ..cfg.planted.clone()
    };
    let (graph, truth) = generate(&planted)?;
    let hp = Hyperparameters {
        seed,
        ..cfg.hyperparameters.clone()
    };
    let start = Instant::now();
    let result = fit(graph.adjacency(), &hp)?;
    let total = start.elapsed().as_secs_f64();
    let score = nmi_cp(&truth.pair_labels, &result.pair_labels, &truth.core_flags, &result.core_flags)?;
    let (base_pairs, base_cores) = degree_rank(&graph);
    let base = nmi_cp(&truth.pair_labels, &base_pairs, &truth.core_flags, &base_cores)?;
    Ok(BenchRow {
        n,
        seed: Some(seed),
        nmi_cp: score.nmi_cp,
        baseline_nmi_cp: base.nmi_cp,
        seconds_per_iter: total / result.iterations.max(1) as f64,
        total_seconds: total,
        iterations: result.iterations as f64,
    })
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out =
        String::from("N,seed,nmi_cp,seconds_per_iter,total_seconds,iterations,baseline_nmi_cp\n");
    for r in rows {
        let seed = r.seed.map_or_else(|| "mean".to_owned(), |s| s.to_string());
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6e},{:.6},{},{:.6}",
            r.n, seed, r.nmi_cp, r.seconds_per_iter, r.total_seconds, r.iterations, r.baseline_nmi_cp
        );
    }
    out
}
