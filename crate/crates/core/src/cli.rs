//! Command-line front end: `generate`, `detect`, `eval` and `benchmark`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{run_benchmark, to_csv, BenchConfig};
use crate::error::{Error, Result};
use crate::eval::{format_ground_truth, nmi_cp, parse_ground_truth};
use crate::graph::{load_edge_list, Directedness};
use crate::io::{factor_files, reordered_adjacency_csv, write_all, ResultDocument};
use crate::nmf::{fit_with, FitOptions, Hyperparameters, MaskPrior};
use crate::synthetic::{equal_pair_sizes, generate, generate_overlapping, GroundTruth, PlantedConfig};

#[derive(Debug, Parser)]
#[command(name = "maskcp", version, about = "Core-periphery pair detection with masked Bayesian NMF")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a planted core-periphery network and its ground truth.
    Generate(GenerateArgs),
    /// Fit the model to an edge list and write the detected pairs.
    Detect(DetectArgs),
    /// Score a detection result against ground truth.
    Eval(EvalArgs),
    /// Sweep network sizes and seeds, reporting accuracy and runtime as CSV.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PlantedArgs {
    /// Number of planted pairs when sizes are derived from --n.
    #[arg(long, default_value_t = 2)]
    pub pairs: usize,
    /// Total node count, split evenly across pairs.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Explicit comma-separated pair sizes; overrides --n and --pairs.
    #[arg(long, value_delimiter = ',')]
    pub pair_sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.5)]
    pub core_fraction: f64,
    #[arg(long = "p-cc", default_value_t = 0.6)]
    pub p_cc: f64,
    #[arg(long = "p-cp", default_value_t = 0.6)]
    pub p_cp: f64,
    #[arg(long = "p-pp", default_value_t = 0.05)]
    pub p_pp: f64,
    #[arg(long = "p-cross", default_value_t = 0.05)]
    pub p_cross: f64,
}

impl PlantedArgs {
    fn config(&self, seed: u64) -> Result<PlantedConfig> {
        let pair_sizes = match &self.pair_sizes {
            Some(sizes) => sizes.clone(),
            None => equal_pair_sizes(self.n, self.pairs)?,
        };
        let cfg = PlantedConfig {
            pair_sizes,
            core_fraction: self.core_fraction,
            p_core_core: self.p_cc,
            p_core_periph: self.p_cp,
            p_periph_periph: self.p_pp,
            p_cross: self.p_cross,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaskPriorArg {
    Quadratic,
    Signed,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Initial number of pairs.
    #[arg(long, default_value_t = 32)]
    pub k: usize,
    #[arg(long, default_value_t = 5.0)]
    pub a: f64,
    #[arg(long, default_value_t = 10.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_bar: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_hat: f64,
    #[arg(long, default_value_t = 0.5)]
    pub mu_hat: f64,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub eps: f64,
    /// Relative factor norm below which a pair is pruned.
    #[arg(long, default_value_t = 1e-3)]
    pub prune_threshold: f64,
    /// Split of the mask prior inside the M update.
    #[arg(long, value_enum, default_value_t = MaskPriorArg::Quadratic)]
    pub mask_prior: MaskPriorArg,
    /// Independent seeded starts; the fit with the lowest objective is kept.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
}

impl ModelArgs {
    fn hyperparameters(&self, seed: u64) -> Result<Hyperparameters> {
        let hp = Hyperparameters {
            a: self.a,
            b: self.b,
            sigma_bar: self.sigma_bar,
            sigma_hat: self.sigma_hat,
            mu_hat: self.mu_hat,
            k_init: self.k,
            n_iter: self.iters,
            tol: self.tol,
            seed,
            eps: self.eps,
            prune_threshold: self.prune_threshold,
            mask_prior: match self.mask_prior {
                MaskPriorArg::Quadratic => MaskPrior::Quadratic,
                MaskPriorArg::Signed => MaskPrior::Signed,
            },
            restarts: self.restarts,
        };
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Edge-list output path.
    #[arg(long)]
    pub output: PathBuf,
    /// Ground-truth output path; defaults to `<output>.truth`.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[command(flatten)]
    pub planted: PlantedArgs,
    /// Nodes shared by two pairs (periphery in the first, core in the second).
    #[arg(long, default_value_t = 0)]
    pub overlap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Edge list: `src dst [weight]` per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Result JSON path.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the adjacency reordered by pair and core to this CSV.
    #[arg(long)]
    pub reorder: Option<PathBuf>,
    /// Also write W.csv, H.csv (transposed) and M.csv into this directory.
    #[arg(long)]
    pub dump_factors: Option<PathBuf>,
    /// Worker threads for matrix products; 1 is the deterministic mode.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Result JSON written by `detect`.
    #[arg(long)]
    pub input: PathBuf,
    /// Ground-truth file: `node_id pair_id core_flag` per line.
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Metric JSON path; printed to stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Comma-separated network sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    /// Seeds as a comma-separated list and/or inclusive ranges like `1..5`.
    #[arg(long, default_value = "0..4")]
    pub seeds: String,
    #[command(flatten)]
    pub planted: PlantedArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Runs executed in parallel; each run stays deterministic.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// CSV output path; printed to stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `"1,3,5..7"` into `[1, 3, 5, 6, 7]`.
pub fn parse_seeds(list: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidConfig(format!("cannot parse seed list {list:?}"));
    let mut seeds = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((lo, hi)) => {
                let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
                let hi: u64 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

/// Runs a parsed command, writing human-readable progress to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(&args, out),
        Command::Detect(args) => cmd_detect(&args, out),
        Command::Eval(args) => cmd_eval(&args, out),
        Command::Benchmark(args) => cmd_benchmark(&args, out),
    }
}

fn default_truth_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".truth");
    PathBuf::from(name)
}

/// Ground-truth text: one primary membership per node, followed by
/// `# also` comment lines for the secondary memberships of shared nodes.
pub fn ground_truth_text(ids: &[String], truth: &GroundTruth) -> String {
    let mut text = format_ground_truth(ids, &truth.pair_labels, &truth.core_flags);
    for i in truth.overlapping_nodes() {
        for m in &truth.memberships[i][1..] {
            let _ = writeln!(text, "# also {} {} {}", ids[i], m.pair, u8::from(m.core));
        }
    }
    text
}

pub fn cmd_generate(args: &GenerateArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let cfg = args.planted.config(args.seed)?;
    let (graph, truth) = if args.overlap > 0 {
        generate_overlapping(&cfg, args.overlap)?
    } else {
        generate(&cfg)?
    };
    let truth_path = args
        .ground_truth
        .clone()
        .unwrap_or_else(|| default_truth_path(&args.output));
    write_all(&[
        (args.output.clone(), graph.to_edge_list()),
        (truth_path.clone(), ground_truth_text(graph.node_ids(), &truth)),
    ])?;
    let edges = graph.adjacency().iter().filter(|&&x| x != 0.0).count() / 2;
    writeln!(
        out,
        "N={} pairs={:?} overlap={} edges={} density={:.4}\nwrote {} and {}",
        graph.n(),
        cfg.pair_sizes,
        args.overlap,
        edges,
        graph.density()?,
        args.output.display(),
        truth_path.display()
    )?;
    Ok(())
}

pub fn cmd_detect(args: &DetectArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let hp = args.model.hyperparameters(args.seed)?;
    let graph = load_edge_list(&args.input, Directedness::Undirected)?;
    let result = fit_with(graph.adjacency(), &hp, &FitOptions { threads: args.threads })?;
    let doc = ResultDocument::new(&graph, &result, &hp);

    let mut files = vec![(args.output.clone(), doc.to_json()?)];
    if let Some(path) = &args.reorder {
        files.push((path.clone(), reordered_adjacency_csv(&graph, &doc)));
    }
    if let Some(dir) = &args.dump_factors {
        std::fs::create_dir_all(dir)?;
        files.extend(factor_files(dir, &result));
    }
    write_all(&files)?;

    let cores = result.core_flags.iter().filter(|&&c| c).count();
    writeln!(
        out,
        "N={} active_pairs={} cores={} iterations={} converged={} objective={:.6}",
        graph.n(),
        result.active_pairs.len(),
        cores,
        result.iterations,
        result.converged,
        result.objective_trace.last().copied().unwrap_or(f64::NAN)
    )?;
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let doc = ResultDocument::load(&args.input)?;
    let ids: Vec<String> = doc.nodes.iter().map(|n| n.id.clone()).collect();
    let text = std::fs::read_to_string(&args.ground_truth)?;
    let truth = parse_ground_truth(&text, &ids, &args.ground_truth)?;
    let pairs: Vec<usize> = doc.nodes.iter().map(|n| n.pair).collect();
    let cores: Vec<bool> = doc.nodes.iter().map(|n| n.core).collect();
    let score = nmi_cp(&truth.pairs, &pairs, &truth.cores, &cores)?;
    let mut json = serde_json::to_string_pretty(&score)?;
    json.push('\n');
    match &args.output {
        Some(path) => write_all(&[(path.clone(), json)])?,
        None => out.write_all(json.as_bytes())?,
    }
    Ok(())
}

pub fn cmd_benchmark(args: &BenchmarkArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let cfg = BenchConfig {
        sizes: args.sizes.clone(),
        seeds: parse_seeds(&args.seeds)?,
        pairs: args.planted.pairs,
        planted: args.planted.config(0)?,
        hyperparameters: args.model.hyperparameters(0)?,
        jobs: args.threads,
    };
    let csv = to_csv(&run_benchmark(&cfg)?);
    match &args.output {
        Some(path) => write_all(&[(path.clone(), csv)])?,
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(())
}
