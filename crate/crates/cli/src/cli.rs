//! Command-line front end. Results go to files or standard output; progress
//! and timing go to standard error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anticooc_core::combine::CombineMode;
use anticooc_core::pipeline::{analyze, pairwise_baseline, test_set, AnalysisConfig, Correction};
use anticooc_core::simulate::{simulate_null, simulate_planted};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::export::{export_report, format_ln_sci, Mode, RunInfo};
use crate::io::{load_matrix, save_matrix};
use crate::par::RayonExecutor;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "anticooc",
    version,
    about = "Exact group-wise tests for anti-co-occurring alteration sets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for significant anti-co-occurring sets and write a report.
    Run(RunArgs),
    /// Write a simulated matrix and groups file.
    Simulate(SimulateArgs),
    /// Test one set and print per-group and combined p-values.
    TestOne(TestOneArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorrectionArg {
    Bonferroni,
    Bh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Mid,
    Randomized,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub groups: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_weights: f64,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = CorrectionArg::Bonferroni)]
    pub correction: CorrectionArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Test all pairs with mid-p combination and plain Bonferroni instead.
    #[arg(long)]
    pub pairwise_baseline: bool,
    /// Also write the greedy candidate pool.
    #[arg(long)]
    pub dump_pool: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Comma-separated sample counts, one per group.
    #[arg(long, value_delimiter = ',', required = true)]
    pub group_sizes: Vec<u32>,
    /// Independent background rows.
    #[arg(long)]
    pub rows: usize,
    /// Per-group coverage range of background rows.
    #[arg(long, default_value_t = 5)]
    pub min_coverage: u32,
    #[arg(long, default_value_t = 30)]
    pub max_coverage: u32,
    /// Rows of a planted perfectly exclusive set, placed first.
    #[arg(long, default_value_t = 0)]
    pub plant: usize,
    /// Per-group coverage of each planted row.
    #[arg(long, default_value_t = 20)]
    pub plant_coverage: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TestOneArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub groups: PathBuf,
    /// Comma-separated row labels.
    #[arg(long)]
    pub set: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Mid)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn progress(start: Instant, what: &str) {
    eprintln!("[{:>8.2}s] {what}", start.elapsed().as_secs_f64());
}

fn run(args: &RunArgs) -> Result<()> {
    let start = Instant::now();
    let config = AnalysisConfig {
        k_max: args.kmax,
        max_iter: args.max_iter,
        alpha_w: args.alpha_weights,
        level: args.level,
        correction: match args.correction {
            CorrectionArg::Bonferroni => Correction::Bonferroni,
            CorrectionArg::Bh => Correction::Bh,
        },
        seed: args.seed,
        ..AnalysisConfig::default()
    };
    config.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let workers = match args.workers {
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let exec = RayonExecutor::new(workers)?;
    let matrix = load_matrix(&args.matrix, &args.groups)?;
    progress(
        start,
        &format!(
            "loaded {} rows x {} samples in {} groups",
            matrix.rows(),
            matrix.samples_len(),
            matrix.groups()
        ),
    );
    let (report, mode) = if args.pairwise_baseline {
        (pairwise_baseline(&matrix, config.level, &exec)?, Mode::PairwiseBaseline)
    } else {
        (analyze(&matrix, &config, &exec)?, Mode::Greedy)
    };
    let s = &report.summary;
    progress(
        start,
        &format!(
            "{} rows after preprocessing, {} candidates tested, {} significant, {} reported ({workers} workers)",
            s.rows_tested,
            s.candidates_tested,
            s.significant_before_pruning,
            report.entries.len()
        ),
    );
    let info = RunInfo {
        config,
        mode,
        matrix_path: Some(args.matrix.display().to_string()),
        groups_path: Some(args.groups.display().to_string()),
    };
    export_report(&report, &info, &args.out, args.dump_pool)?;
    progress(start, &format!("report written to {}", args.out.display()));
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    if args.min_coverage > args.max_coverage {
        return Err(Error::Usage("--min-coverage exceeds --max-coverage".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let background: Vec<Vec<u32>> = (0..args.rows)
        .map(|_| {
            args.group_sizes
                .iter()
                .map(|&size| rng.gen_range(args.min_coverage..=args.max_coverage).min(size))
                .collect()
        })
        .collect();
    let seed = rng.gen::<u64>();
    let matrix = if args.plant > 0 {
        let planted = vec![vec![args.plant_coverage; args.group_sizes.len()]; args.plant];
        simulate_planted(&args.group_sizes, &planted, &background, seed)?
    } else {
        simulate_null(&args.group_sizes, &background, seed)?
    };
    save_matrix(&matrix, &args.out)?;
    eprintln!(
        "wrote {} rows x {} samples to {}",
        matrix.rows(),
        matrix.samples_len(),
        args.out.display()
    );
    Ok(())
}

fn test_one(args: &TestOneArgs, out: &mut dyn Write) -> Result<()> {
    let matrix = load_matrix(&args.matrix, &args.groups)?;
    let set = matrix.parse_set(&args.set)?;
    let mode = match args.mode {
        ModeArg::Mid => CombineMode::Mid,
        ModeArg::Randomized => CombineMode::Randomized { seed: args.seed },
    };
    let t = test_set(&matrix, &set, mode)?;
    let io = |e| Error::io("<stdout>", e);
    writeln!(out, "group\tsamples\tcoverages\tobserved\tp\tp_minus\tweight").map_err(io)?;
    for g in &t.groups {
        let covs: Vec<String> = g.margins.coverages.iter().map(u32::to_string).collect();
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}",
            matrix.group_labels()[g.margins.group],
            g.margins.size,
            covs.join(","),
            g.margins.observed,
            format_ln_sci(g.triple.ln_p()),
            format_ln_sci(g.triple.ln_p_minus()),
            g.weight
        )
        .map_err(io)?;
    }
    writeln!(out, "combined\t{}", format_ln_sci(t.ln_p)).map_err(io)?;
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Simulate(a) => simulate(a),
        Command::TestOne(a) => test_one(a, &mut std::io::stdout().lock()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
