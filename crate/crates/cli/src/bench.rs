use std::path::PathBuf;

use dpt_core::spring_system::{convergence_experiment, BenchConfig, BenchmarkTable};

use crate::error::CliResult;
use crate::{parse_size, write_file, DEFAULT_SEED};

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    /// Comma-separated numbers of dynamic nodes.
    #[arg(long, value_parser = parse_size, value_delimiter = ',', default_value = "4,8,16,32,64")]
    sizes: Vec<usize>,

    /// Random systems per size.
    #[arg(long, default_value_t = 100)]
    trials: usize,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Tab-separated results table; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write mean energy traces as `trace_<size>_<solver>.csv` here.
    #[arg(long)]
    traces: Option<PathBuf>,

    /// Stop rule of the iterative direct approach (max node displacement).
    #[arg(long, default_value_t = 1e-3)]
    ida_tol: f64,

    /// Stop rule of conjugate gradient descent (gradient infinity norm).
    #[arg(long, default_value_t = 1e-3)]
    cgd_tol: f64,
}

pub fn benchmark(args: &BenchArgs) -> BenchmarkTable {
    let mut config = BenchConfig {
        keep_traces: args.traces.is_some(),
        ..BenchConfig::default()
    };
    config.ida.tol = args.ida_tol;
    config.cgd.tol = args.cgd_tol;
    convergence_experiment(&args.sizes, args.trials, args.seed, &config)
}

pub fn run(args: &BenchArgs, verbose: bool) -> CliResult<()> {
    let table = benchmark(args);
    let tsv = table.to_tsv();
    match &args.out {
        Some(path) => write_file(path, &tsv)?,
        None => print!("{tsv}"),
    }
    if let Some(dir) = &args.traces {
        for row in &table.rows {
            if let Some(csv) = table.trace_csv(row.size, row.solver) {
                let name = format!("trace_{}_{}.csv", row.size, row.solver.to_ascii_lowercase());
                write_file(&dir.join(name), csv)?;
            }
        }
    }
    if verbose {
        for row in &table.rows {
            eprintln!(
                "n={} {}: median {} iterations, {} degenerate",
                row.size, row.solver, row.median_iters, row.degenerate_count
            );
        }
    }
    Ok(())
}
