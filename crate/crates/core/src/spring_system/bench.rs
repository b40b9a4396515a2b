//! IDA vs CGD convergence and scalability experiment on random systems.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{generate_random_system_with, solve_cgd, solve_ida, CgdOptions, IdaOptions, SolveReport};

#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub ida: IdaOptions,
    pub cgd: CgdOptions,
    /// A trial is degenerate when CGD's final energy exceeds IDA's by this factor.
    pub degeneracy_ratio: f64,
    /// Keep full per-iteration energy traces on every trial record.
    pub keep_traces: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            ida: IdaOptions::default(),
            cgd: CgdOptions::default(),
            degeneracy_ratio: 10.0,
            keep_traces: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverRun {
    pub iterations: usize,
    pub final_energy: f64,
    pub initial_energy: f64,
    pub wall_time: f64,
    pub converged: bool,
    pub trace: Vec<f64>,
}

impl SolverRun {
    fn from_report(r: SolveReport, keep_trace: bool) -> Self {
        SolverRun {
            iterations: r.iterations,
            final_energy: r.final_energy,
            initial_energy: r.initial_energy,
            wall_time: r.wall_time,
            converged: r.converged,
            trace: if keep_trace { r.energy_trace } else { Vec::new() },
        }
    }

    fn failed() -> Self {
        SolverRun {
            iterations: 0,
            final_energy: f64::NAN,
            initial_energy: f64::NAN,
            wall_time: 0.0,
            converged: false,
            trace: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub size: usize,
    pub trial: usize,
    pub ida: SolverRun,
    pub cgd: SolverRun,
    pub degenerate: bool,
}

impl TrialRecord {
    /// `|E_ida - E_cgd| / max(E_cgd, 1e-12)`.
    pub fn relative_energy_gap(&self) -> f64 {
        (self.ida.final_energy - self.cgd.final_energy).abs() / self.cgd.final_energy.max(1e-12)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub size: usize,
    pub solver: &'static str,
    pub mean_iters: f64,
    pub std_iters: f64,
    pub median_iters: f64,
    pub mean_time_s: f64,
    pub mean_final_energy: f64,
    pub degenerate_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchRow>,
    pub trials: Vec<TrialRecord>,
    /// Mean energy per iteration, `(size, solver, trace)`, over non-degenerate
    /// trials. Runs that stopped early hold their final energy.
    pub mean_traces: Vec<(usize, &'static str, Vec<f64>)>,
}

pub const TSV_HEADER: &str = "size\tsolver\tmean_iters\tstd_iters\tmean_time_s\tmean_final_energy\tdegenerate_count";

impl BenchmarkTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{:.4}\t{:.4}\t{:.6e}\t{:.6e}\t{}\n",
                r.size, r.solver, r.mean_iters, r.std_iters, r.mean_time_s, r.mean_final_energy, r.degenerate_count
            ));
        }
        out
    }

    pub fn row(&self, size: usize, solver: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.size == size && r.solver == solver)
    }

    pub fn trace_csv(&self, size: usize, solver: &str) -> Option<String> {
        let (_, _, trace) = self.mean_traces.iter().find(|(s, n, _)| *s == size && *n == solver)?;
        let mut out = String::from("iteration,energy\n");
        for (i, e) in trace.iter().enumerate() {
            out.push_str(&format!("{i},{e:.9e}\n"));
        }
        Some(out)
    }
}

/// RNG for one trial: a fixed seed with the stream chosen by (size, trial),
/// so results do not depend on evaluation order.
pub fn trial_rng(seed: u64, size: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((size as u64) << 32) | trial as u64);
    rng
}

fn run_trial(size: usize, trial: usize, seed: u64, config: &BenchConfig) -> TrialRecord {
    let mut rng = trial_rng(seed, size, trial);
    let system = generate_random_system_with(size, &mut rng).expect("size >= 2 checked by caller");
    let keep = config.keep_traces;
    let ida = solve_ida(&system, config.ida)
        .map(|r| SolverRun::from_report(r, true))
        .unwrap_or_else(|_| SolverRun::failed());
    let cgd = solve_cgd(&system, config.cgd)
        .map(|r| SolverRun::from_report(r, true))
        .unwrap_or_else(|_| SolverRun::failed());
    let degenerate = !(ida.final_energy.is_finite() && cgd.final_energy.is_finite())
        || cgd.final_energy > config.degeneracy_ratio * ida.final_energy;
    let strip = |mut run: SolverRun| {
        if !keep {
            run.trace = Vec::new();
        }
        run
    };
    TrialRecord {
        size,
        trial,
        ida: strip(ida),
        cgd: strip(cgd),
        degenerate,
    }
}

fn mean_std_median(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    };
    (mean, var.sqrt(), median)
}

fn mean_trace(traces: &[&[f64]]) -> Vec<f64> {
    let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let sum: f64 = traces
                .iter()
                .filter(|t| !t.is_empty())
                .map(|t| t[i.min(t.len() - 1)])
                .sum();
            sum / traces.len().max(1) as f64
        })
        .collect()
}

/// Runs both solvers on `trials` random systems for every size in `sizes`.
///
/// Sizes below 2 are skipped. Degenerate trials (CGD stuck far above IDA) are
/// counted in `degenerate_count` and excluded from the statistics.
pub fn convergence_experiment(sizes: &[usize], trials: usize, seed: u64, config: &BenchConfig) -> BenchmarkTable {
    let jobs: Vec<(usize, usize)> = sizes
        .iter()
        .filter(|&&s| s >= 2)
        .flat_map(|&s| (0..trials).map(move |t| (s, t)))
        .collect();

    #[cfg(feature = "parallel")]
    let records: Vec<TrialRecord> = {
        use rayon::prelude::*;
        jobs.par_iter().map(|&(s, t)| run_trial(s, t, seed, config)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let records: Vec<TrialRecord> = jobs.iter().map(|&(s, t)| run_trial(s, t, seed, config)).collect();

    let mut rows = Vec::new();
    let mut mean_traces = Vec::new();
    for &size in sizes.iter().filter(|&&s| s >= 2) {
        let of_size: Vec<&TrialRecord> = records.iter().filter(|r| r.size == size).collect();
        let degenerate_count = of_size.iter().filter(|r| r.degenerate).count();
        let good: Vec<&TrialRecord> = of_size.iter().copied().filter(|r| !r.degenerate).collect();
        for solver in ["IDA", "CGD"] {
            let pick = |r: &&TrialRecord| -> SolverRun {
                if solver == "IDA" {
                    r.ida.clone()
                } else {
                    r.cgd.clone()
                }
            };
            let runs: Vec<SolverRun> = good.iter().map(pick).collect();
            let iters: Vec<f64> = runs.iter().map(|r| r.iterations as f64).collect();
            let (mean_iters, std_iters, median_iters) = mean_std_median(&iters);
            let times: Vec<f64> = runs.iter().map(|r| r.wall_time).collect();
            let energies: Vec<f64> = runs.iter().map(|r| r.final_energy).collect();
            rows.push(BenchRow {
                size,
                solver,
                mean_iters,
                std_iters,
                median_iters,
                mean_time_s: mean_std_median(&times).0,
                mean_final_energy: mean_std_median(&energies).0,
                degenerate_count,
            });
            if config.keep_traces {
                let traces: Vec<&[f64]> = good
                    .iter()
                    .map(|r| if solver == "IDA" { r.ida.trace.as_slice() } else { r.cgd.trace.as_slice() })
                    .collect();
                mean_traces.push((size, solver, mean_trace(&traces)));
            }
        }
    }
    BenchmarkTable {
        rows,
        trials: records,
        mean_traces,
    }
}
