use std::fs::File;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Subcommand, ValueEnum};

use celltrail::bench::{
    fit_linear, fit_power_law, generate_bench_a_with_cap, generate_bench_b, median_by_size, overhead_report,
    read_points, read_samples, run_timing, write_overhead, write_samples, DEFAULT_SIZE_CAP,
};
use celltrail::container::{save_document, Document};
use celltrail::formula::recalculate;

use crate::{usage, write_output};

#[derive(Clone, Copy, ValueEnum)]
pub enum Model {
    Power,
    Linear,
}

#[derive(Subcommand)]
pub enum BenchCommand {
    /// The MINVERSE load sheet.
    GenA {
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 2.0)]
        b2: f64,
        #[arg(long, default_value_t = DEFAULT_SIZE_CAP)]
        cap: usize,
        /// Store computed values too.
        #[arg(long)]
        recalc: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// The exp-sin-cos load sheet.
    GenB {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        recalc: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Time full recalculations of the MINVERSE sheet; writes `N,seconds,concurrency`.
    Run {
        /// Comma-separated sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Timed trials per size, after one untimed warm-up.
        #[arg(long, default_value_t = 3)]
        trials: usize,
        /// Simultaneous independent recalculations per trial.
        #[arg(long, default_value_t = 1)]
        concurrency: usize,
        #[arg(short, long, default_value = "-")]
        output: PathBuf,
    },
    /// Fit a model to a two-column CSV and print its parameters.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        model: Model,
    },
    /// Per-task cost of concurrent runs relative to a baseline.
    Overhead {
        /// Seconds for one unshared task.
        #[arg(long)]
        baseline: f64,
        #[arg(long)]
        input: PathBuf,
    },
}

fn finish(mut doc: Document, recalc: bool, output: &PathBuf) -> anyhow::Result<()> {
    if recalc {
        recalculate(&mut doc)?;
    }
    write_output(output, &save_document(&doc)?)
}

fn open(path: &PathBuf) -> anyhow::Result<File> {
    File::open(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn run(cmd: BenchCommand) -> anyhow::Result<()> {
    match cmd {
        BenchCommand::GenA {
            size,
            b2,
            cap,
            recalc,
            output,
        } => {
            if size == 0 {
                return Err(usage("--size must be at least 1"));
            }
            finish(generate_bench_a_with_cap(size, b2, cap)?, recalc, &output)
        }
        BenchCommand::GenB {
            rows,
            cols,
            recalc,
            output,
        } => {
            if rows == 0 || cols == 0 {
                return Err(usage("--rows and --cols must be at least 1"));
            }
            finish(generate_bench_b(rows, cols)?, recalc, &output)
        }
        BenchCommand::Run {
            sizes,
            trials,
            concurrency,
            output,
        } => {
            if trials == 0 || concurrency == 0 {
                return Err(usage("--trials and --concurrency must be at least 1"));
            }
            if sizes.contains(&0) {
                return Err(usage("sizes must be at least 1"));
            }
            // Distinct nonzero seeds; the first only warms up.
            let seeds: Vec<f64> = (0..=trials).map(|i| 2.0 + 0.25 * i as f64).collect();
            let samples = run_timing(&sizes, &seeds, concurrency)?;
            let medians = median_by_size(&samples);
            if medians.len() >= 2 {
                let pts: Vec<_> = medians.iter().map(|&(n, t)| (n as f64, t)).collect();
                let fit = fit_power_law(&pts)?;
                eprintln!("fitted exponent b={:.3} (a={:.3})", fit.b, fit.a);
            }
            write_output(&output, write_samples(&samples).as_bytes())
        }
        BenchCommand::Fit { input, model } => {
            let points = read_points(open(&input)?)?;
            match model {
                Model::Power => {
                    let f = fit_power_law(&points)?;
                    println!("a={:.6} b={:.6}", f.a, f.b);
                }
                Model::Linear => {
                    let f = fit_linear(&points)?;
                    println!("intercept={:.6} slope={:.6}", f.intercept, f.slope);
                }
            }
            Ok(())
        }
        BenchCommand::Overhead { baseline, input } => {
            let samples = read_samples(open(&input)?)?;
            let rows = overhead_report(baseline, &samples)?;
            write_output("-".as_ref(), write_overhead(&rows).as_bytes())
        }
    }
}
