//! Load-test spreadsheets, timing runs and the performance models fitted to
//! them.

mod csvio;
mod fit;
mod sheets;
mod timing;

use thiserror::Error;

use crate::container::ContainerError;
use crate::formula::RecalcError;

pub use csvio::{read_points, read_samples, write_overhead, write_samples};
pub use fit::{estimate_server_memory, fit_linear, fit_power_law, LinearFit, PowerLawFit, ServerMemoryModel};
pub use sheets::{generate_bench_a, generate_bench_a_with_cap, generate_bench_b, DEFAULT_SIZE_CAP};
pub use timing::{median_by_size, overhead_report, run_timing, OverheadRow, TimingSample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("size {n} exceeds the cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("the B2 seed must be a nonzero finite number")]
    ZeroSeed,
    #[error("{0}")]
    InvalidSize(String),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("point ({x}, {y}) is outside the model's domain")]
    InvalidPoint { x: f64, y: f64 },
    #[error("no timing samples")]
    EmptySamples,
    #[error("baseline must be a positive number of seconds, got {0}")]
    InvalidBaseline(f64),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Recalc(#[from] RecalcError),
}
