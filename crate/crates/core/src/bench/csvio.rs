use std::io::Read;

use crate::container::number;

use super::{BenchError, OverheadRow, TimingSample};

fn csv_err(e: csv::Error) -> BenchError {
    BenchError::Csv(e.to_string())
}

fn field(record: &csv::StringRecord, i: usize) -> Result<f64, BenchError> {
    let line = record.position().map_or(0, |p| p.line());
    let raw = record
        .get(i)
        .ok_or_else(|| BenchError::Csv(format!("line {line}: missing column {}", i + 1)))?;
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| BenchError::Csv(format!("line {line}: {raw:?} is not a number")))
}

/// Reads `(x, y)` pairs from the first two columns of a headed CSV such as
/// `N,seconds` or `x,y`.
pub fn read_points(input: impl Read) -> Result<Vec<(f64, f64)>, BenchError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    reader
        .records()
        .map(|r| {
            let r = r.map_err(csv_err)?;
            Ok((field(&r, 0)?, field(&r, 1)?))
        })
        .collect()
}

/// Reads timing samples: `N,seconds` with an optional third `concurrency`
/// column (default 1).
pub fn read_samples(input: impl Read) -> Result<Vec<TimingSample>, BenchError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    reader
        .records()
        .map(|r| {
            let r = r.map_err(csv_err)?;
            let size = field(&r, 0)?;
            let concurrency = if r.len() > 2 { field(&r, 2)? } else { 1.0 };
            if size < 0.0 || size.fract() != 0.0 || concurrency < 1.0 || concurrency.fract() != 0.0 {
                return Err(BenchError::Csv(format!(
                    "size and concurrency must be whole numbers in {:?}",
                    r.iter().collect::<Vec<_>>()
                )));
            }
            Ok(TimingSample {
                size: size as usize,
                duration: field(&r, 1)?,
                concurrency: concurrency as usize,
            })
        })
        .collect()
}

pub fn write_samples(samples: &[TimingSample]) -> String {
    let mut out = String::from("N,seconds,concurrency\n");
    for s in samples {
        out.push_str(&format!(
            "{},{},{}\n",
            s.size,
            number::render(s.duration),
            s.concurrency
        ));
    }
    out
}

pub fn write_overhead(rows: &[OverheadRow]) -> String {
    let mut out = String::from("concurrency,per_task_s,overhead_frac\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.concurrency,
            number::render(r.per_task),
            number::render(r.overhead)
        ));
    }
    out
}
