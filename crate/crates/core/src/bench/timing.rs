use std::sync::{Barrier, Mutex};
use std::time::Instant;

use crate::container::{CellAddress, CellContent, Document};
use crate::formula::Engine;

use super::{generate_bench_a, BenchError};

/// One timed recalculation batch. With `concurrency` k the duration is the
/// wall-clock time until all k simultaneous recalculations finished.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSample {
    pub size: usize,
    pub duration: f64,
    pub concurrency: usize,
}

fn set_seed(doc: &mut Document, b2: f64) -> Result<(), BenchError> {
    doc.sheet_mut(0)?.put(CellAddress::new(2, 2), CellContent::Number(b2))?;
    Ok(())
}

fn trial(doc: &mut Document, engine: &mut Engine, b2: f64) -> Result<(), BenchError> {
    set_seed(doc, b2)?;
    engine.recalculate(doc)?;
    Ok(())
}

/// Times benchmark-A recalculations. For each size the first seed value
/// warms up the parse cache untimed; every later seed is one timed trial.
/// With `concurrency` k, k independent copies recalculate simultaneously.
pub fn run_timing(sizes: &[usize], b2_values: &[f64], concurrency: usize) -> Result<Vec<TimingSample>, BenchError> {
    if b2_values.len() < 2 {
        return Err(BenchError::InvalidSize(
            "need a warm-up seed and at least one timed seed".into(),
        ));
    }
    if concurrency == 0 {
        return Err(BenchError::InvalidSize("concurrency must be at least 1".into()));
    }
    if b2_values.iter().any(|&b| b == 0.0 || !b.is_finite()) {
        return Err(BenchError::ZeroSeed);
    }
    let mut samples = Vec::new();
    for &size in sizes {
        let doc = generate_bench_a(size, b2_values[0])?;
        let durations = if concurrency == 1 {
            time_inline(doc, b2_values)?
        } else {
            time_parallel(&doc, b2_values, concurrency)?
        };
        samples.extend(durations.into_iter().map(|duration| TimingSample {
            size,
            duration: duration.max(f64::MIN_POSITIVE),
            concurrency,
        }));
    }
    Ok(samples)
}

fn time_inline(mut doc: Document, b2_values: &[f64]) -> Result<Vec<f64>, BenchError> {
    let mut engine = Engine::default();
    trial(&mut doc, &mut engine, b2_values[0])?;
    let mut out = Vec::with_capacity(b2_values.len() - 1);
    for &b2 in &b2_values[1..] {
        let started = Instant::now();
        trial(&mut doc, &mut engine, b2)?;
        out.push(started.elapsed().as_secs_f64());
    }
    Ok(out)
}

fn time_parallel(doc: &Document, b2_values: &[f64], k: usize) -> Result<Vec<f64>, BenchError> {
    // Workers and this thread meet at the barrier before and after each trial.
    let barrier = Barrier::new(k + 1);
    let failure = Mutex::new(None);
    let mut out = Vec::with_capacity(b2_values.len() - 1);
    std::thread::scope(|scope| {
        for _ in 0..k {
            let mut copy = doc.clone();
            let (barrier, failure) = (&barrier, &failure);
            scope.spawn(move || {
                let mut engine = Engine::default();
                let record = |r: Result<(), BenchError>| {
                    if let Err(e) = r {
                        failure.lock().expect("failure slot").get_or_insert(e);
                    }
                };
                record(trial(&mut copy, &mut engine, b2_values[0]));
                for &b2 in &b2_values[1..] {
                    barrier.wait();
                    record(trial(&mut copy, &mut engine, b2));
                    barrier.wait();
                }
            });
        }
        for _ in 1..b2_values.len() {
            barrier.wait();
            let started = Instant::now();
            barrier.wait();
            out.push(started.elapsed().as_secs_f64());
        }
    });
    match failure.into_inner().expect("failure slot") {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// Median duration per size over samples at one concurrency level, by size.
pub fn median_by_size(samples: &[TimingSample]) -> Vec<(usize, f64)> {
    let mut sizes: Vec<usize> = samples.iter().map(|s| s.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            let mut d: Vec<f64> = samples.iter().filter(|s| s.size == n).map(|s| s.duration).collect();
            (n, median(&mut d).expect("size came from samples"))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadRow {
    pub concurrency: usize,
    /// Median wall-clock time of a batch.
    pub wall: f64,
    /// Wall time per task: the batch median divided by the concurrency.
    pub per_task: f64,
    /// `per_task / baseline - 1`.
    pub overhead: f64,
}

/// Per concurrency level (ascending), the cost of one task relative to
/// `baseline` seconds.
pub fn overhead_report(baseline: f64, samples: &[TimingSample]) -> Result<Vec<OverheadRow>, BenchError> {
    if !(baseline > 0.0 && baseline.is_finite()) {
        return Err(BenchError::InvalidBaseline(baseline));
    }
    if samples.is_empty() {
        return Err(BenchError::EmptySamples);
    }
    let mut levels: Vec<usize> = samples.iter().map(|s| s.concurrency).collect();
    levels.sort_unstable();
    levels.dedup();
    levels
        .into_iter()
        .map(|k| {
            if k == 0 {
                return Err(BenchError::InvalidSize("concurrency must be at least 1".into()));
            }
            let mut d: Vec<f64> = samples
                .iter()
                .filter(|s| s.concurrency == k)
                .map(|s| s.duration)
                .collect();
            let wall = median(&mut d).expect("level came from samples");
            let per_task = wall / k as f64;
            Ok(OverheadRow {
                concurrency: k,
                wall,
                per_task,
                overhead: per_task / baseline - 1.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(duration: f64, concurrency: usize) -> TimingSample {
        TimingSample {
            size: 50,
            duration,
            concurrency,
        }
    }

    #[test]
    fn overhead_arithmetic() {
        let rows = overhead_report(79.5, &[sample(81.5, 1)]).unwrap();
        assert!((rows[0].overhead - 0.025).abs() < 1e-3);
        let rows = overhead_report(81.5, &[sample(165.0, 2)]).unwrap();
        assert_eq!(rows[0].per_task, 82.5);
        assert!((rows[0].overhead - 0.012).abs() < 1e-3);
        let rows = overhead_report(3.0, &[sample(3.0, 1)]).unwrap();
        assert_eq!(rows[0].overhead, 0.0);
    }

    #[test]
    fn overhead_errors_and_grouping() {
        assert_eq!(overhead_report(1.0, &[]), Err(BenchError::EmptySamples));
        assert_eq!(
            overhead_report(0.0, &[sample(1.0, 1)]),
            Err(BenchError::InvalidBaseline(0.0))
        );
        let rows = overhead_report(1.0, &[sample(4.0, 2), sample(1.0, 1), sample(3.0, 1), sample(2.0, 1)]).unwrap();
        assert_eq!(rows.iter().map(|r| r.concurrency).collect::<Vec<_>>(), [1, 2]);
        assert_eq!(rows[0].wall, 2.0);
        assert_eq!(rows[1].per_task, 2.0);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn single_timed_trial() {
        let s = run_timing(&[1], &[2.0, 3.0], 1).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].duration > 0.0);
        let s = run_timing(&[2, 3], &[2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|x| x.concurrency == 2 && x.duration > 0.0));
    }

    #[test]
    fn timing_preconditions() {
        assert!(matches!(run_timing(&[1], &[2.0], 1), Err(BenchError::InvalidSize(_))));
        assert_eq!(run_timing(&[1], &[2.0, 0.0], 1), Err(BenchError::ZeroSeed));
        assert!(matches!(
            run_timing(&[1], &[2.0, 3.0], 0),
            Err(BenchError::InvalidSize(_))
        ));
    }
}
