use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::Args;

use celltrail::audit::{
    self, filter_changes, group_blocks, reconstruct_at, strict_discrepancies, FilterSpec, Report, ReportFormat,
};
use celltrail::container::{load_document, render_timestamp, save_document, Document};
use celltrail::formula::recalculate;

use crate::{read_file, write_output};

#[derive(Args)]
pub struct AuditArgs {
    file: PathBuf,
    /// Comma-separated change classes, e.g. formula-to-value.
    #[arg(long)]
    class: Option<String>,
    /// Comma-separated authors.
    #[arg(long)]
    author: Option<String>,
    /// Earliest timestamp (RFC 3339), inclusive.
    #[arg(long)]
    since: Option<String>,
    /// Latest timestamp (RFC 3339), inclusive.
    #[arg(long)]
    until: Option<String>,
    /// Only records targeting cells in this range, e.g. B2:D11.
    #[arg(long)]
    range: Option<String>,
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    /// Re-evaluate replaced formulas in reconstructed history instead of
    /// trusting cached values.
    #[arg(long)]
    strict_discrepancy: bool,
    /// List regrouped block moves instead of individual records.
    #[arg(long)]
    blocks: bool,
}

#[derive(Args)]
pub struct ReconstructArgs {
    file: PathBuf,
    /// Change id to stop after; 0 gives the base document.
    #[arg(long)]
    at: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
pub struct RecalcArgs {
    file: PathBuf,
    /// Where to write the recalculated container (defaults to in place).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
pub struct FixtureArgs {
    #[arg(short, long)]
    output: PathBuf,
}

fn load(path: &PathBuf) -> anyhow::Result<Document> {
    let loaded = load_document(&read_file(path)?).with_context(|| format!("cannot load {}", path.display()))?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded.document)
}

pub fn audit(args: AuditArgs) -> anyhow::Result<()> {
    let doc = load(&args.file)?;
    let spec = FilterSpec::from_text(
        args.class.as_deref(),
        args.author.as_deref(),
        args.since.as_deref(),
        args.until.as_deref(),
        args.range.as_deref(),
    )?;
    let records = filter_changes(doc.changes(), &spec);
    if args.blocks {
        for b in group_blocks(&records) {
            println!(
                "{} -> {}  {} records  {}  {}",
                doc.qualified(b.sheet, b.from_region),
                doc.qualified(b.sheet, b.to_region),
                b.record_ids.len(),
                b.author,
                render_timestamp(&b.first)
            );
        }
        return Ok(());
    }
    let names: Vec<String> = doc.sheets().iter().map(|s| s.name().to_string()).collect();
    let strict: Option<HashMap<u64, f64>> = if args.strict_discrepancy {
        let found = strict_discrepancies(&doc, audit::DEFAULT_TOLERANCE)?;
        eprintln!(
            "{} discrepancies",
            found
                .iter()
                .filter(|d| records.iter().any(|r| r.id == d.record_id))
                .count()
        );
        Some(found.into_iter().map(|d| (d.record_id, d.delta)).collect())
    } else {
        None
    };
    let mut report = Report::new(&records).sheet_names(&names);
    if let Some(deltas) = &strict {
        report = report.deltas(deltas);
    }
    write_output("-".as_ref(), &report.render(args.format))
}

pub fn reconstruct(args: ReconstructArgs) -> anyhow::Result<()> {
    let doc = load(&args.file)?;
    let past = reconstruct_at(&doc, args.at)?;
    write_output(&args.output, &save_document(&past)?)
}

pub fn recalc(args: RecalcArgs) -> anyhow::Result<()> {
    let mut doc = load(&args.file)?;
    let started = Instant::now();
    let stats = recalculate(&mut doc)?;
    eprintln!(
        "{} cells evaluated in {:.3} s",
        stats.cells_evaluated,
        started.elapsed().as_secs_f64()
    );
    write_output(args.output.as_ref().unwrap_or(&args.file), &save_document(&doc)?)
}

pub fn fixture(args: FixtureArgs) -> anyhow::Result<()> {
    write_output(&args.output, &save_document(&audit::fixture::gradebook().document)?)
}
