//! Reading the change log: classification, filtering, historical
//! reconstruction, falsification checks, block regrouping and reports.

mod blocks;
pub mod fixture;
mod history;
mod report;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::container::{
    parse_timestamp, CellContent, CellRange, ChainViolation, ChangeKind, ChangeRecord, ContainerError,
};
use crate::formula::EvalError;

pub use blocks::{group_blocks, group_blocks_within, BlockOp, DEFAULT_BLOCK_WINDOW};
pub use history::{discrepancy, reconstruct_at, replay_forward, strict_discrepancies, Discrepancy, DEFAULT_TOLERANCE};
pub use report::{render_report, Report, ReportFormat};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditError {
    #[error("no change with id {0}")]
    UnknownChangeId(u64),
    #[error("change log is inconsistent: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    ChainViolation(Vec<ChainViolation>),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// What a change did to its cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChangeClass {
    FormulaToValue,
    ValueToFormula,
    FormulaEdited,
    ValueEdited,
    Entered,
    Cleared,
    Structural,
    Moved,
}

impl ChangeClass {
    pub const ALL: [ChangeClass; 8] = [
        Self::FormulaToValue,
        Self::ValueToFormula,
        Self::FormulaEdited,
        Self::ValueEdited,
        Self::Entered,
        Self::Cleared,
        Self::Structural,
        Self::Moved,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::FormulaToValue => "formula-to-value",
            Self::ValueToFormula => "value-to-formula",
            Self::FormulaEdited => "formula-edited",
            Self::ValueEdited => "value-edited",
            Self::Entered => "entered",
            Self::Cleared => "cleared",
            Self::Structural => "structural",
            Self::Moved => "moved",
        }
    }
}

impl fmt::Display for ChangeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChangeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|c| c.name()).collect();
                format!("unknown change class {s:?} (expected one of {})", names.join(", "))
            })
    }
}

/// Total classification of a record. Row/column edits and block-move
/// markers are structural; per-cell relocations are moves; everything else is
/// decided by the before/after contents.
pub fn classify(record: &ChangeRecord) -> ChangeClass {
    match record.kind {
        ChangeKind::Move { .. } => return ChangeClass::Moved,
        ref k if k.is_structural() => return ChangeClass::Structural,
        _ => {}
    }
    use CellContent::{Empty, Formula};
    match (&record.previous, &record.new) {
        (Formula(_), Formula(_)) => ChangeClass::FormulaEdited,
        (Formula(_), n) if !n.is_empty() => ChangeClass::FormulaToValue,
        (_, Formula(_)) => ChangeClass::ValueToFormula,
        (Empty, _) => ChangeClass::Entered,
        (_, Empty) => ChangeClass::Cleared,
        _ => ChangeClass::ValueEdited,
    }
}

/// Conjunctive record filter; absent criteria match everything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterSpec {
    pub authors: Option<BTreeSet<String>>,
    pub since: Option<DateTime<Utc>>,
    pub until: Option<DateTime<Utc>>,
    /// Matches records whose target cell lies inside; records without a
    /// single target cell (row/column edits, block markers) never match.
    pub region: Option<CellRange>,
    pub classes: Option<BTreeSet<ChangeClass>>,
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), AuditError> {
        match (self.since, self.until) {
            (Some(s), Some(u)) if s > u => Err(AuditError::InvalidFilter(format!("since {s} is after until {u}"))),
            _ => Ok(()),
        }
    }

    /// Builds a filter from textual criteria: comma-separated class names and
    /// authors, RFC 3339 bounds and an `A1:B2` region. Empty strings count as
    /// absent.
    pub fn from_text(
        classes: Option<&str>,
        authors: Option<&str>,
        since: Option<&str>,
        until: Option<&str>,
        region: Option<&str>,
    ) -> Result<Self, AuditError> {
        fn present(v: Option<&str>) -> Option<&str> {
            v.map(str::trim).filter(|v| !v.is_empty())
        }
        let list = |v: &str| {
            v.split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(String::from)
                .collect()
        };
        let time = |v: &str| {
            parse_timestamp(v).ok_or_else(|| AuditError::InvalidFilter(format!("{v:?} is not an RFC 3339 timestamp")))
        };
        let spec = FilterSpec {
            authors: present(authors).map(list),
            since: present(since).map(time).transpose()?,
            until: present(until).map(time).transpose()?,
            region: present(region)
                .map(|r| {
                    r.parse::<CellRange>()
                        .map_err(|e| AuditError::InvalidFilter(e.to_string()))
                })
                .transpose()?,
            classes: present(classes)
                .map(|c| {
                    c.split(',')
                        .filter(|x| !x.trim().is_empty())
                        .map(|x| x.parse::<ChangeClass>().map_err(AuditError::InvalidFilter))
                        .collect::<Result<BTreeSet<_>, _>>()
                })
                .transpose()?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn matches(&self, r: &ChangeRecord) -> bool {
        self.authors.as_ref().is_none_or(|a| a.contains(&r.author))
            && self.since.is_none_or(|s| s <= r.timestamp)
            && self.until.is_none_or(|u| r.timestamp <= u)
            && self
                .region
                .is_none_or(|reg| r.target().is_some_and(|t| reg.contains(t)))
            && self.classes.as_ref().is_none_or(|c| c.contains(&classify(r)))
    }
}

/// Records matching `spec`, in log order.
pub fn filter_changes(log: &[ChangeRecord], spec: &FilterSpec) -> Vec<ChangeRecord> {
    log.iter().filter(|r| spec.matches(r)).cloned().collect()
}
