//! Tracked-change spreadsheet documents and their `.ttz` archive format.
//!
//! A [`Document`] holds sheets of cells plus an append-only change log. Every
//! mutation of an assembled document goes through [`Document::set_cell`] or
//! [`Document::structural_edit`], both of which append records, so the log
//! always explains how the current grid was reached from the base version.

mod address;
mod chain;
mod edit;
mod io;
mod model;
pub mod number;

use chrono::{DateTime, Utc};
use thiserror::Error;

pub use address::{column_index, column_letters, AddressError, CellAddress, CellRange, MAX_COLS, MAX_ROWS};
pub use chain::{verify_chain, ChainViolation, ViolationKind};
pub(crate) use edit::{apply_forward, apply_reverse};
pub use io::{
    check_document, load_document, parse_timestamp, render_timestamp, save_document, Loaded, CHANGES_ENTRY,
    CONTENT_ENTRY, META_ENTRY,
};
pub use model::{Cell, CellContent, CellEffect, ChangeKind, ChangeRecord, Document, Meta, Sheet, DEFAULT_SHEET};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContainerError {
    #[error("not a zip archive: {0}")]
    NotZip(String),
    #[error("archive entry `{0}` is missing")]
    MissingEntry(String),
    #[error("{entry} line {line}: {message}")]
    MalformedXml {
        entry: String,
        line: usize,
        message: String,
    },
    #[error("change record {id}: {reason}")]
    InvalidRecord { id: u64, reason: String },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("invalid content: {0}")]
    InvalidContent(String),
    #[error("content is unchanged")]
    NoChange,
    #[error("timestamp {given} precedes the last recorded change at {last}")]
    TimestampRegression { last: DateTime<Utc>, given: DateTime<Utc> },
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
    #[error("no sheet with index {0}")]
    UnknownSheet(usize),
    #[error("document is a read-only historical version")]
    ReadOnly,
    #[error("change chain broken: {0}")]
    ChainViolation(String),
    #[error("i/o: {0}")]
    Io(String),
}
