//! Spreadsheet audit trails.
//!
//! * [`container`]: documents with an append-only change log, stored as zipped XML.
//! * [`formula`]: formula parsing, evaluation and full recalculation.
//! * [`audit`]: classification, filtering, historical reconstruction and reports.
//! * [`repository`]: a versioned file store with exclusive, expiring edit leases.
//! * [`service`]: the repository over HTTP with rolling session tokens.
//! * [`bench`]: computational-load benchmark sheets, timing runs and model fits.

pub mod audit;
pub mod bench;
pub mod container;
pub mod formula;
pub mod repository;
pub mod service;
