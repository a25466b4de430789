use std::collections::HashMap;
use std::fmt;

use super::address::CellAddress;
use super::model::{CellContent, Document};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// The record's `new` content is not the `previous` content of the next
    /// record touching the same cell.
    BrokenLink { next_id: u64 },
    /// The last record touching the cell does not end at its current content.
    StaleTerminal,
}

/// A break in a cell's change chain, attributed to the earlier record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainViolation {
    pub record_id: u64,
    pub sheet: usize,
    pub cell: CellAddress,
    pub kind: ViolationKind,
}

impl fmt::Display for ChainViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ViolationKind::BrokenLink { next_id } => write!(
                f,
                "record {} leaves cell {} in a state record {} does not start from",
                self.record_id, self.cell, next_id
            ),
            ViolationKind::StaleTerminal => write!(
                f,
                "record {} is the last change to cell {} but does not match its current content",
                self.record_id, self.cell
            ),
        }
    }
}

/// Checks that every cell's records link up and end at the current content.
pub fn verify_chain(doc: &Document) -> Vec<ChainViolation> {
    let mut violations = Vec::new();
    // (sheet, cell) -> (id of last record touching it, content it left behind)
    let mut last: HashMap<(usize, CellAddress), (u64, &CellContent)> = HashMap::new();
    for record in doc.changes() {
        for effect in record.cell_effects() {
            let key = (record.sheet, effect.addr.unanchored());
            if let Some((prev_id, left)) = last.get(&key) {
                if *left != effect.before {
                    violations.push(ChainViolation {
                        record_id: *prev_id,
                        sheet: record.sheet,
                        cell: key.1,
                        kind: ViolationKind::BrokenLink { next_id: record.id },
                    });
                }
            }
            last.insert(key, (record.id, effect.after));
        }
    }
    let mut terminals: Vec<_> = last.into_iter().collect();
    terminals.sort_by_key(|((sheet, cell), (id, _))| (*id, *sheet, *cell));
    for ((sheet, cell), (id, left)) in terminals {
        let current = doc.sheet(sheet).map_or(&CellContent::Empty, |s| s.content(cell));
        if current != left {
            violations.push(ChainViolation {
                record_id: id,
                sheet,
                cell,
                kind: ViolationKind::StaleTerminal,
            });
        }
    }
    violations.sort_by_key(|v| (v.record_id, v.sheet, v.cell));
    violations
}
