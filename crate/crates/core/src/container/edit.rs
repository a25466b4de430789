use chrono::{DateTime, Utc};

use super::address::{CellAddress, CellRange, MAX_COLS, MAX_ROWS};
use super::model::{implied_cache, Cell, CellContent, ChangeKind, ChangeRecord, Document, Sheet};
use super::ContainerError;

impl Document {
    /// Replaces the content at `addr` and appends the matching change record.
    ///
    /// This is the only way to change a cell of an assembled document.
    pub fn set_cell(
        &mut self,
        sheet: usize,
        addr: CellAddress,
        content: CellContent,
        author: &str,
        timestamp: DateTime<Utc>,
    ) -> Result<ChangeRecord, ContainerError> {
        self.check_writable(timestamp)?;
        content.validate()?;
        let addr = addr.unanchored();
        let current = self
            .sheet(sheet)
            .ok_or(ContainerError::UnknownSheet(sheet))?
            .get(addr)
            .cloned();
        let (previous, prev_cached_value) = match current {
            Some(cell) => (cell.content, cell.cached_value),
            None => (CellContent::Empty, None),
        };
        if previous == content {
            return Err(ContainerError::NoChange);
        }
        let record = ChangeRecord {
            id: self.last_change_id() + 1,
            author: author.to_string(),
            timestamp,
            sheet,
            kind: ChangeKind::Content { addr },
            previous,
            new: content,
            prev_cached_value,
        };
        self.append(record.clone())?;
        Ok(record)
    }

    /// Applies a row/column insert or delete, or a block move, emitting one
    /// structural marker followed by per-cell records.
    ///
    /// Overwritten or deleted cells get a clearing `Content` record, then each
    /// relocated cell gets a `Move` record. Clears come in row-major order;
    /// moves come in row-major order walked against the displacement so that
    /// applying them one at a time never lands on an occupied cell.
    /// References inside formulas are left as written.
    pub fn structural_edit(
        &mut self,
        sheet: usize,
        kind: ChangeKind,
        author: &str,
        timestamp: DateTime<Utc>,
    ) -> Result<Vec<ChangeRecord>, ContainerError> {
        self.check_writable(timestamp)?;
        let grid = self.sheet(sheet).ok_or(ContainerError::UnknownSheet(sheet))?;
        let plan = plan_edit(grid, kind)?;

        let mut records = Vec::with_capacity(1 + plan.cleared.len() + plan.moves.len());
        let mut next_id = self.last_change_id() + 1;
        let mut push = |kind, previous: CellContent, new, prev_cached_value| {
            records.push(ChangeRecord {
                id: next_id,
                author: author.to_string(),
                timestamp,
                sheet,
                kind,
                previous,
                new,
                prev_cached_value,
            });
            next_id += 1;
        };
        push(plan.marker, CellContent::Empty, CellContent::Empty, None);
        for addr in plan.cleared {
            let cell = grid.get(addr).expect("planned clear of occupied cell");
            push(
                ChangeKind::Content { addr },
                cell.content.clone(),
                CellContent::Empty,
                cell.cached_value,
            );
        }
        for (from, to) in plan.moves {
            let cell = grid.get(from).expect("planned move of occupied cell");
            push(
                ChangeKind::Move { from, to },
                cell.content.clone(),
                cell.content.clone(),
                cell.cached_value,
            );
        }
        for r in &records {
            self.append(r.clone())?;
        }
        Ok(records)
    }

    fn check_writable(&self, timestamp: DateTime<Utc>) -> Result<(), ContainerError> {
        if self.read_only {
            return Err(ContainerError::ReadOnly);
        }
        if let Some(last) = self.changes.last() {
            if timestamp < last.timestamp {
                return Err(ContainerError::TimestampRegression {
                    last: last.timestamp,
                    given: timestamp,
                });
            }
        }
        Ok(())
    }

    fn append(&mut self, record: ChangeRecord) -> Result<(), ContainerError> {
        apply_forward(self, &record)?;
        self.changes.push(record);
        Ok(())
    }
}

struct EditPlan {
    marker: ChangeKind,
    cleared: Vec<CellAddress>,
    moves: Vec<(CellAddress, CellAddress)>,
}

fn plan_edit(sheet: &Sheet, kind: ChangeKind) -> Result<EditPlan, ContainerError> {
    let occupied = || sheet.cell_map().keys().copied();
    let check_index = |i: u32, max: u32, what: &str| {
        if (1..=max).contains(&i) {
            Ok(())
        } else {
            Err(ContainerError::OutOfBounds(format!("{what} index {i}")))
        }
    };
    let (cleared, shifted, d_row, d_col): (Vec<_>, Vec<_>, i64, i64) = match kind {
        ChangeKind::RowInsert(i) => {
            check_index(i, MAX_ROWS, "row")?;
            (vec![], occupied().filter(|a| a.row >= i).collect(), 1, 0)
        }
        ChangeKind::RowDelete(i) => {
            check_index(i, MAX_ROWS, "row")?;
            (
                occupied().filter(|a| a.row == i).collect(),
                occupied().filter(|a| a.row > i).collect(),
                -1,
                0,
            )
        }
        ChangeKind::ColInsert(i) => {
            check_index(i, MAX_COLS, "column")?;
            (vec![], occupied().filter(|a| a.col >= i).collect(), 0, 1)
        }
        ChangeKind::ColDelete(i) => {
            check_index(i, MAX_COLS, "column")?;
            (
                occupied().filter(|a| a.col == i).collect(),
                occupied().filter(|a| a.col > i).collect(),
                0,
                -1,
            )
        }
        ChangeKind::Move { from, to } => {
            return plan_edit(
                sheet,
                ChangeKind::BlockMove {
                    from: CellRange::single(from.unanchored()),
                    to,
                },
            )
        }
        ChangeKind::BlockMove { from, to } => {
            let from = CellRange::new(from.start.unanchored(), from.end.unanchored());
            let to = to.unanchored();
            let d_row = i64::from(to.row) - i64::from(from.start.row);
            let d_col = i64::from(to.col) - i64::from(from.start.col);
            if d_row == 0 && d_col == 0 {
                return Err(ContainerError::InvalidEdit("move source equals destination".into()));
            }
            let dest_end = from
                .end
                .offset(d_row, d_col)
                .ok_or_else(|| ContainerError::OutOfBounds(format!("move of {from} to {to}")))?;
            let dest = CellRange::new(to, dest_end);
            let sources: Vec<_> = occupied().filter(|a| from.contains(*a)).collect();
            if sources.is_empty() {
                return Err(ContainerError::InvalidEdit(format!(
                    "move source {from} has no content"
                )));
            }
            let overwritten = occupied().filter(|a| dest.contains(*a) && !from.contains(*a)).collect();
            (overwritten, sources, d_row, d_col)
        }
        ChangeKind::Content { .. } => {
            return Err(ContainerError::InvalidEdit(
                "content changes go through set_cell".into(),
            ))
        }
    };

    let marker = match kind {
        ChangeKind::Move { from, to } => ChangeKind::BlockMove {
            from: CellRange::single(from.unanchored()),
            to: to.unanchored(),
        },
        ChangeKind::BlockMove { from, to } => ChangeKind::BlockMove {
            from: CellRange::new(from.start.unanchored(), from.end.unanchored()),
            to: to.unanchored(),
        },
        other => other,
    };

    let mut moves = Vec::with_capacity(shifted.len());
    for from in shifted {
        let to = from
            .offset(d_row, d_col)
            .ok_or_else(|| ContainerError::OutOfBounds(format!("cell {from} would leave the grid")))?;
        moves.push((from, to));
    }
    // Destinations further along the displacement move first.
    moves.sort_by_key(|(from, _)| {
        let progress = d_row * i64::from(from.row) + d_col * i64::from(from.col);
        (-progress, *from)
    });
    Ok(EditPlan { marker, cleared, moves })
}

fn mismatch(record: &ChangeRecord, addr: CellAddress) -> ContainerError {
    ContainerError::ChainViolation(format!("record {} does not match the content at {}", record.id, addr))
}

/// Applies a record's cell effects to the document grid. Fails without
/// touching the grid when the current content disagrees with the record.
pub(crate) fn apply_forward(doc: &mut Document, record: &ChangeRecord) -> Result<(), ContainerError> {
    let sheet = doc.sheet_mut(record.sheet)?;
    match record.kind {
        ChangeKind::Content { addr } => {
            if sheet.content(addr) != &record.previous {
                return Err(mismatch(record, addr));
            }
            sheet.insert_cell(addr, Cell::new(record.new.clone()));
        }
        ChangeKind::Move { from, to } => {
            if sheet.content(from) != &record.previous {
                return Err(mismatch(record, from));
            }
            if !sheet.content(to).is_empty() {
                return Err(mismatch(record, to));
            }
            let cell = sheet.take(from).expect("checked non-empty");
            sheet.insert_cell(to, cell);
        }
        _ => {}
    }
    Ok(())
}

/// Undoes a record's cell effects, restoring the previous content and the
/// cached value it carried.
pub(crate) fn apply_reverse(doc: &mut Document, record: &ChangeRecord) -> Result<(), ContainerError> {
    let sheet = doc.sheet_mut(record.sheet)?;
    match record.kind {
        ChangeKind::Content { addr } => {
            if sheet.content(addr) != &record.new {
                return Err(mismatch(record, addr));
            }
            let cached = implied_cache(&record.previous, record.prev_cached_value);
            sheet.insert_cell(
                addr,
                Cell {
                    content: record.previous.clone(),
                    cached_value: cached,
                },
            );
        }
        ChangeKind::Move { from, to } => {
            if sheet.content(to) != &record.new {
                return Err(mismatch(record, to));
            }
            if !sheet.content(from).is_empty() {
                return Err(mismatch(record, from));
            }
            let mut cell = sheet.take(to).expect("checked non-empty");
            cell.cached_value = implied_cache(&record.previous, record.prev_cached_value);
            sheet.insert_cell(from, cell);
        }
        _ => {}
    }
    Ok(())
}
