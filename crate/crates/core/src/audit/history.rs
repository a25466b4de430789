use crate::container::{apply_forward, apply_reverse, verify_chain, CellContent, ChangeRecord, Document};
use crate::formula::{EvalConfig, Evaluator};

use super::{classify, AuditError, ChangeClass};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// A formula replaced by a literal that differs from what the formula showed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    pub record_id: u64,
    pub formula_result: f64,
    pub entered_value: f64,
    /// `entered_value - formula_result`.
    pub delta: f64,
}

fn compare(record: &ChangeRecord, formula_result: f64, tolerance: f64) -> Option<Discrepancy> {
    if classify(record) != ChangeClass::FormulaToValue {
        return None;
    }
    let CellContent::Number(entered) = record.new else {
        return None;
    };
    let delta = entered - formula_result;
    (delta.abs() > tolerance).then_some(Discrepancy {
        record_id: record.id,
        formula_result,
        entered_value: entered,
        delta,
    })
}

/// Checks a formula-to-value record against the cached value the formula
/// carried when it was overwritten.
pub fn discrepancy(record: &ChangeRecord, tolerance: f64) -> Option<Discrepancy> {
    compare(record, record.prev_cached_value?, tolerance)
}

/// Like [`discrepancy`] over the whole log, but re-evaluates each overwritten
/// formula in the document state just before its record instead of trusting
/// the stored cache. Formulas that fail to evaluate in that state are skipped.
pub fn strict_discrepancies(doc: &Document, tolerance: f64) -> Result<Vec<Discrepancy>, AuditError> {
    check_chain(doc)?;
    let mut state = doc.clone();
    let mut found = Vec::new();
    for record in doc.changes().iter().rev() {
        apply_reverse(&mut state, record)?;
        if classify(record) != ChangeClass::FormulaToValue || !matches!(record.new, CellContent::Number(_)) {
            continue;
        }
        let (Some(sheet), Some(addr)) = (state.sheet(record.sheet), record.target()) else {
            continue;
        };
        let Ok(value) = Evaluator::new(sheet, EvalConfig::default()).cell_value(addr) else {
            continue;
        };
        found.extend(compare(record, value, tolerance));
    }
    found.reverse();
    Ok(found)
}

fn check_chain(doc: &Document) -> Result<(), AuditError> {
    let violations = verify_chain(doc);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(AuditError::ChainViolation(violations))
    }
}

/// The document as it stood right after record `change_id` (0 = before any
/// tracked change). The result keeps only records `1..=change_id` and is
/// read-only.
pub fn reconstruct_at(doc: &Document, change_id: u64) -> Result<Document, AuditError> {
    if change_id > doc.last_change_id() {
        return Err(AuditError::UnknownChangeId(change_id));
    }
    check_chain(doc)?;
    let mut state = doc.clone();
    for record in doc.changes().iter().rev().take_while(|r| r.id > change_id) {
        apply_reverse(&mut state, record)?;
    }
    state.changes.truncate(change_id as usize);
    state.read_only = true;
    Ok(state)
}

/// Re-applies `records` on top of `base`, appending them to its log. The
/// result is writable.
pub fn replay_forward(base: &Document, records: &[ChangeRecord]) -> Result<Document, AuditError> {
    let mut state = base.clone();
    state.read_only = false;
    for record in records {
        if record.id != state.last_change_id() + 1 {
            return Err(AuditError::UnknownChangeId(record.id));
        }
        apply_forward(&mut state, record)?;
        state.changes.push(record.clone());
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::{CellAddress, ChangeKind, ContainerError};
    use chrono::{DateTime, TimeZone, Utc};

    fn t(s: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_000_000 + s, 0).unwrap()
    }

    fn a(s: &str) -> CellAddress {
        CellAddress::parse(s).unwrap()
    }

    fn overwrite(cached: f64, entered: f64) -> ChangeRecord {
        ChangeRecord {
            id: 1,
            author: "x".into(),
            timestamp: t(0),
            sheet: 0,
            kind: ChangeKind::Content { addr: a("A1") },
            previous: CellContent::formula("=B1"),
            new: CellContent::Number(entered),
            prev_cached_value: Some(cached),
        }
    }

    #[test]
    fn honest_paste_is_not_a_discrepancy() {
        assert_eq!(discrepancy(&overwrite(87.5, 87.5), DEFAULT_TOLERANCE), None);
    }

    #[test]
    fn altered_mark_is_flagged() {
        let d = discrepancy(&overwrite(62.0, 95.0), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(d.delta, 33.0);
        assert_eq!(d.formula_result, 62.0);
    }

    #[test]
    fn value_edits_are_never_flagged() {
        let mut r = overwrite(1.0, 50.0);
        r.previous = CellContent::Number(1.0);
        assert_eq!(discrepancy(&r, DEFAULT_TOLERANCE), None);
    }

    fn sample() -> (Document, Vec<Document>) {
        let mut doc = Document::new("x", t(0));
        let mut snaps = vec![doc.clone()];
        doc.set_cell(0, a("A1"), CellContent::Number(1.0), "x", t(1)).unwrap();
        snaps.push(doc.clone());
        doc.set_cell(0, a("B2"), CellContent::formula("=A1*2"), "x", t(2))
            .unwrap();
        snaps.push(doc.clone());
        for _ in doc.structural_edit(0, ChangeKind::ColInsert(1), "x", t(3)).unwrap() {
            snaps.push(doc.clone());
        }
        doc.set_cell(0, a("B1"), CellContent::Empty, "x", t(4)).unwrap();
        snaps.push(doc.clone());
        (doc, snaps)
    }

    #[test]
    fn reconstruction_matches_snapshots_and_replays() {
        let (doc, _) = sample();
        // structural_edit appends all of its records at once, so only the
        // boundaries between calls are observable snapshots.
        for k in 0..=doc.last_change_id() {
            let past = reconstruct_at(&doc, k).unwrap();
            assert!(past.is_read_only());
            assert_eq!(past.changes().len() as u64, k);
            let rest = &doc.changes()[k as usize..];
            assert_eq!(replay_forward(&past, rest).unwrap().grid(), doc.grid());
        }
        let base = reconstruct_at(&doc, 0).unwrap();
        assert!(base.sheet(0).unwrap().is_empty());
        let at2 = reconstruct_at(&doc, 2).unwrap();
        assert_eq!(at2.sheet(0).unwrap().content(a("B2")), &CellContent::formula("=A1*2"));
    }

    #[test]
    fn reconstruct_latest_is_identity_and_read_only() {
        let (doc, _) = sample();
        let mut now = reconstruct_at(&doc, doc.last_change_id()).unwrap();
        assert_eq!(now.grid(), doc.grid());
        assert_eq!(
            now.set_cell(0, a("Z9"), CellContent::Number(1.0), "x", t(9)),
            Err(ContainerError::ReadOnly)
        );
        assert_eq!(
            reconstruct_at(&doc, doc.last_change_id() + 1),
            Err(AuditError::UnknownChangeId(doc.last_change_id() + 1))
        );
    }

    #[test]
    fn broken_chain_blocks_reconstruction() {
        let (mut doc, _) = sample();
        doc.changes[1].new = CellContent::Number(99.0);
        assert!(matches!(reconstruct_at(&doc, 0), Err(AuditError::ChainViolation(_))));
    }
}
