use chrono::{DateTime, TimeDelta, Utc};

use crate::container::{CellAddress, CellRange, ChangeKind, ChangeRecord};

/// Default span of timestamps merged into one block.
pub const DEFAULT_BLOCK_WINDOW: TimeDelta = TimeDelta::seconds(2);

/// A user-level block move rebuilt from per-cell move records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockOp {
    pub sheet: usize,
    pub from_region: CellRange,
    pub to_region: CellRange,
    pub record_ids: Vec<u64>,
    pub author: String,
    pub first: DateTime<Utc>,
    pub last: DateTime<Utc>,
}

fn displacement(from: CellAddress, to: CellAddress) -> (i64, i64) {
    (
        i64::from(to.row) - i64::from(from.row),
        i64::from(to.col) - i64::from(from.col),
    )
}

/// [`group_blocks_within`] with the default two-second window.
pub fn group_blocks(log: &[ChangeRecord]) -> Vec<BlockOp> {
    group_blocks_within(log, DEFAULT_BLOCK_WINDOW)
}

/// Merges maximal runs of adjacent move records that share sheet, author and
/// displacement, and whose timestamps lie within `window` of the run's first
/// record. Any other record ends a run.
pub fn group_blocks_within(log: &[ChangeRecord], window: TimeDelta) -> Vec<BlockOp> {
    struct Run {
        op: BlockOp,
        shift: (i64, i64),
        sources: Vec<CellAddress>,
        targets: Vec<CellAddress>,
    }
    fn finish(run: Run) -> BlockOp {
        let mut op = run.op;
        op.from_region = CellRange::bounding(run.sources).expect("non-empty run");
        op.to_region = CellRange::bounding(run.targets).expect("non-empty run");
        op
    }

    let mut out = Vec::new();
    let mut current: Option<Run> = None;
    for r in log {
        let ChangeKind::Move { from, to } = r.kind else {
            out.extend(current.take().map(finish));
            continue;
        };
        let shift = displacement(from, to);
        if let Some(run) = &mut current {
            if run.op.sheet == r.sheet
                && run.op.author == r.author
                && run.shift == shift
                && r.timestamp >= run.op.first
                && r.timestamp - run.op.first <= window
            {
                run.op.record_ids.push(r.id);
                run.op.last = run.op.last.max(r.timestamp);
                run.sources.push(from);
                run.targets.push(to);
                continue;
            }
            out.extend(current.take().map(finish));
        }
        current = Some(Run {
            op: BlockOp {
                sheet: r.sheet,
                from_region: CellRange::single(from),
                to_region: CellRange::single(to),
                record_ids: vec![r.id],
                author: r.author.clone(),
                first: r.timestamp,
                last: r.timestamp,
            },
            shift,
            sources: vec![from],
            targets: vec![to],
        });
    }
    out.extend(current.map(finish));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::{CellContent, Document};
    use chrono::TimeZone;

    fn t(s: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_000_000 + s, 0).unwrap()
    }

    fn a(s: &str) -> CellAddress {
        CellAddress::parse(s).unwrap()
    }

    #[test]
    fn two_by_two_move_is_one_block() {
        let mut doc = Document::new("x", t(0));
        for (i, c) in ["A1", "B1", "A2", "B2"].into_iter().enumerate() {
            doc.set_cell(0, a(c), CellContent::Number(i as f64), "x", t(1)).unwrap();
        }
        let kind = ChangeKind::BlockMove {
            from: CellRange::parse("A1:B2").unwrap(),
            to: a("C5"),
        };
        let recs = doc.structural_edit(0, kind, "x", t(2)).unwrap();
        let blocks = group_blocks(doc.changes());
        assert_eq!(blocks.len(), 1);
        let b = &blocks[0];
        assert_eq!(b.record_ids.len(), 4);
        assert_eq!(b.record_ids, recs[1..].iter().map(|r| r.id).collect::<Vec<_>>());
        assert_eq!(b.from_region, CellRange::parse("A1:B2").unwrap());
        assert_eq!(b.to_region, CellRange::parse("C5:D6").unwrap());
    }

    fn mv(id: u64, author: &str, from: &str, to: &str, ts: i64) -> ChangeRecord {
        ChangeRecord {
            id,
            author: author.into(),
            timestamp: t(ts),
            sheet: 0,
            kind: ChangeKind::Move {
                from: a(from),
                to: a(to),
            },
            previous: CellContent::Number(1.0),
            new: CellContent::Number(1.0),
            prev_cached_value: Some(1.0),
        }
    }

    #[test]
    fn author_displacement_and_window_split_runs() {
        assert!(group_blocks(&[]).is_empty());
        let log = [mv(1, "a", "A1", "B1", 0), mv(2, "b", "A2", "B2", 0)];
        assert_eq!(group_blocks(&log).len(), 2);
        let log = [mv(1, "a", "A1", "B1", 0), mv(2, "a", "A2", "C2", 0)];
        assert_eq!(group_blocks(&log).len(), 2);
        let log = [
            mv(1, "a", "A1", "B1", 0),
            mv(2, "a", "A2", "B2", 2),
            mv(3, "a", "A3", "B3", 3),
        ];
        let blocks = group_blocks(&log);
        assert_eq!(blocks.iter().map(|b| b.record_ids.len()).collect::<Vec<_>>(), [2, 1]);
    }

    #[test]
    fn every_id_in_at_most_one_block() {
        let log: Vec<_> = (1..=20)
            .map(|i| mv(i, ["a", "b"][(i % 3 == 0) as usize], "A1", "B2", i as i64))
            .collect();
        let mut ids: Vec<u64> = group_blocks(&log).into_iter().flat_map(|b| b.record_ids).collect();
        let n = ids.len();
        ids.dedup();
        assert_eq!(ids.len(), n);
        assert_eq!(n, 20);
    }
}
