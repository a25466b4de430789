//! A deterministic course gradebook with a known edit history, for tests and
//! demonstrations.
//!
//! Ten students' marks sit on sheet `Marks`; column E totals each row with a
//! formula. The 50 tracked changes include exactly seven totals overwritten
//! by literals, three of which differ from what the formula showed.

use chrono::{DateTime, TimeDelta, TimeZone, Utc};

use crate::container::{CellAddress, CellContent, CellRange, ChangeKind, Document, Meta, Sheet};
use crate::formula::Engine;

pub struct Gradebook {
    pub document: Document,
    /// Ids of records that replaced a total with a literal.
    pub formula_to_value: Vec<u64>,
    /// The subset whose literal differs from the displayed total.
    pub falsified: Vec<u64>,
}

pub const RECORDS: usize = 50;

const STUDENTS: [&str; 10] = [
    "Abbott", "Baker", "Chen", "Dlamini", "Evans", "Fischer", "Gupta", "Hughes", "Ivanova", "Jones",
];

fn a(col: u32, row: u32) -> CellAddress {
    CellAddress::new(col, row)
}

fn total(row: u32, weights: (f64, f64, f64)) -> CellContent {
    CellContent::formula(format!(
        "=B{row}*{}+C{row}*{}+D{row}*{}",
        weights.0, weights.1, weights.2
    ))
}

enum Step {
    Set(u32, u32, CellContent, &'static str),
    /// Overwrite a total with its displayed value plus an offset.
    Paste(u32, f64, &'static str),
    Move(CellRange, CellAddress, &'static str),
}

fn mark(seed: u32) -> f64 {
    // spread 40..99 deterministically
    f64::from(40 + (seed * 37 + 11) % 60)
}

pub fn gradebook() -> Gradebook {
    let created = Utc.with_ymd_and_hms(2004, 3, 1, 9, 0, 0).unwrap();
    let mut sheet = Sheet::new("Marks");
    let put = |s: &mut Sheet, c, r, v| s.put(a(c, r), v).expect("valid base content");
    for (i, h) in ["Student", "Assignment 1", "Assignment 2", "Exam", "Total"]
        .into_iter()
        .enumerate()
    {
        put(&mut sheet, i as u32 + 1, 1, CellContent::text(h));
    }
    for (i, name) in STUDENTS.into_iter().enumerate() {
        let row = i as u32 + 2;
        put(&mut sheet, 1, row, CellContent::text(name));
        for col in 2..=4 {
            put(&mut sheet, col, row, CellContent::Number(mark(row * 3 + col)));
        }
        put(&mut sheet, 5, row, total(row, (0.2, 0.2, 0.6)));
    }
    let meta = Meta {
        creator: "registrar".into(),
        created,
    };
    let mut doc = Document::with_sheets(meta, vec![sheet]).expect("valid gradebook");
    let mut engine = Engine::default();
    engine.recalculate(&mut doc).expect("gradebook evaluates");

    let mut steps = Vec::new();
    for row in 2..=11 {
        steps.push(Step::Set(2, row, CellContent::Number(mark(row * 5 + 1) + 0.5), "alice"));
    }
    // Interleave the overwrites with ordinary marking.
    let pastes = [
        (2, 0.0, "alice"),
        (3, 33.0, "bob"),
        (4, 0.0, "alice"),
        (5, 0.0, "carol"),
        (6, 12.5, "bob"),
        (7, 0.0, "alice"),
        (8, -7.25, "bob"),
    ];
    for (i, (row, offset, who)) in pastes.into_iter().enumerate() {
        steps.push(Step::Set(
            3,
            i as u32 + 2,
            CellContent::Number(mark(i as u32 * 7 + 2) + 0.25),
            "alice",
        ));
        steps.push(Step::Paste(row, offset, who));
    }
    for row in 2..=6 {
        steps.push(Step::Set(6, row, CellContent::text("checked"), "carol"));
    }
    for row in 4..=6 {
        steps.push(Step::Set(6, row, CellContent::Empty, "carol"));
    }
    steps.push(Step::Move(CellRange::new(a(6, 2), a(6, 3)), a(8, 2), "carol"));
    for row in 9..=11 {
        steps.push(Step::Set(5, row, total(row, (0.25, 0.25, 0.5)), "alice"));
    }
    steps.push(Step::Set(7, 2, CellContent::formula("=E2*2"), "alice"));
    steps.push(Step::Set(7, 3, CellContent::formula("=MAX(E2:E11)"), "alice"));
    for row in 9..=11 {
        steps.push(Step::Set(3, row, CellContent::Number(mark(row * 11) + 0.75), "bob"));
    }
    for row in 2..=8 {
        steps.push(Step::Set(4, row, CellContent::Number(mark(row * 13) - 0.5), "alice"));
    }

    let mut when = created;
    let mut tick = || {
        when += TimeDelta::seconds(90);
        when
    };
    let mut formula_to_value = Vec::new();
    let mut falsified = Vec::new();
    for step in steps {
        let ts: DateTime<Utc> = tick();
        match step {
            Step::Set(col, row, content, who) => {
                doc.set_cell(0, a(col, row), content, who, ts).expect("fixture edit");
            }
            Step::Paste(row, offset, who) => {
                let shown = doc.sheet(0).unwrap().cached_value(a(5, row)).expect("total is cached");
                let rec = doc
                    .set_cell(0, a(5, row), CellContent::Number(shown + offset), who, ts)
                    .expect("fixture edit");
                formula_to_value.push(rec.id);
                if offset != 0.0 {
                    falsified.push(rec.id);
                }
            }
            Step::Move(from, to, who) => {
                doc.structural_edit(0, ChangeKind::BlockMove { from, to }, who, ts)
                    .expect("fixture edit");
            }
        }
        engine.recalculate(&mut doc).expect("gradebook evaluates");
    }
    debug_assert_eq!(doc.changes().len(), RECORDS);
    Gradebook {
        document: doc,
        formula_to_value,
        falsified,
    }
}
