use chrono::{TimeZone, Utc};

use crate::container::{column_letters, CellAddress, CellContent, Document, Meta, Sheet};

use super::BenchError;

/// Largest benchmark-A size generated unless a caller raises it.
pub const DEFAULT_SIZE_CAP: usize = 60;

fn put(sheet: &mut Sheet, col: u32, row: u32, content: CellContent) {
    sheet
        .put(CellAddress::new(col, row), content)
        .expect("generated content is valid");
}

fn document(sheet: Sheet) -> Document {
    let meta = Meta {
        creator: "celltrail bench".into(),
        created: Utc.with_ymd_and_hms(2003, 1, 1, 0, 0, 0).unwrap(),
    };
    Document::with_sheets(meta, vec![sheet]).expect("generated sheet is valid")
}

/// The matrix-inverse load sheet for an `n`×`n` main section.
///
/// Row 1 and column A count 1, 2, … away from the corner; row 2 and column B
/// hold trigonometric sequences seeded by the literal `b2` in B2. Main cell
/// (row `2+i`, column `2+j`) shows the top-left entry of the inverse of the
/// largest square block that ends diagonally above-left of it.
pub fn generate_bench_a(n: usize, b2: f64) -> Result<Document, BenchError> {
    generate_bench_a_with_cap(n, b2, DEFAULT_SIZE_CAP)
}

pub fn generate_bench_a_with_cap(n: usize, b2: f64, cap: usize) -> Result<Document, BenchError> {
    if n == 0 {
        return Err(BenchError::InvalidSize("size must be at least 1".into()));
    }
    if n > cap {
        return Err(BenchError::CapExceeded { n, cap });
    }
    if b2 == 0.0 || !b2.is_finite() {
        return Err(BenchError::ZeroSeed);
    }
    let last = n as u32 + 2;
    let mut s = Sheet::new("Sheet1");
    put(&mut s, 2, 1, CellContent::Number(0.0));
    put(&mut s, 1, 2, CellContent::Number(0.0));
    put(&mut s, 2, 2, CellContent::Number(b2));
    for col in 3..=last {
        let prev = column_letters(col - 1);
        put(&mut s, col, 1, CellContent::formula(format!("={prev}1+1")));
        put(&mut s, col, 2, CellContent::formula(format!("=SIN({prev}2+{prev}1)")));
    }
    for row in 3..=last {
        let prev = row - 1;
        put(&mut s, 1, row, CellContent::formula(format!("=A{prev}+1")));
        put(&mut s, 2, row, CellContent::formula(format!("=COS(B{prev}+A{prev})")));
    }
    for row in 3..=last {
        for col in 3..=last {
            let c = column_letters(col);
            put(
                &mut s,
                col,
                row,
                CellContent::formula(format!(
                    "=INDEX(MINVERSE(OFFSET($A$1;1+MAX(0;$A{row}-{c}$1);1+MAX(0;{c}$1-$A{row});MIN({c}$1;$A{row});MIN({c}$1;$A{row})));1;1)"
                )),
            );
        }
    }
    Ok(document(s))
}

/// The light exp-sin-cos load sheet with a `rows`×`cols` main section whose
/// top-left cell is B4.
pub fn generate_bench_b(rows: usize, cols: usize) -> Result<Document, BenchError> {
    if rows == 0 || cols == 0 {
        return Err(BenchError::InvalidSize("rows and cols must be at least 1".into()));
    }
    let (last_row, last_col) = (rows as u32 + 3, cols as u32 + 1);
    if last_row > crate::container::MAX_ROWS || last_col > crate::container::MAX_COLS {
        return Err(BenchError::InvalidSize(format!("{rows}x{cols} does not fit the grid")));
    }
    let mut s = Sheet::new("Sheet1");
    put(&mut s, 1, 3, CellContent::Number(1.0));
    for col in 2..=last_col {
        let prev = column_letters(col - 1);
        put(&mut s, col, 3, CellContent::formula(format!("={prev}3+1")));
    }
    for row in 4..=last_row {
        put(&mut s, 1, row, CellContent::formula(format!("=A{}+2", row - 1)));
        for col in 2..=last_col {
            let c = column_letters(col);
            put(
                &mut s,
                col,
                row,
                CellContent::formula(format!("=EXP(SIN(COS($A{row}*{c}$3)))")),
            );
        }
    }
    Ok(document(s))
}
