use std::collections::HashMap;
use std::str::FromStr;

use crate::container::{column_letters, number, render_timestamp, ChangeKind, ChangeRecord};

use super::{classify, discrepancy, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format {other:?} (expected text or csv)")),
        }
    }
}

const HEADER: [&str; 8] = ["id", "timestamp", "author", "cell", "class", "previous", "new", "delta"];

/// Change report builder. By default deltas come from the cached-value
/// discrepancy check and cells on sheets other than the first are labelled by
/// position (`Sheet2.A1`).
#[derive(Debug, Clone)]
pub struct Report<'a> {
    records: &'a [ChangeRecord],
    sheet_names: Option<&'a [String]>,
    deltas: Option<&'a HashMap<u64, f64>>,
}

impl<'a> Report<'a> {
    pub fn new(records: &'a [ChangeRecord]) -> Self {
        Self {
            records,
            sheet_names: None,
            deltas: None,
        }
    }

    pub fn sheet_names(mut self, names: &'a [String]) -> Self {
        self.sheet_names = Some(names);
        self
    }

    /// Uses these deltas (by record id) instead of the cached check.
    pub fn deltas(mut self, deltas: &'a HashMap<u64, f64>) -> Self {
        self.deltas = Some(deltas);
        self
    }

    fn cell(&self, r: &ChangeRecord) -> String {
        let place = match r.kind {
            ChangeKind::Content { addr } => addr.to_string(),
            ChangeKind::Move { from, to } => format!("{from}->{to}"),
            ChangeKind::BlockMove { from, to } => format!("{from}->{to}"),
            ChangeKind::RowInsert(i) | ChangeKind::RowDelete(i) => format!("{i}:{i}"),
            ChangeKind::ColInsert(i) | ChangeKind::ColDelete(i) => {
                let c = column_letters(i);
                format!("{c}:{c}")
            }
        };
        if r.sheet == 0 {
            return place;
        }
        match self.sheet_names.and_then(|n| n.get(r.sheet)) {
            Some(name) => format!("{name}.{place}"),
            None => format!("Sheet{}.{place}", r.sheet + 1),
        }
    }

    fn rows(&self) -> Vec<[String; 8]> {
        self.records
            .iter()
            .map(|r| {
                let delta = match self.deltas {
                    Some(d) => d.get(&r.id).copied(),
                    None => discrepancy(r, DEFAULT_TOLERANCE).map(|d| d.delta),
                };
                [
                    r.id.to_string(),
                    render_timestamp(&r.timestamp),
                    r.author.clone(),
                    self.cell(r),
                    classify(r).name().to_string(),
                    r.previous.display(),
                    r.new.display(),
                    delta.map(number::render).unwrap_or_default(),
                ]
            })
            .collect()
    }

    pub fn render(&self, format: ReportFormat) -> Vec<u8> {
        let rows = self.rows();
        match format {
            ReportFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(HEADER).expect("write to memory");
                for row in &rows {
                    w.write_record(row).expect("write to memory");
                }
                w.into_inner().expect("flush to memory")
            }
            ReportFormat::Text => {
                // Multi-line text would break the table; show escapes instead.
                let rows: Vec<Vec<String>> = rows
                    .iter()
                    .map(|row| row.iter().map(|c| c.escape_debug().to_string()).collect())
                    .collect();
                let mut widths = HEADER.map(|h| h.chars().count());
                for row in &rows {
                    for (w, c) in widths.iter_mut().zip(row) {
                        *w = (*w).max(c.chars().count());
                    }
                }
                let mut out = String::new();
                let header = HEADER.map(String::from).to_vec();
                for row in std::iter::once(&header).chain(&rows) {
                    let mut line = String::new();
                    for (i, (c, w)) in row.iter().zip(widths).enumerate() {
                        if i > 0 {
                            line.push_str("  ");
                        }
                        line.push_str(c);
                        line.extend(std::iter::repeat_n(' ', w - c.chars().count()));
                    }
                    out.push_str(line.trim_end());
                    out.push('\n');
                }
                out.into_bytes()
            }
        }
    }
}

/// Renders `records` in log order with one header line.
pub fn render_report(records: &[ChangeRecord], format: ReportFormat) -> Vec<u8> {
    Report::new(records).render(format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::{CellAddress, CellContent, CellRange};
    use chrono::{TimeZone, Utc};

    fn rec(id: u64, kind: ChangeKind, previous: CellContent, new: CellContent, cached: Option<f64>) -> ChangeRecord {
        ChangeRecord {
            id,
            author: "ta, senior".into(),
            timestamp: Utc.with_ymd_and_hms(2004, 3, 1, 9, 0, 0).unwrap(),
            sheet: 0,
            kind,
            previous,
            new,
            prev_cached_value: cached,
        }
    }

    fn a(s: &str) -> CellAddress {
        CellAddress::parse(s).unwrap()
    }

    #[test]
    fn empty_csv_is_header_only() {
        assert_eq!(
            render_report(&[], ReportFormat::Csv),
            b"id,timestamp,author,cell,class,previous,new,delta\n"
        );
    }

    #[test]
    fn discrepancy_fills_delta() {
        let r = rec(
            4,
            ChangeKind::Content { addr: a("E7") },
            CellContent::formula("=B7*0.4+C7*0.6"),
            CellContent::Number(95.0),
            Some(62.0),
        );
        let csv = String::from_utf8(render_report(&[r], ReportFormat::Csv)).unwrap();
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(
            line,
            "4,2004-03-01T09:00:00Z,\"ta, senior\",E7,formula-to-value,=B7*0.4+C7*0.6,95,33"
        );
    }

    #[test]
    fn structural_cells() {
        let e = CellContent::Empty;
        let recs = [
            rec(1, ChangeKind::RowInsert(2), e.clone(), e.clone(), None),
            rec(2, ChangeKind::ColDelete(28), e.clone(), e.clone(), None),
            rec(
                3,
                ChangeKind::BlockMove {
                    from: CellRange::parse("A1:B2").unwrap(),
                    to: a("C5"),
                },
                e.clone(),
                e.clone(),
                None,
            ),
            rec(
                4,
                ChangeKind::Move {
                    from: a("A1"),
                    to: a("C5"),
                },
                CellContent::Number(1.0),
                CellContent::Number(1.0),
                Some(1.0),
            ),
        ];
        let csv = String::from_utf8(render_report(&recs, ReportFormat::Csv)).unwrap();
        let cells: Vec<_> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(4).unwrap().to_string())
            .collect();
        assert_eq!(cells, ["2:2", "AB:AB", "A1:B2->C5", "A1->C5"]);
    }

    #[test]
    fn text_table_is_aligned() {
        let r = rec(
            12,
            ChangeKind::Content { addr: a("A1") },
            CellContent::Empty,
            CellContent::text("two\nlines"),
            None,
        );
        let text = String::from_utf8(render_report(&[r], ReportFormat::Text)).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("id  timestamp "));
        assert_eq!(lines[0].find("author"), lines[1].find("ta, senior"));
        assert!(lines[1].contains("two\\nlines"));
    }

    #[test]
    fn named_sheets_qualify_cells() {
        let mut r = rec(
            1,
            ChangeKind::Content { addr: a("B3") },
            CellContent::Empty,
            CellContent::Number(1.0),
            None,
        );
        r.sheet = 1;
        let names = ["Sheet1".to_string(), "Marks".to_string()];
        let csv = String::from_utf8(
            Report::new(std::slice::from_ref(&r))
                .sheet_names(&names)
                .render(ReportFormat::Csv),
        )
        .unwrap();
        assert!(csv.contains(",Marks.B3,"));
        let csv = String::from_utf8(render_report(&[r], ReportFormat::Csv)).unwrap();
        assert!(csv.contains(",Sheet2.B3,"));
    }
}
