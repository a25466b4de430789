use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Largest addressable row.
pub const MAX_ROWS: u32 = 1_048_576;
/// Largest addressable column (`XFD`).
pub const MAX_COLS: u32 = 16_384;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid cell address `{0}`")]
pub struct AddressError(pub String);

/// A1-style cell address with optional `$` anchors.
///
/// Field order gives the derived `Ord` row-major ordering. Grid keys always use
/// the unanchored form, see [`CellAddress::unanchored`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellAddress {
    pub row: u32,
    pub col: u32,
    pub row_abs: bool,
    pub col_abs: bool,
}

impl CellAddress {
    /// Relative address; panics on a zero index.
    pub fn new(col: u32, row: u32) -> Self {
        assert!(col >= 1 && row >= 1, "cell indices are 1-based");
        Self {
            row,
            col,
            row_abs: false,
            col_abs: false,
        }
    }

    pub fn try_new(col: u32, row: u32) -> Result<Self, AddressError> {
        if (1..=MAX_COLS).contains(&col) && (1..=MAX_ROWS).contains(&row) {
            Ok(Self::new(col, row))
        } else {
            Err(AddressError(format!("col {col}, row {row}")))
        }
    }

    pub fn with_anchors(mut self, col_abs: bool, row_abs: bool) -> Self {
        self.col_abs = col_abs;
        self.row_abs = row_abs;
        self
    }

    pub fn unanchored(self) -> Self {
        Self::new(self.col, self.row)
    }

    /// Shifts by a signed displacement, `None` when the result leaves the grid.
    pub fn offset(self, d_row: i64, d_col: i64) -> Option<Self> {
        let row = i64::from(self.row) + d_row;
        let col = i64::from(self.col) + d_col;
        if (1..=i64::from(MAX_ROWS)).contains(&row) && (1..=i64::from(MAX_COLS)).contains(&col) {
            Some(Self {
                row: row as u32,
                col: col as u32,
                ..self
            })
        } else {
            None
        }
    }

    pub fn parse(text: &str) -> Result<Self, AddressError> {
        let err = || AddressError(text.to_string());
        let bytes = text.as_bytes();
        let mut i = 0;
        let col_abs = bytes.first() == Some(&b'$');
        if col_abs {
            i += 1;
        }
        let letters_start = i;
        while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
            i += 1;
        }
        let letters = &text[letters_start..i];
        let row_abs = bytes.get(i) == Some(&b'$');
        if row_abs {
            i += 1;
        }
        let digits = &text[i..];
        if letters.is_empty()
            || digits.is_empty()
            || !digits.bytes().all(|b| b.is_ascii_digit())
            || digits.starts_with('0')
        {
            return Err(err());
        }
        let col = column_index(letters).ok_or_else(err)?;
        let row: u32 = digits.parse().map_err(|_| err())?;
        Ok(Self::try_new(col, row)
            .map_err(|_| err())?
            .with_anchors(col_abs, row_abs))
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.col_abs {
            f.write_str("$")?;
        }
        f.write_str(&column_letters(self.col))?;
        if self.row_abs {
            f.write_str("$")?;
        }
        write!(f, "{}", self.row)
    }
}

impl FromStr for CellAddress {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// `1 -> "A"`, `27 -> "AA"`.
pub fn column_letters(mut col: u32) -> String {
    let mut out = Vec::new();
    while col > 0 {
        let rem = (col - 1) % 26;
        out.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Inverse of [`column_letters`]; case-insensitive.
pub fn column_index(letters: &str) -> Option<u32> {
    if letters.is_empty() || letters.len() > 3 {
        return None;
    }
    let mut col: u32 = 0;
    for b in letters.bytes() {
        if !b.is_ascii_alphabetic() {
            return None;
        }
        col = col * 26 + u32::from(b.to_ascii_uppercase() - b'A') + 1;
    }
    (col <= MAX_COLS).then_some(col)
}

/// Rectangular range, normalized so `start` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellRange {
    pub start: CellAddress,
    pub end: CellAddress,
}

impl CellRange {
    /// Builds a normalized range from two opposite corners. Anchor flags travel
    /// with their coordinate.
    pub fn new(a: CellAddress, b: CellAddress) -> Self {
        let (r0, r0_abs, r1, r1_abs) = if a.row <= b.row {
            (a.row, a.row_abs, b.row, b.row_abs)
        } else {
            (b.row, b.row_abs, a.row, a.row_abs)
        };
        let (c0, c0_abs, c1, c1_abs) = if a.col <= b.col {
            (a.col, a.col_abs, b.col, b.col_abs)
        } else {
            (b.col, b.col_abs, a.col, a.col_abs)
        };
        Self {
            start: CellAddress::new(c0, r0).with_anchors(c0_abs, r0_abs),
            end: CellAddress::new(c1, r1).with_anchors(c1_abs, r1_abs),
        }
    }

    pub fn single(a: CellAddress) -> Self {
        Self { start: a, end: a }
    }

    pub fn rows(&self) -> u32 {
        self.end.row - self.start.row + 1
    }

    pub fn cols(&self) -> u32 {
        self.end.col - self.start.col + 1
    }

    pub fn contains(&self, addr: CellAddress) -> bool {
        (self.start.row..=self.end.row).contains(&addr.row) && (self.start.col..=self.end.col).contains(&addr.col)
    }

    /// Smallest range covering every address, `None` for an empty iterator.
    pub fn bounding<I: IntoIterator<Item = CellAddress>>(addrs: I) -> Option<Self> {
        let mut it = addrs.into_iter();
        let first = it.next()?;
        let (mut r0, mut c0, mut r1, mut c1) = (first.row, first.col, first.row, first.col);
        for a in it {
            r0 = r0.min(a.row);
            c0 = c0.min(a.col);
            r1 = r1.max(a.row);
            c1 = c1.max(a.col);
        }
        Some(Self::new(CellAddress::new(c0, r0), CellAddress::new(c1, r1)))
    }

    pub fn parse(text: &str) -> Result<Self, AddressError> {
        match text.split_once(':') {
            Some((a, b)) => Ok(Self::new(CellAddress::parse(a)?, CellAddress::parse(b)?)),
            None => Ok(Self::single(CellAddress::parse(text)?)),
        }
    }
}

impl fmt::Display for CellRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for CellRange {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}
