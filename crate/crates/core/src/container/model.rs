use std::collections::BTreeMap;

use chrono::{DateTime, Utc};

use super::address::{CellAddress, CellRange};
use super::ContainerError;

/// What a cell holds. Numbers compare bitwise so `-0` and `0` are distinct
/// contents and round-trip unchanged.
#[derive(Debug, Clone, Default)]
pub enum CellContent {
    #[default]
    Empty,
    Number(f64),
    Text(String),
    /// Formula source including the leading `=`.
    Formula(String),
}

impl PartialEq for CellContent {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Empty, Self::Empty) => true,
            (Self::Number(a), Self::Number(b)) => a.to_bits() == b.to_bits(),
            (Self::Text(a), Self::Text(b)) => a == b,
            (Self::Formula(a), Self::Formula(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for CellContent {}

impl CellContent {
    pub fn number(x: f64) -> Self {
        Self::Number(x)
    }

    pub fn text(s: impl Into<String>) -> Self {
        Self::Text(s.into())
    }

    pub fn formula(s: impl Into<String>) -> Self {
        Self::Formula(s.into())
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Self::Empty)
    }

    pub fn is_formula(&self) -> bool {
        matches!(self, Self::Formula(_))
    }

    /// Checks the stored-content invariants.
    pub fn validate(&self) -> Result<(), ContainerError> {
        match self {
            Self::Empty => Ok(()),
            Self::Number(x) if x.is_finite() => Ok(()),
            Self::Number(x) => Err(ContainerError::InvalidContent(format!("non-finite number {x}"))),
            Self::Text(s) => check_xml_text(s),
            Self::Formula(src) => {
                if src.len() < 2 || !src.starts_with('=') {
                    return Err(ContainerError::InvalidContent(format!(
                        "formula `{src}` must start with `=` and have a body"
                    )));
                }
                check_xml_text(src)
            }
        }
    }

    /// Human-readable form used in reports: numbers canonical, formulas with `=`.
    pub fn display(&self) -> String {
        match self {
            Self::Empty => String::new(),
            Self::Number(x) => super::number::render(*x),
            Self::Text(s) | Self::Formula(s) => s.clone(),
        }
    }
}

pub(crate) fn check_xml_text(s: &str) -> Result<(), ContainerError> {
    let bad = s
        .chars()
        .find(|&c| !matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..));
    match bad {
        Some(c) => Err(ContainerError::InvalidContent(format!(
            "character U+{:04X} cannot be stored",
            c as u32
        ))),
        None => Ok(()),
    }
}

/// A stored cell: its content and the value its last evaluation produced.
#[derive(Debug, Clone)]
pub struct Cell {
    pub content: CellContent,
    pub cached_value: Option<f64>,
}

impl Cell {
    /// A cell with the cached value implied by its content.
    pub fn new(content: CellContent) -> Self {
        let cached_value = implied_cache(&content, None);
        Self { content, cached_value }
    }
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.content == other.content && self.cached_value.map(f64::to_bits) == other.cached_value.map(f64::to_bits)
    }
}

/// The cached value a cell may carry given its content: numbers cache
/// themselves, formulas keep `formula_cache`, everything else caches nothing.
pub(crate) fn implied_cache(content: &CellContent, formula_cache: Option<f64>) -> Option<f64> {
    match content {
        CellContent::Number(x) => Some(*x),
        CellContent::Formula(_) => formula_cache,
        _ => None,
    }
}

/// What a change record did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeKind {
    /// A cell's content was replaced.
    Content {
        addr: CellAddress,
    },
    RowInsert(u32),
    RowDelete(u32),
    ColInsert(u32),
    ColDelete(u32),
    /// Marker for a user-level block move; the per-cell `Move` records that
    /// follow it carry the actual effect.
    BlockMove {
        from: CellRange,
        to: CellAddress,
    },
    /// One cell's content relocated from `from` to `to`.
    Move {
        from: CellAddress,
        to: CellAddress,
    },
}

impl ChangeKind {
    /// Row/column edits and block-move markers.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            Self::RowInsert(_) | Self::RowDelete(_) | Self::ColInsert(_) | Self::ColDelete(_) | Self::BlockMove { .. }
        )
    }

    pub fn target(&self) -> Option<CellAddress> {
        match self {
            Self::Content { addr } => Some(*addr),
            Self::Move { to, .. } => Some(*to),
            _ => None,
        }
    }

    /// Serialized kind name.
    pub fn name(&self) -> &'static str {
        match self {
            Self::Content { .. } => "content",
            Self::RowInsert(_) => "row-insert",
            Self::RowDelete(_) => "row-delete",
            Self::ColInsert(_) => "col-insert",
            Self::ColDelete(_) => "col-delete",
            Self::BlockMove { .. } => "block-move",
            Self::Move { .. } => "move",
        }
    }
}

/// One tracked mutation.
///
/// For `Move` records `previous` and `new` both hold the relocated content;
/// the source cell becomes empty and the destination was empty beforehand.
/// Structural markers carry empty contents.
#[derive(Debug, Clone)]
pub struct ChangeRecord {
    pub id: u64,
    pub author: String,
    pub timestamp: DateTime<Utc>,
    /// Index into the document's sheet list.
    pub sheet: usize,
    pub kind: ChangeKind,
    pub previous: CellContent,
    pub new: CellContent,
    pub prev_cached_value: Option<f64>,
}

impl PartialEq for ChangeRecord {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.author == other.author
            && self.timestamp == other.timestamp
            && self.sheet == other.sheet
            && self.kind == other.kind
            && self.previous == other.previous
            && self.new == other.new
            && self.prev_cached_value.map(f64::to_bits) == other.prev_cached_value.map(f64::to_bits)
    }
}

/// A per-cell transition implied by a record.
#[derive(Debug, Clone, Copy)]
pub struct CellEffect<'a> {
    pub addr: CellAddress,
    pub before: &'a CellContent,
    pub after: &'a CellContent,
}

static EMPTY: CellContent = CellContent::Empty;

impl ChangeRecord {
    pub fn target(&self) -> Option<CellAddress> {
        self.kind.target()
    }

    /// Cell transitions in application order. Markers have none.
    pub fn cell_effects(&self) -> Vec<CellEffect<'_>> {
        match self.kind {
            ChangeKind::Content { addr } => vec![CellEffect {
                addr,
                before: &self.previous,
                after: &self.new,
            }],
            ChangeKind::Move { from, to } => vec![
                CellEffect {
                    addr: from,
                    before: &self.previous,
                    after: &EMPTY,
                },
                CellEffect {
                    addr: to,
                    before: &EMPTY,
                    after: &self.new,
                },
            ],
            _ => Vec::new(),
        }
    }

    /// Record-level invariants that do not depend on neighbours.
    pub fn validate(&self) -> Result<(), String> {
        if self.id == 0 {
            return Err("id must be positive".into());
        }
        self.previous.validate().map_err(|e| e.to_string())?;
        self.new.validate().map_err(|e| e.to_string())?;
        if let Some(v) = self.prev_cached_value {
            if !v.is_finite() {
                return Err("cached value must be finite".into());
            }
        }
        match self.kind {
            ChangeKind::Content { .. } => {
                if self.previous == self.new {
                    return Err("previous equals new".into());
                }
            }
            ChangeKind::Move { from, to } => {
                if from == to {
                    return Err("move source equals destination".into());
                }
                if self.previous != self.new || self.previous.is_empty() {
                    return Err("move must relocate one non-empty content".into());
                }
            }
            ChangeKind::RowInsert(i)
            | ChangeKind::RowDelete(i)
            | ChangeKind::ColInsert(i)
            | ChangeKind::ColDelete(i) => {
                if i == 0 {
                    return Err("structural index must be at least 1".into());
                }
            }
            ChangeKind::BlockMove { from, to } => {
                if from.start == to {
                    return Err("move source equals destination".into());
                }
            }
        }
        if self.kind.is_structural() && !(self.previous.is_empty() && self.new.is_empty()) {
            return Err("structural markers carry no content".into());
        }
        Ok(())
    }
}

/// One named grid of cells, stored sparsely in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Sheet {
    name: String,
    cells: BTreeMap<CellAddress, Cell>,
}

impl Sheet {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            cells: BTreeMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Seeds base content on a sheet that is not yet part of a document.
    /// Tracked edits go through [`Document::set_cell`].
    pub fn put(&mut self, addr: CellAddress, content: CellContent) -> Result<(), ContainerError> {
        content.validate()?;
        let key = addr.unanchored();
        if content.is_empty() {
            self.cells.remove(&key);
        } else {
            self.cells.insert(key, Cell::new(content));
        }
        Ok(())
    }

    pub fn with(mut self, addr: &str, content: CellContent) -> Result<Self, ContainerError> {
        let addr = CellAddress::parse(addr).map_err(|e| ContainerError::InvalidContent(e.to_string()))?;
        self.put(addr, content)?;
        Ok(self)
    }

    pub fn get(&self, addr: CellAddress) -> Option<&Cell> {
        self.cells.get(&addr.unanchored())
    }

    pub fn content(&self, addr: CellAddress) -> &CellContent {
        self.get(addr).map_or(&EMPTY, |c| &c.content)
    }

    pub fn cached_value(&self, addr: CellAddress) -> Option<f64> {
        self.get(addr).and_then(|c| c.cached_value)
    }

    /// Occupied cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (CellAddress, &Cell)> + '_ {
        self.cells.iter().map(|(a, c)| (*a, c))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Largest occupied row and column, `(0, 0)` for an empty sheet.
    pub fn extent(&self) -> (u32, u32) {
        self.cells.keys().fold((0, 0), |(r, c), a| (r.max(a.row), c.max(a.col)))
    }

    /// Contents only, for grid comparisons that ignore cached values.
    pub fn contents(&self) -> BTreeMap<CellAddress, CellContent> {
        self.cells.iter().map(|(a, c)| (*a, c.content.clone())).collect()
    }

    pub(crate) fn cell_map(&self) -> &BTreeMap<CellAddress, Cell> {
        &self.cells
    }

    pub(crate) fn insert_cell(&mut self, addr: CellAddress, cell: Cell) {
        if cell.content.is_empty() {
            self.cells.remove(&addr.unanchored());
        } else {
            self.cells.insert(addr.unanchored(), cell);
        }
    }

    pub(crate) fn take(&mut self, addr: CellAddress) -> Option<Cell> {
        self.cells.remove(&addr.unanchored())
    }

    /// Assigns `values` to the formula cells in row-major order.
    pub(crate) fn set_formula_caches(&mut self, values: impl IntoIterator<Item = f64>) {
        let formulas = self.cells.values_mut().filter(|c| c.content.is_formula());
        for (cell, v) in formulas.zip(values) {
            cell.cached_value = Some(v);
        }
    }
}

/// Container-level metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meta {
    pub creator: String,
    /// Timestamp of the base version the change log starts from.
    pub created: DateTime<Utc>,
}

/// Sheets plus the append-only change log that produced their current state
/// from the base version.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub(crate) meta: Meta,
    pub(crate) sheets: Vec<Sheet>,
    pub(crate) changes: Vec<ChangeRecord>,
    pub(crate) read_only: bool,
}

pub const DEFAULT_SHEET: &str = "Sheet1";

impl Document {
    /// An empty single-sheet document.
    pub fn new(creator: impl Into<String>, created: DateTime<Utc>) -> Self {
        Self {
            meta: Meta {
                creator: creator.into(),
                created,
            },
            sheets: vec![Sheet::new(DEFAULT_SHEET)],
            changes: Vec::new(),
            read_only: false,
        }
    }

    /// A document whose base version holds `sheets`, with an empty change log.
    pub fn with_sheets(meta: Meta, sheets: Vec<Sheet>) -> Result<Self, ContainerError> {
        let doc = Self {
            meta,
            sheets,
            changes: Vec::new(),
            read_only: false,
        };
        doc.check_sheets()?;
        Ok(doc)
    }

    pub(crate) fn check_sheets(&self) -> Result<(), ContainerError> {
        if self.sheets.is_empty() {
            return Err(ContainerError::InvariantViolation(
                "a document needs at least one sheet".into(),
            ));
        }
        for (i, s) in self.sheets.iter().enumerate() {
            if s.name.is_empty() {
                return Err(ContainerError::InvariantViolation("empty sheet name".into()));
            }
            check_xml_text(&s.name)?;
            if self.sheets[..i].iter().any(|t| t.name == s.name) {
                return Err(ContainerError::InvariantViolation(format!(
                    "duplicate sheet name `{}`",
                    s.name
                )));
            }
        }
        Ok(())
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    pub fn sheets(&self) -> &[Sheet] {
        &self.sheets
    }

    pub fn sheet(&self, index: usize) -> Option<&Sheet> {
        self.sheets.get(index)
    }

    pub fn sheet_index(&self, name: &str) -> Option<usize> {
        self.sheets.iter().position(|s| s.name == name)
    }

    pub fn changes(&self) -> &[ChangeRecord] {
        &self.changes
    }

    pub fn last_change_id(&self) -> u64 {
        self.changes.last().map_or(0, |r| r.id)
    }

    /// Reconstructed historical states are read-only.
    pub fn is_read_only(&self) -> bool {
        self.read_only
    }

    /// Per-sheet contents, ignoring cached values.
    pub fn grid(&self) -> Vec<BTreeMap<CellAddress, CellContent>> {
        self.sheets.iter().map(Sheet::contents).collect()
    }

    pub(crate) fn sheet_mut(&mut self, index: usize) -> Result<&mut Sheet, ContainerError> {
        self.sheets.get_mut(index).ok_or(ContainerError::UnknownSheet(index))
    }

    /// Renders an address qualified by sheet name when it is not on the first sheet.
    pub fn qualified(&self, sheet: usize, addr: impl std::fmt::Display) -> String {
        if sheet == 0 {
            addr.to_string()
        } else {
            format!("{}.{}", self.sheets[sheet].name, addr)
        }
    }
}
