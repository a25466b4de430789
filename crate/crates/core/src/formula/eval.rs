use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::container::{CellAddress, CellContent, CellRange, Document, Sheet};

use super::ast::{BinaryOp, Expr, Function};
use super::matrix::{minverse, Matrix, MatrixError};
use super::{parse_formula, FormulaError};

/// Result of evaluating an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(f64),
    Matrix(Matrix),
    RangeRef(CellRange),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("circular reference: {}", fmt_path(.0))]
    CycleDetected(Vec<CellAddress>),
    #[error("cell {0} is not numeric inside a matrix argument")]
    NonNumericInMatrix(CellAddress),
    #[error("cell {0} holds text where a number is needed")]
    TextOperand(CellAddress),
    #[error("INDEX({row}, {col}) outside a {rows}x{cols} matrix")]
    IndexOutOfBounds {
        row: i64,
        col: i64,
        rows: usize,
        cols: usize,
    },
    #[error("OFFSET result leaves the grid")]
    OffsetOutOfGrid,
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("range {0} is too large to materialize")]
    RangeTooLarge(CellRange),
    #[error("formula in {addr} does not parse: {source}")]
    Parse { addr: CellAddress, source: FormulaError },
}

fn fmt_path(path: &[CellAddress]) -> String {
    path.iter().map(ToString::to_string).collect::<Vec<_>>().join(" -> ")
}

/// A failure during recalculation, tagged with the cell being recalculated.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{sheet}!{addr}: {source}")]
pub struct RecalcError {
    pub sheet: String,
    pub addr: CellAddress,
    pub source: EvalError,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecalcStats {
    pub cells_evaluated: usize,
    /// Wall-clock seconds.
    pub duration: f64,
    pub max_dependency_depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalConfig {
    /// Largest matrix order MINVERSE accepts.
    pub minverse_cap: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { minverse_cap: 64 }
    }
}

/// Largest range materialized into a matrix.
const MAX_MATERIALIZED: u64 = 1 << 20;

type Parsed = Result<Arc<Expr>, FormulaError>;

/// A formula cell with its parsed source.
#[derive(Debug, Clone)]
struct Entry {
    addr: CellAddress,
    source: String,
    parsed: Parsed,
}

/// Parses the formula cells of `sheet` in row-major order, reusing entries
/// from `previous` (also row-major) whose address and source are unchanged.
fn resolve(previous: Vec<Entry>, sheet: &Sheet) -> Vec<Entry> {
    let mut out = Vec::with_capacity(previous.len());
    let mut prev = previous.into_iter().peekable();
    for (addr, cell) in sheet.cells() {
        let CellContent::Formula(source) = &cell.content else {
            continue;
        };
        while prev.next_if(|e| e.addr < addr).is_some() {}
        match prev.next_if(|e| e.addr == addr) {
            Some(e) if e.source == *source => out.push(e),
            _ => out.push(Entry {
                addr,
                source: source.clone(),
                parsed: parse_formula(source).map(Arc::new),
            }),
        }
    }
    out
}

/// Keeps parsed formulas between recalculations. Holds no cell values, so
/// every recalculation starts from an empty memo.
#[derive(Debug, Default)]
pub struct Engine {
    config: EvalConfig,
    sheets: Vec<Vec<Entry>>,
}

impl Engine {
    pub fn new(config: EvalConfig) -> Self {
        Self {
            config,
            sheets: Vec::new(),
        }
    }

    pub fn config(&self) -> EvalConfig {
        self.config
    }

    /// Re-evaluates every formula cell and stores the results as cached values.
    pub fn recalculate(&mut self, doc: &mut Document) -> Result<RecalcStats, RecalcError> {
        let started = Instant::now();
        let mut cells_evaluated = 0;
        let mut max_depth = 0;
        self.sheets.resize_with(doc.sheets().len(), Vec::new);
        let mut updates = Vec::with_capacity(doc.sheets().len());
        for (sheet, parsed) in doc.sheets().iter().zip(&mut self.sheets) {
            *parsed = resolve(std::mem::take(parsed), sheet);
            let mut ev = Evaluator::with_entries(sheet, parsed, self.config);
            let mut values = Vec::with_capacity(parsed.len());
            for e in parsed.iter() {
                let v = ev.cell_value(e.addr).map_err(|source| RecalcError {
                    sheet: sheet.name().to_string(),
                    addr: e.addr,
                    source,
                })?;
                values.push(v);
            }
            cells_evaluated += ev.cells_evaluated;
            max_depth = max_depth.max(ev.max_depth);
            updates.push(values);
        }
        for (sheet, values) in updates.into_iter().enumerate() {
            doc.sheet_mut(sheet)
                .expect("sheet count unchanged")
                .set_formula_caches(values);
        }
        Ok(RecalcStats {
            cells_evaluated,
            duration: started.elapsed().as_secs_f64(),
            max_dependency_depth: max_depth,
        })
    }
}

/// Full recalculation without keeping parsed formulas.
pub fn recalculate(doc: &mut Document) -> Result<RecalcStats, RecalcError> {
    Engine::default().recalculate(doc)
}

/// Evaluates the content of one cell on `sheet`, returning the formula's full
/// value (which may be a matrix or a reference).
pub fn evaluate_cell(doc: &Document, sheet: usize, addr: CellAddress) -> Result<Value, EvalError> {
    let sheet = doc
        .sheet(sheet)
        .ok_or_else(|| EvalError::TypeMismatch(format!("no sheet {sheet}")))?;
    Evaluator::new(sheet, EvalConfig::default()).evaluate_at(addr)
}

#[derive(Debug, Clone)]
enum State {
    Pending,
    Active,
    Done(f64),
    Failed(EvalError),
}

#[derive(Debug, Clone)]
enum Slot {
    Empty,
    Number(f64),
    Text,
    Formula { parsed: Parsed, state: State },
}

/// Cell slots over the sheet's used area; dense when that area is compact.
enum Slots {
    Dense {
        rows: u32,
        cols: u32,
        slots: Vec<Slot>,
    },
    Sparse {
        rows: u32,
        cols: u32,
        slots: HashMap<CellAddress, Slot>,
    },
}

/// Running totals for SUM, MAX and MIN.
#[derive(Debug, Clone, Copy)]
struct Aggregate {
    count: usize,
    sum: f64,
    max: f64,
    min: f64,
}

impl Default for Aggregate {
    fn default() -> Self {
        Self {
            count: 0,
            sum: 0.0,
            max: f64::NEG_INFINITY,
            min: f64::INFINITY,
        }
    }
}

impl Aggregate {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.max = self.max.max(x);
        self.min = self.min.min(x);
    }
}

static EMPTY_SLOT: Slot = Slot::Empty;

impl Slots {
    /// `entries` are the sheet's formula cells in row-major order.
    fn build(sheet: &Sheet, entries: &[Entry]) -> Self {
        let (rows, cols) = sheet.extent();
        let area = u64::from(rows) * u64::from(cols);
        let mut entries = entries.iter();
        let mut slot_of = |content: &CellContent| match content {
            CellContent::Empty => Slot::Empty,
            CellContent::Number(x) => Slot::Number(*x),
            CellContent::Text(_) => Slot::Text,
            CellContent::Formula(_) => Slot::Formula {
                parsed: entries.next().expect("one entry per formula").parsed.clone(),
                state: State::Pending,
            },
        };
        if area <= (4 * sheet.len() as u64).max(1 << 16) {
            let mut slots = vec![Slot::Empty; area as usize];
            for (a, c) in sheet.cells() {
                slots[((a.row - 1) * cols + (a.col - 1)) as usize] = slot_of(&c.content);
            }
            Slots::Dense { rows, cols, slots }
        } else {
            Slots::Sparse {
                rows,
                cols,
                slots: sheet.cells().map(|(a, c)| (a, slot_of(&c.content))).collect(),
            }
        }
    }

    /// Last used row and column.
    fn extent(&self) -> (u32, u32) {
        match self {
            Slots::Dense { rows, cols, .. } | Slots::Sparse { rows, cols, .. } => (*rows, *cols),
        }
    }

    fn get(&self, a: CellAddress) -> &Slot {
        match self {
            Slots::Dense { rows, cols, slots } => {
                if a.row <= *rows && a.col <= *cols {
                    &slots[((a.row - 1) * cols + (a.col - 1)) as usize]
                } else {
                    &EMPTY_SLOT
                }
            }
            Slots::Sparse { slots, .. } => slots.get(&a.unanchored()).unwrap_or(&EMPTY_SLOT),
        }
    }

    /// Columns `c0..=c1` of `row` when they lie inside a dense grid.
    fn row_slice(&self, row: u32, c0: u32, c1: u32) -> Option<&[Slot]> {
        match self {
            Slots::Dense { rows, cols, slots } if row <= *rows && c1 <= *cols => {
                let base = ((row - 1) * cols) as usize;
                Some(&slots[base + (c0 - 1) as usize..base + c1 as usize])
            }
            _ => None,
        }
    }

    fn state_mut(&mut self, a: CellAddress) -> &mut State {
        let slot = match self {
            Slots::Dense { cols, slots, .. } => &mut slots[((a.row - 1) * *cols + (a.col - 1)) as usize],
            Slots::Sparse { slots, .. } => slots.get_mut(&a.unanchored()).expect("formula slot"),
        };
        match slot {
            Slot::Formula { state, .. } => state,
            _ => unreachable!("state of a non-formula slot"),
        }
    }
}

/// Demand-driven evaluator over one sheet. Each formula cell is evaluated at
/// most once per evaluator; a cell met again while still in progress is a cycle.
pub struct Evaluator {
    slots: Slots,
    config: EvalConfig,
    stack: Vec<CellAddress>,
    cells_evaluated: usize,
    max_depth: usize,
}

impl Evaluator {
    pub fn new(sheet: &Sheet, config: EvalConfig) -> Self {
        Self::with_entries(sheet, &resolve(Vec::new(), sheet), config)
    }

    fn with_entries(sheet: &Sheet, entries: &[Entry], config: EvalConfig) -> Self {
        Self {
            slots: Slots::build(sheet, entries),
            config,
            stack: Vec::new(),
            cells_evaluated: 0,
            max_depth: 0,
        }
    }

    /// Formula cells evaluated so far.
    pub fn cells_evaluated(&self) -> usize {
        self.cells_evaluated
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Full value of whatever `addr` holds; formulas are evaluated afresh at
    /// the top level (their dependencies are memoized).
    pub fn evaluate_at(&mut self, addr: CellAddress) -> Result<Value, EvalError> {
        let addr = addr.unanchored();
        match self.slots.get(addr).clone() {
            Slot::Empty => Ok(Value::Scalar(0.0)),
            Slot::Number(x) => Ok(Value::Scalar(x)),
            Slot::Text => Err(EvalError::TextOperand(addr)),
            Slot::Formula { parsed, .. } => {
                let expr = parsed.map_err(|source| EvalError::Parse { addr, source })?;
                self.stack.push(addr);
                *self.slots.state_mut(addr) = State::Active;
                let result = self.eval(&expr);
                self.stack.pop();
                *self.slots.state_mut(addr) = State::Pending;
                result
            }
        }
    }

    /// Scalar value of a cell as seen by a formula referring to it.
    pub fn cell_value(&mut self, addr: CellAddress) -> Result<f64, EvalError> {
        let addr = addr.unanchored();
        match self.slots.get(addr) {
            Slot::Empty => Ok(0.0),
            Slot::Number(x) => Ok(*x),
            Slot::Text => Err(EvalError::TextOperand(addr)),
            Slot::Formula { parsed, state } => match state {
                State::Done(v) => Ok(*v),
                State::Failed(e) => Err(e.clone()),
                State::Active => {
                    let start = self.stack.iter().position(|a| *a == addr).unwrap_or(0);
                    let mut path = self.stack[start..].to_vec();
                    path.push(addr);
                    Err(EvalError::CycleDetected(path))
                }
                State::Pending => {
                    let parsed = parsed.clone();
                    self.eval_formula_cell(addr, parsed)
                }
            },
        }
    }

    fn eval_formula_cell(&mut self, addr: CellAddress, parsed: Parsed) -> Result<f64, EvalError> {
        *self.slots.state_mut(addr) = State::Active;
        self.stack.push(addr);
        self.max_depth = self.max_depth.max(self.stack.len());
        let result = parsed
            .map_err(|source| EvalError::Parse { addr, source })
            .and_then(|expr| stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.eval(&expr)))
            .and_then(|v| self.cell_scalar_of(v));
        self.stack.pop();
        self.cells_evaluated += 1;
        *self.slots.state_mut(addr) = match &result {
            Ok(v) => State::Done(*v),
            Err(e) => State::Failed(e.clone()),
        };
        result
    }

    /// A formula cell holding a matrix or reference shows its top-left value.
    fn cell_scalar_of(&mut self, v: Value) -> Result<f64, EvalError> {
        match v {
            Value::Scalar(x) => Ok(x),
            Value::Matrix(m) => Ok(m.get(0, 0)),
            Value::RangeRef(r) => self.cell_value(r.start),
        }
    }

    fn scalar(&mut self, e: &Expr) -> Result<f64, EvalError> {
        match self.eval(e)? {
            Value::Scalar(x) => Ok(x),
            Value::RangeRef(r) if r.rows() == 1 && r.cols() == 1 => self.cell_value(r.start),
            Value::Matrix(m) if m.rows() == 1 && m.cols() == 1 => Ok(m.get(0, 0)),
            Value::RangeRef(r) => Err(EvalError::TypeMismatch(format!(
                "range {r} used where a number is needed"
            ))),
            Value::Matrix(m) => Err(EvalError::TypeMismatch(format!(
                "{}x{} matrix used where a number is needed",
                m.rows(),
                m.cols()
            ))),
        }
    }

    fn finite(x: f64, what: impl FnOnce() -> String) -> Result<f64, EvalError> {
        if x.is_finite() {
            Ok(x)
        } else {
            Err(EvalError::DomainError(what()))
        }
    }

    fn eval(&mut self, e: &Expr) -> Result<Value, EvalError> {
        match e {
            Expr::Num(x) => Ok(Value::Scalar(*x)),
            Expr::Ref(a) => Ok(Value::Scalar(self.cell_value(*a)?)),
            Expr::Range(r) => Ok(Value::RangeRef(*r)),
            Expr::Neg(inner) => Ok(Value::Scalar(-self.scalar(inner)?)),
            Expr::Binary(op, l, r) => {
                let a = self.scalar(l)?;
                let b = self.scalar(r)?;
                let v = match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinaryOp::Pow => a.powf(b),
                };
                Ok(Value::Scalar(Self::finite(v, || format!("{a} {} {b}", op.symbol()))?))
            }
            Expr::Func(f, args) => self.call(*f, args),
        }
    }

    fn call(&mut self, f: Function, args: &[Expr]) -> Result<Value, EvalError> {
        let unary = |this: &mut Self, g: fn(f64) -> f64| -> Result<Value, EvalError> {
            let x = this.scalar(&args[0])?;
            Ok(Value::Scalar(Self::finite(g(x), || format!("{}({x})", f.name()))?))
        };
        match f {
            Function::Sin => unary(self, f64::sin),
            Function::Cos => unary(self, f64::cos),
            Function::Exp => unary(self, f64::exp),
            Function::Max | Function::Min | Function::Sum => {
                let mut acc = Aggregate::default();
                for a in args {
                    self.collect_numbers(a, &mut acc)?;
                }
                let v = match f {
                    Function::Sum => acc.sum,
                    _ if acc.count == 0 => 0.0,
                    Function::Max => acc.max,
                    _ => acc.min,
                };
                Ok(Value::Scalar(Self::finite(v, || f.name().to_string())?))
            }
            Function::Index => {
                let m = self.matrix(&args[0], false)?;
                let row = self.scalar(&args[1])?.trunc() as i64;
                let col = self.scalar(&args[2])?.trunc() as i64;
                if row < 1 || col < 1 || row as usize > m.rows() || col as usize > m.cols() {
                    return Err(EvalError::IndexOutOfBounds {
                        row,
                        col,
                        rows: m.rows(),
                        cols: m.cols(),
                    });
                }
                Ok(Value::Scalar(m.get(row as usize - 1, col as usize - 1)))
            }
            Function::Offset => {
                let anchor = self.reference(&args[0])?;
                let d_row = self.scalar(&args[1])?.trunc() as i64;
                let d_col = self.scalar(&args[2])?.trunc() as i64;
                let height = self.scalar(&args[3])?.trunc() as i64;
                let width = self.scalar(&args[4])?.trunc() as i64;
                if height < 1 || width < 1 {
                    return Err(EvalError::DomainError(format!("OFFSET size {height}x{width}")));
                }
                let start = anchor.start.offset(d_row, d_col).ok_or(EvalError::OffsetOutOfGrid)?;
                let end = start.offset(height - 1, width - 1).ok_or(EvalError::OffsetOutOfGrid)?;
                Ok(Value::RangeRef(CellRange::new(start.unanchored(), end.unanchored())))
            }
            Function::Minverse => {
                if let Some(r) = self.static_range(&args[0]) {
                    let (rows, cols) = (r.rows() as usize, r.cols() as usize);
                    if rows != cols {
                        return Err(MatrixError::NotSquare { rows, cols }.into());
                    }
                    if rows > self.config.minverse_cap {
                        return Err(MatrixError::TooLarge {
                            n: rows,
                            cap: self.config.minverse_cap,
                        }
                        .into());
                    }
                }
                let m = self.matrix(&args[0], true)?;
                Ok(Value::Matrix(minverse(&m, self.config.minverse_cap)?))
            }
        }
    }

    /// Range an argument denotes, if it is syntactically a reference.
    fn static_range(&self, e: &Expr) -> Option<CellRange> {
        match e {
            Expr::Ref(a) => Some(CellRange::single(*a)),
            Expr::Range(r) => Some(*r),
            _ => None,
        }
    }

    /// Evaluates an argument that must denote a reference (OFFSET's anchor).
    fn reference(&mut self, e: &Expr) -> Result<CellRange, EvalError> {
        if let Some(r) = self.static_range(e) {
            return Ok(r);
        }
        match self.eval(e)? {
            Value::RangeRef(r) => Ok(r),
            _ => Err(EvalError::TypeMismatch("OFFSET needs a reference anchor".into())),
        }
    }

    /// Evaluates an argument as a matrix. With `strict`, empty cells are an
    /// error instead of zero.
    fn matrix(&mut self, e: &Expr, strict: bool) -> Result<Matrix, EvalError> {
        let range = match e {
            Expr::Ref(a) => CellRange::single(*a),
            _ => match self.eval(e)? {
                Value::Scalar(x) => return Ok(Matrix::scalar(x)),
                Value::Matrix(m) => return Ok(m),
                Value::RangeRef(r) => r,
            },
        };
        let (rows, cols) = (range.rows(), range.cols());
        if u64::from(rows) * u64::from(cols) > MAX_MATERIALIZED {
            return Err(EvalError::RangeTooLarge(range));
        }
        if let Some(m) = self.dense_matrix(range, strict)? {
            return Ok(m);
        }
        let mut data = Vec::with_capacity((rows * cols) as usize);
        for row in range.start.row..=range.end.row {
            for col in range.start.col..=range.end.col {
                let a = CellAddress::new(col, row);
                let v = match self.slots.get(a) {
                    Slot::Empty if strict => return Err(EvalError::NonNumericInMatrix(a)),
                    Slot::Empty => 0.0,
                    Slot::Number(x) => *x,
                    Slot::Text => return Err(EvalError::NonNumericInMatrix(a)),
                    Slot::Formula {
                        state: State::Done(v), ..
                    } => *v,
                    Slot::Formula { .. } => self.cell_value(a)?,
                };
                data.push(v);
            }
        }
        Ok(Matrix::new(rows as usize, cols as usize, data))
    }

    /// Materializes a range lying inside a dense slot grid by walking row
    /// slices: first evaluating any formula not yet done, then copying.
    fn dense_matrix(&mut self, range: CellRange, strict: bool) -> Result<Option<Matrix>, EvalError> {
        let (c0, c1) = (range.start.col, range.end.col);
        let width = (c1 - c0 + 1) as usize;
        for row in range.start.row..=range.end.row {
            let mut from = 0;
            loop {
                let Some(slice) = self.slots.row_slice(row, c0, c1) else {
                    return Ok(None);
                };
                let pending = slice[from..].iter().position(|s| {
                    matches!(
                        s,
                        Slot::Formula {
                            state: State::Pending | State::Active,
                            ..
                        }
                    )
                });
                match pending {
                    Some(i) => {
                        self.cell_value(CellAddress::new(c0 + (from + i) as u32, row))?;
                        from += i + 1;
                    }
                    None => break,
                }
            }
        }
        let mut data = Vec::with_capacity(width * range.rows() as usize);
        for row in range.start.row..=range.end.row {
            let slice = self.slots.row_slice(row, c0, c1).expect("checked above");
            for (i, slot) in slice.iter().enumerate() {
                data.push(match slot {
                    Slot::Number(x) => *x,
                    Slot::Formula {
                        state: State::Done(v), ..
                    } => *v,
                    Slot::Empty if !strict => 0.0,
                    _ => return Err(EvalError::NonNumericInMatrix(CellAddress::new(c0 + i as u32, row))),
                });
            }
        }
        Ok(Some(Matrix::new(range.rows() as usize, width, data)))
    }

    /// Numbers an aggregate argument contributes. Text and empty cells inside
    /// ranges are skipped.
    fn collect_numbers(&mut self, e: &Expr, out: &mut Aggregate) -> Result<(), EvalError> {
        let range = match e {
            Expr::Range(r) => *r,
            Expr::Ref(_) | Expr::Num(_) | Expr::Binary(..) | Expr::Neg(_) => {
                out.push(self.scalar(e)?);
                return Ok(());
            }
            Expr::Func(..) => match self.eval(e)? {
                Value::Scalar(x) => {
                    out.push(x);
                    return Ok(());
                }
                Value::Matrix(m) => {
                    m.as_slice().iter().for_each(|&x| out.push(x));
                    return Ok(());
                }
                Value::RangeRef(r) => r,
            },
        };
        let (rows, cols) = self.slots.extent();
        let last_row = range.end.row.min(rows);
        let last_col = range.end.col.min(cols);
        for row in range.start.row..=last_row {
            for col in range.start.col..=last_col {
                let a = CellAddress::new(col, row);
                match self.slots.get(a) {
                    Slot::Empty | Slot::Text => {}
                    Slot::Number(x) => out.push(*x),
                    Slot::Formula { .. } => out.push(self.cell_value(a)?),
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::Meta;
    use chrono::{TimeZone, Utc};

    fn doc_of(cells: &[(&str, CellContent)]) -> Document {
        let mut sheet = Sheet::new("Sheet1");
        for (a, c) in cells {
            sheet.put(CellAddress::parse(a).unwrap(), c.clone()).unwrap();
        }
        let meta = Meta {
            creator: "t".into(),
            created: Utc.timestamp_opt(0, 0).unwrap(),
        };
        Document::with_sheets(meta, vec![sheet]).unwrap()
    }

    fn f(s: &str) -> CellContent {
        CellContent::formula(s)
    }

    fn n(x: f64) -> CellContent {
        CellContent::Number(x)
    }

    fn at(doc: &Document, a: &str) -> Result<Value, EvalError> {
        evaluate_cell(doc, 0, CellAddress::parse(a).unwrap())
    }

    #[test]
    fn sin_of_zero() {
        let doc = doc_of(&[("A1", f("=SIN(0)"))]);
        assert_eq!(at(&doc, "A1").unwrap(), Value::Scalar(0.0));
    }

    #[test]
    fn trig_chain_matches_scalar_math() {
        let doc = doc_of(&[("A7", n(9.0)), ("E3", n(5.0)), ("E7", f("=EXP(SIN(COS($A7*$E$3)))"))]);
        let expected = (45.0f64).cos().sin().exp();
        assert_eq!(at(&doc, "E7").unwrap(), Value::Scalar(expected));
        assert!((expected - 1.6512).abs() < 1e-3);
    }

    #[test]
    fn smallest_cycle() {
        let doc = doc_of(&[("A1", f("=B1")), ("B1", f("=A1")), ("C1", f("=A1"))]);
        match at(&doc, "C1") {
            Err(EvalError::CycleDetected(path)) => {
                let text: Vec<_> = path.iter().map(ToString::to_string).collect();
                assert_eq!(text, ["A1", "B1", "A1"]);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(at(&doc, "A1"), Err(EvalError::CycleDetected(_))));
    }

    #[test]
    fn self_reference_is_a_cycle() {
        let doc = doc_of(&[("A1", f("=A1+1"))]);
        assert!(matches!(at(&doc, "A1"), Err(EvalError::CycleDetected(_))));
    }

    #[test]
    fn empty_cells_are_zero_as_scalars_but_not_in_minverse() {
        let doc = doc_of(&[
            ("A1", f("=B9+1")),
            ("A2", f("=MINVERSE(B1:C2)")),
            ("B1", n(1.0)),
            ("C1", n(2.0)),
            ("B2", n(3.0)),
        ]);
        assert_eq!(at(&doc, "A1").unwrap(), Value::Scalar(1.0));
        assert_eq!(
            at(&doc, "A2"),
            Err(EvalError::NonNumericInMatrix(CellAddress::parse("C2").unwrap()))
        );
    }

    #[test]
    fn offset_index_minverse_compose() {
        let doc = doc_of(&[
            ("B2", n(4.0)),
            ("C2", n(7.0)),
            ("B3", n(2.0)),
            ("C3", n(6.0)),
            ("A5", f("=INDEX(MINVERSE(OFFSET($A$1;1;1;2;2));1;2)")),
            ("A6", f("=OFFSET(A1,1,1,2,2)")),
        ]);
        let v = at(&doc, "A5").unwrap();
        assert!(matches!(v, Value::Scalar(x) if (x + 0.7).abs() < 1e-12));
        assert_eq!(
            at(&doc, "A6").unwrap(),
            Value::RangeRef(CellRange::parse("B2:C3").unwrap())
        );
    }

    #[test]
    fn offset_leaving_grid() {
        let doc = doc_of(&[("C3", f("=SUM(OFFSET(B2;-2;0;1;1))"))]);
        assert_eq!(at(&doc, "C3"), Err(EvalError::OffsetOutOfGrid));
    }

    #[test]
    fn index_bounds() {
        let doc = doc_of(&[("A1", n(1.0)), ("B1", f("=INDEX(A1:A1;2;1)"))]);
        assert!(matches!(at(&doc, "B1"), Err(EvalError::IndexOutOfBounds { .. })));
    }

    #[test]
    fn arithmetic_errors() {
        let doc = doc_of(&[
            ("A1", f("=1/0")),
            ("A2", f("=EXP(1000)")),
            ("A3", f("=(-8)^0.5")),
            ("A4", f("=B4+1")),
            ("B4", CellContent::text("name")),
        ]);
        assert_eq!(at(&doc, "A1"), Err(EvalError::DivisionByZero));
        assert!(matches!(at(&doc, "A2"), Err(EvalError::DomainError(_))));
        assert!(matches!(at(&doc, "A3"), Err(EvalError::DomainError(_))));
        assert!(matches!(at(&doc, "A4"), Err(EvalError::TextOperand(_))));
    }

    #[test]
    fn aggregates() {
        let doc = doc_of(&[
            ("A1", n(1.0)),
            ("A2", n(5.0)),
            ("A3", CellContent::text("x")),
            ("B1", f("=SUM(A1:A4)")),
            ("B2", f("=MAX(A1:A3;-2)")),
            ("B3", f("=MIN(A1:A3,0.5,B1)")),
            ("B4", f("=SUM(A1:XFD1048576)")),
        ]);
        assert_eq!(at(&doc, "B1").unwrap(), Value::Scalar(6.0));
        assert_eq!(at(&doc, "B2").unwrap(), Value::Scalar(5.0));
        assert_eq!(at(&doc, "B3").unwrap(), Value::Scalar(0.5));
        // The whole-sheet range includes B4 itself.
        assert_eq!(
            at(&doc, "B4"),
            Err(EvalError::CycleDetected(vec![
                CellAddress::parse("B4").unwrap(),
                CellAddress::parse("B4").unwrap()
            ]))
        );
    }

    #[test]
    fn minverse_shape_checks_before_materializing() {
        let doc = doc_of(&[("A1", f("=MINVERSE(B1:C3)")), ("A2", f("=MINVERSE(A3:BZ100)"))]);
        assert!(matches!(
            at(&doc, "A1"),
            Err(EvalError::Matrix(MatrixError::NotSquare { .. }))
        ));
        let doc = doc_of(&[("A1", f("=MINVERSE(B1:BZ77)"))]);
        assert!(matches!(
            at(&doc, "A1"),
            Err(EvalError::Matrix(MatrixError::TooLarge { .. }))
        ));
    }

    #[test]
    fn recalculate_stores_cached_values() {
        let mut doc = doc_of(&[("A1", n(2.0)), ("A2", f("=A1*3")), ("A3", f("=A2+A1"))]);
        let stats = recalculate(&mut doc).unwrap();
        assert_eq!(stats.cells_evaluated, 2);
        assert_eq!(stats.max_dependency_depth, 1);
        let s = doc.sheet(0).unwrap();
        assert_eq!(s.cached_value(CellAddress::parse("A3").unwrap()), Some(8.0));
    }

    #[test]
    fn literal_only_documents_evaluate_nothing() {
        let mut doc = doc_of(&[("A1", n(2.0)), ("B7", n(3.0))]);
        let before = doc.clone();
        let stats = recalculate(&mut doc).unwrap();
        assert_eq!(stats.cells_evaluated, 0);
        assert_eq!(doc, before);
    }

    #[test]
    fn recalc_errors_name_the_cell() {
        let mut doc = doc_of(&[("A1", n(0.0)), ("B2", f("=1/A1"))]);
        let err = recalculate(&mut doc).unwrap_err();
        assert_eq!(err.addr, CellAddress::parse("B2").unwrap());
        assert_eq!(err.source, EvalError::DivisionByZero);
    }

    #[test]
    fn bad_formula_source_is_an_evaluation_error() {
        let doc = doc_of(&[("A1", f("=1+"))]);
        assert!(matches!(at(&doc, "A1"), Err(EvalError::Parse { .. })));
    }

    #[test]
    fn deep_chains_do_not_overflow() {
        let mut sheet = Sheet::new("S");
        sheet.put(CellAddress::new(1, 1), n(1.0)).unwrap();
        for row in 2..=20_000 {
            sheet
                .put(CellAddress::new(1, row), f(&format!("=A{}+1", row - 1)))
                .unwrap();
        }
        let mut ev = Evaluator::new(&sheet, EvalConfig::default());
        assert_eq!(ev.cell_value(CellAddress::new(1, 20_000)).unwrap(), 20_000.0);
        assert_eq!(ev.max_depth(), 19_999);
    }
}
