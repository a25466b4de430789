use std::fmt;

use crate::container::{CellAddress, CellRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            Self::Add => '+',
            Self::Sub => '-',
            Self::Mul => '*',
            Self::Div => '/',
            Self::Pow => '^',
        }
    }
}

/// Supported spreadsheet functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Function {
    Sin,
    Cos,
    Exp,
    Max,
    Min,
    Index,
    Offset,
    Minverse,
    Sum,
}

/// Allowed argument counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Exactly(usize),
    AtLeast(usize),
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exactly(n) => write!(f, "{n}"),
            Self::AtLeast(n) => write!(f, "at least {n}"),
        }
    }
}

impl Function {
    pub const ALL: [Function; 9] = [
        Self::Sin,
        Self::Cos,
        Self::Exp,
        Self::Max,
        Self::Min,
        Self::Index,
        Self::Offset,
        Self::Minverse,
        Self::Sum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sin => "SIN",
            Self::Cos => "COS",
            Self::Exp => "EXP",
            Self::Max => "MAX",
            Self::Min => "MIN",
            Self::Index => "INDEX",
            Self::Offset => "OFFSET",
            Self::Minverse => "MINVERSE",
            Self::Sum => "SUM",
        }
    }

    /// Case-insensitive lookup.
    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(name))
    }

    pub fn arity(self) -> Arity {
        match self {
            Self::Sin | Self::Cos | Self::Exp | Self::Minverse => Arity::Exactly(1),
            Self::Index => Arity::Exactly(3),
            Self::Offset => Arity::Exactly(5),
            Self::Max | Self::Min | Self::Sum => Arity::AtLeast(1),
        }
    }

    pub fn accepts(self, n: usize) -> bool {
        match self.arity() {
            Arity::Exactly(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

/// Parsed formula tree. Numeric literals are never negative: a leading minus
/// parses as [`Expr::Neg`].
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Ref(CellAddress),
    Range(CellRange),
    Func(Function, Vec<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Self {
        Self::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn neg(inner: Expr) -> Self {
        Self::Neg(Box::new(inner))
    }

    pub fn func(f: Function, args: Vec<Expr>) -> Self {
        Self::Func(f, args)
    }
}
