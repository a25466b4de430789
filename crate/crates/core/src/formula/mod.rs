//! Formula language: parsing, printing and evaluation.

mod ast;
mod eval;
mod matrix;
mod parser;
mod printer;

use thiserror::Error;

pub use ast::{Arity, BinaryOp, Expr, Function};
pub use eval::{evaluate_cell, recalculate, Engine, EvalConfig, EvalError, Evaluator, RecalcError, RecalcStats, Value};
pub use matrix::{minverse, Matrix, MatrixError, SINGULAR_PIVOT_RATIO};
pub use parser::parse_formula;
pub use printer::{print_formula, Separator};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("syntax error at {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
    #[error("unknown function {0}")]
    UnknownFunction(String),
    #[error("{name} takes {want} argument(s), got {got}")]
    Arity { name: String, got: usize, want: String },
}
