use crate::container::number;

use super::ast::{BinaryOp, Expr};

/// Argument separator used when printing function calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Separator {
    /// `;`, as OpenOffice-style sheets write it.
    Semicolon,
    #[default]
    Comma,
}

impl Separator {
    pub fn as_char(self) -> char {
        match self {
            Self::Semicolon => ';',
            Self::Comma => ',',
        }
    }
}

// Binding strength; a child printed below its slot's minimum gets parentheses.
fn level(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
        Expr::Binary(BinaryOp::Pow, ..) => 3,
        Expr::Neg(_) => 4,
        Expr::Num(x) if x.is_sign_negative() => 4,
        _ => 5,
    }
}

fn write_min(out: &mut String, e: &Expr, min: u8, sep: Separator) {
    if level(e) < min {
        out.push('(');
        write(out, e, sep);
        out.push(')');
    } else {
        write(out, e, sep);
    }
}

fn write(out: &mut String, e: &Expr, sep: Separator) {
    match e {
        // A negative literal never comes out of the parser; it prints as a
        // negation, which evaluates identically.
        Expr::Num(x) => out.push_str(&number::render(*x)),
        Expr::Ref(a) => out.push_str(&a.to_string()),
        Expr::Range(r) => out.push_str(&r.to_string()),
        Expr::Func(f, args) => {
            out.push_str(f.name());
            out.push('(');
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    out.push(sep.as_char());
                }
                write(out, arg, sep);
            }
            out.push(')');
        }
        Expr::Binary(op, l, r) => {
            let (lmin, rmin) = match op {
                BinaryOp::Add | BinaryOp::Sub => (1, 2),
                BinaryOp::Mul | BinaryOp::Div => (2, 3),
                BinaryOp::Pow => (4, 3),
            };
            write_min(out, l, lmin, sep);
            out.push(op.symbol());
            write_min(out, r, rmin, sep);
        }
        Expr::Neg(inner) => {
            out.push('-');
            write_min(out, inner, 4, sep);
        }
    }
}

/// Prints `expr` as formula source with the fewest parentheses that reparse
/// to the same tree.
pub fn print_formula(expr: &Expr, sep: Separator) -> String {
    let mut out = String::from("=");
    write(&mut out, expr, sep);
    out
}
