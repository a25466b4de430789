//! Recursive-descent parser.
//!
//! ```text
//! formula := "=" expr
//! expr    := term (("+" | "-") term)*
//! term    := pow (("*" | "/") pow)*
//! pow     := unary ("^" pow)?
//! unary   := "-" unary | primary
//! primary := NUMBER | ref | ref ":" ref | NAME "(" [expr (sep expr)*] ")" | "(" expr ")"
//! sep     := ";" | ","
//! ```

use crate::container::{CellAddress, CellRange};

use super::ast::{BinaryOp, Expr, Function};
use super::FormulaError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Word(String),
    LParen,
    RParen,
    Sep,
    Colon,
    Op(BinaryOp),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    /// Returns the token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize), FormulaError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::End, start));
        };
        let single = |t| Ok((t, start));
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ';' | ',' => Tok::Sep,
            ':' => Tok::Colon,
            '+' => Tok::Op(BinaryOp::Add),
            '-' => Tok::Op(BinaryOp::Sub),
            '*' => Tok::Op(BinaryOp::Mul),
            '/' => Tok::Op(BinaryOp::Div),
            '^' => Tok::Op(BinaryOp::Pow),
            c if c.is_ascii_digit() || c == '.' => return self.number(start),
            c if c.is_ascii_alphabetic() || c == '$' || c == '_' => {
                let len = rest
                    .find(|c: char| !(c.is_ascii_alphanumeric() || c == '$' || c == '_'))
                    .unwrap_or(rest.len());
                self.pos += len;
                return single(Tok::Word(rest[..len].to_string()));
            }
            _ => {
                return Err(FormulaError::Syntax {
                    position: start,
                    expected: format!("a token, found `{c}`"),
                })
            }
        };
        self.pos += 1;
        single(tok)
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), FormulaError> {
        let bytes = self.src.as_bytes();
        let mut i = start;
        let digits = |i: &mut usize| {
            let s = *i;
            while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                *i += 1;
            }
            *i - s
        };
        let mut n = digits(&mut i);
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            n += digits(&mut i);
        }
        if n == 0 {
            return Err(FormulaError::Syntax {
                position: start,
                expected: "digits".into(),
            });
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if digits(&mut j) > 0 {
                i = j;
            }
        }
        let text = &self.src[start..i];
        let value: f64 = text.parse().map_err(|_| FormulaError::Syntax {
            position: start,
            expected: "a number".into(),
        })?;
        if !value.is_finite() {
            return Err(FormulaError::Syntax {
                position: start,
                expected: "a finite number".into(),
            });
        }
        self.pos = i;
        Ok((Tok::Num(value), start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), FormulaError> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn fail<T>(&self, expected: &str) -> Result<T, FormulaError> {
        Err(FormulaError::Syntax {
            position: self.at,
            expected: expected.to_string(),
        })
    }

    fn expr(&mut self) -> Result<Expr, FormulaError> {
        let mut left = self.term()?;
        while let Tok::Op(op @ (BinaryOp::Add | BinaryOp::Sub)) = self.tok {
            self.bump()?;
            left = Expr::binary(op, left, self.term()?);
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<Expr, FormulaError> {
        let mut left = self.pow()?;
        while let Tok::Op(op @ (BinaryOp::Mul | BinaryOp::Div)) = self.tok {
            self.bump()?;
            left = Expr::binary(op, left, self.pow()?);
        }
        Ok(left)
    }

    fn pow(&mut self) -> Result<Expr, FormulaError> {
        let base = self.unary()?;
        if self.tok == Tok::Op(BinaryOp::Pow) {
            self.bump()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, self.pow()?));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, FormulaError> {
        if self.tok == Tok::Op(BinaryOp::Sub) {
            self.bump()?;
            return Ok(Expr::neg(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, FormulaError> {
        match std::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(x) => {
                self.bump()?;
                Ok(Expr::Num(x))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                if self.tok != Tok::RParen {
                    return self.fail("`)`");
                }
                self.bump()?;
                Ok(inner)
            }
            Tok::Word(word) => {
                let word_at = self.at;
                self.bump()?;
                if self.tok == Tok::LParen {
                    return self.call(&word, word_at);
                }
                let start = self.reference(&word, word_at)?;
                if self.tok != Tok::Colon {
                    return Ok(Expr::Ref(start));
                }
                self.bump()?;
                let end = match std::mem::replace(&mut self.tok, Tok::End) {
                    Tok::Word(w) => {
                        let at = self.at;
                        self.bump()?;
                        self.reference(&w, at)?
                    }
                    other => {
                        self.tok = other;
                        return self.fail("a cell reference after `:`");
                    }
                };
                Ok(Expr::Range(CellRange::new(start, end)))
            }
            other => {
                self.tok = other;
                self.fail("a number, reference, function call or `(`")
            }
        }
    }

    fn reference(&self, word: &str, at: usize) -> Result<CellAddress, FormulaError> {
        CellAddress::parse(word).map_err(|_| FormulaError::Syntax {
            position: at,
            expected: format!("a cell reference, found `{word}`"),
        })
    }

    fn call(&mut self, name: &str, at: usize) -> Result<Expr, FormulaError> {
        if !name.bytes().all(|b| b.is_ascii_alphanumeric()) {
            return Err(FormulaError::Syntax {
                position: at,
                expected: format!("a function name, found `{name}`"),
            });
        }
        let func = Function::from_name(name).ok_or_else(|| FormulaError::UnknownFunction(name.to_ascii_uppercase()))?;
        self.bump()?; // (
        let mut args = Vec::new();
        if self.tok != Tok::RParen {
            loop {
                args.push(self.expr()?);
                match self.tok {
                    Tok::Sep => self.bump()?,
                    Tok::RParen => break,
                    _ => return self.fail("`;`, `,` or `)`"),
                }
            }
        }
        self.bump()?; // )
        if !func.accepts(args.len()) {
            return Err(FormulaError::Arity {
                name: func.name().to_string(),
                got: args.len(),
                want: func.arity().to_string(),
            });
        }
        Ok(Expr::Func(func, args))
    }
}

/// Parses formula source text, which must start with `=`.
pub fn parse_formula(text: &str) -> Result<Expr, FormulaError> {
    let Some(body) = text.strip_prefix('=') else {
        return Err(FormulaError::Syntax {
            position: 0,
            expected: "`=`".into(),
        });
    };
    let mut parser = Parser {
        lexer: Lexer {
            src: text,
            pos: text.len() - body.len(),
        },
        tok: Tok::End,
        at: 1,
    };
    parser.bump()?;
    let expr = parser.expr()?;
    if parser.tok != Tok::End {
        return parser.fail("end of formula");
    }
    Ok(expr)
}
