//! Arithmetic expressions in `x` and `y` for initial conditions.
//!
//! Grammar: numbers, `x`, `y`, `pi`, binary `+ - * /`, unary minus,
//! parentheses, `sin(e)`, `cos(e)`, `max(a, b)` and `min(a, b)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        let tokens = lex(text)?;
        let mut p = Parser { tokens, pos: 0, len: text.len() };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some((col, tok)) => Err(err(col, format!("unexpected {tok:?}"))),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        use Expr::*;
        match self {
            Num(v) => *v,
            X => x,
            Y => y,
            Neg(a) => -a.eval(x, y),
            Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Sin(a) => a.eval(x, y).sin(),
            Cos(a) => a.eval(x, y).cos(),
            Max(a, b) => a.eval(x, y).max(b.eval(x, y)),
            Min(a, b) => a.eval(x, y).min(b.eval(x, y)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn err(column: usize, message: impl Into<String>) -> Error {
    Error::Expression { column, message: message.into() }
}

/// Tokens with 1-based columns.
fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (at, c) = chars[i];
        let col = at + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            // exponent part
            if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j].1, '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let end = if i < chars.len() { chars[i].0 } else { text.len() };
            let s = &text[chars[start].0..end];
            let v: f64 = s.parse().map_err(|_| err(col, format!("bad number {s:?}")))?;
            out.push((col, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].1.is_ascii_alphanumeric() {
                i += 1;
            }
            let end = if i < chars.len() { chars[i].0 } else { text.len() };
            out.push((col, Tok::Ident(text[chars[start].0..end].to_string())));
        } else if "+-*/(),".contains(c) {
            out.push((col, Tok::Op(c)));
            i += 1;
        } else {
            return Err(err(col, format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<(usize, Tok)> {
        self.tokens.get(self.pos).cloned()
    }

    fn next(&mut self) -> Result<(usize, Tok)> {
        let t = self.peek().ok_or_else(|| err(self.len + 1, "unexpected end of expression"))?;
        self.pos += 1;
        Ok(t)
    }

    fn eat(&mut self, op: char) -> bool {
        if matches!(self.peek(), Some((_, Tok::Op(c))) if c == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        let (col, t) = self.next()?;
        if t == Tok::Op(op) {
            Ok(())
        } else {
            Err(err(col, format!("expected '{op}', found {t:?}")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let (col, t) = self.next()?;
        match t {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::X),
                "y" => Ok(Expr::Y),
                "pi" => Ok(Expr::Num(PI)),
                "sin" | "cos" => {
                    self.expect('(')?;
                    let a = Box::new(self.expr()?);
                    self.expect(')')?;
                    Ok(if name == "sin" { Expr::Sin(a) } else { Expr::Cos(a) })
                }
                "max" | "min" => {
                    self.expect('(')?;
                    let a = Box::new(self.expr()?);
                    self.expect(',')?;
                    let b = Box::new(self.expr()?);
                    self.expect(')')?;
                    Ok(if name == "max" { Expr::Max(a, b) } else { Expr::Min(a, b) })
                }
                other => Err(err(col, format!("unknown identifier {other:?}"))),
            },
            other => Err(err(col, format!("unexpected {other:?}"))),
        }
    }
}
