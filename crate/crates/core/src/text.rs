//! Infix rendering and parsing of expressions.
//!
//! The grammar is the one the CLI echoes: `+ - * /` and `^` infix operators,
//! `sqrt(..)` and `cbrt(..)` in function syntax, numeric literals, and
//! variables by column name. `e*e` is written `e^2`, and parsing `e^2` gives
//! back the product, so `render(parse(render(t))) == render(t)` for every tree.

use thiserror::Error;

use crate::expr::{Expr, OpKind};

/// Significant digits used when printing constants.
pub const CONSTANT_DIGITS: usize = 6;

const MAX_NESTING: usize = 64;

/// Renders `expr` with the given variable names. Variables without a name
/// are printed as `x1`, `x2`, ...
pub fn render(expr: &Expr, names: &[String]) -> String {
    build(expr, names).0
}

/// Formats a constant the way [`render`] does: 6 significant digits, fixed
/// notation for exponents in `[-4, 6)`, scientific otherwise.
pub fn format_constant(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", CONSTANT_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("scientific exponent");
    if !(-4..CONSTANT_DIGITS as i32).contains(&exp) {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (CONSTANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn var_name(d: usize, names: &[String]) -> String {
    names.get(d).cloned().unwrap_or_else(|| format!("x{}", d + 1))
}

fn op_precedence(op: OpKind) -> u8 {
    match op {
        OpKind::Add | OpKind::Sub => 1,
        OpKind::Mul | OpKind::Div => 2,
        _ => 3,
    }
}

fn wrap(s: String, parens: bool) -> String {
    if parens {
        format!("({s})")
    } else {
        s
    }
}

/// Returns the rendered text and its binding strength: 0 for a negative
/// literal, 1 for `+ -`, 2 for `* /`, 3 for `^`, 4 for atoms and calls.
fn build(e: &Expr, names: &[String]) -> (String, u8) {
    match e {
        Expr::Const(v) => (format_constant(*v), if *v < 0.0 { 0 } else { 4 }),
        Expr::Var(d) => (var_name(*d, names), 4),
        Expr::Unary(op, c) => (format!("{}({})", op.symbol(), build(c, names).0), 4),
        Expr::Binary(op, l, r) => {
            let (ls, lp) = build(l, names);
            let (rs, rp) = build(r, names);
            if *op == OpKind::Mul && ls == rs {
                return (format!("{}^2", wrap(ls, lp <= 3)), 3);
            }
            let p = op_precedence(*op);
            let left_parens = if *op == OpKind::Pow { lp <= p } else { lp < p };
            let right_parens = match op {
                OpKind::Add => rp == 0 || rp < p,
                // `a*(a*b)` keeps its parentheses: `a*a*b` would read back as `a^2*b`
                OpKind::Mul => rp == 0 || rp < p || (rp == p && first_factor(&rs) == ls),
                OpKind::Pow => rp < p,
                _ => rp <= p,
            };
            let sep = match op {
                OpKind::Add => " + ",
                OpKind::Sub => " - ",
                OpKind::Pow => "^",
                _ => op.symbol(),
            };
            let text = format!("{}{}{}", wrap(ls, left_parens), sep, wrap(rs, right_parens));
            (text, p)
        }
    }
}

/// Text of the leading factor of a rendered product or quotient.
fn first_factor(s: &str) -> &str {
    let mut depth = 0i32;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            '*' | '/' if depth == 0 => return &s[..i],
            _ => {}
        }
    }
    s
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parse error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| ParseError {
                position: start,
                message: format!("bad number `{lit}`"),
            })?;
            if !v.is_finite() {
                return Err(ParseError {
                    position: start,
                    message: format!("number `{lit}` is not finite"),
                });
            }
            out.push((start, Token::Num(v)));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(text[start..i].to_string())));
        } else if b"+-*/^(),".contains(&c) {
            out.push((i, Token::Sym(c as char)));
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            return Err(ParseError {
                position: i,
                message: format!("unexpected character `{ch}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    names: &'a [String],
    nesting: usize,
}

/// Parses infix text. With an empty `names`, variables are `x1`, `x2`, ...
pub fn parse(text: &str, names: &[String]) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        names,
        nesting: 0,
    };
    let e = p.expr()?;
    if let Some((at, tok)) = p.tokens.get(p.pos) {
        return Err(ParseError {
            position: *at,
            message: format!("unexpected trailing token {tok:?}"),
        });
    }
    Ok(e)
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(at, _)| *at)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            position: self.here(),
            message: message.into(),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Token::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.nesting += 1;
        if self.nesting > MAX_NESTING {
            return Err(self.error("expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                OpKind::Add
            } else if self.eat('-') {
                OpKind::Sub
            } else {
                break;
            };
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        self.nesting -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.power()?;
        loop {
            let op = if self.eat('*') {
                OpKind::Mul
            } else if self.eat('/') {
                OpKind::Div
            } else {
                break;
            };
            let rhs = self.power()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.eat('^') {
            return Ok(base);
        }
        self.enter()?;
        let exponent = self.power()?;
        self.nesting -= 1;
        if exponent == Expr::Const(2.0) {
            Ok(Expr::binary(OpKind::Mul, base.clone(), base))
        } else {
            Ok(Expr::binary(OpKind::Pow, base, exponent))
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("unexpected end of input"));
        };
        match tok {
            Token::Num(v) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Token::Sym('-') => {
                self.pos += 1;
                match self.peek() {
                    Some(Token::Num(v)) => {
                        let v = -*v;
                        self.pos += 1;
                        Ok(Expr::Const(v))
                    }
                    _ => Err(self.error("unary minus is only allowed before a number")),
                }
            }
            Token::Sym('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Token::Ident(name) => {
                self.pos += 1;
                if self.peek() == Some(&Token::Sym('(')) {
                    self.call(&name)
                } else {
                    self.variable(&name)
                }
            }
            Token::Sym(c) => Err(self.error(format!("unexpected `{c}`"))),
        }
    }

    fn call(&mut self, name: &str) -> Result<Expr, ParseError> {
        let at = self.here();
        self.expect('(')?;
        let first = self.expr()?;
        let e = match name {
            "sqrt" => Expr::unary(OpKind::Sqrt, first),
            "cbrt" => Expr::unary(OpKind::Cbrt, first),
            "pow" => {
                self.expect(',')?;
                let second = self.expr()?;
                Expr::binary(OpKind::Pow, first, second)
            }
            _ => {
                return Err(ParseError {
                    position: at,
                    message: format!("unknown function `{name}`"),
                })
            }
        };
        self.expect(')')?;
        Ok(e)
    }

    fn variable(&self, name: &str) -> Result<Expr, ParseError> {
        if let Some(d) = self.names.iter().position(|n| n == name) {
            return Ok(Expr::Var(d));
        }
        if self.names.is_empty() {
            if let Some(k) = name.strip_prefix('x').and_then(|k| k.parse::<usize>().ok()) {
                if k >= 1 {
                    return Ok(Expr::Var(k - 1));
                }
            }
        }
        Err(ParseError {
            position: self.here().saturating_sub(name.len()),
            message: format!("unknown variable `{name}`"),
        })
    }
}
