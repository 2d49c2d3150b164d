//! Lexer and recursive-descent parser for the formula subset.
//!
//! Precedence from loosest to tightest: comparison (non-associative),
//! `&`, `+ -`, `* /`, `^`, prefix `- +`. Everything but comparison
//! associates left.

use crate::ast::{parse_cell_addr, BinOp, CellAddr, Expr, Formula, Num, UnOp};

/// Maximum parenthesis/call nesting accepted before giving up.
pub const MAX_NESTING: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at byte {position}: expected {expected}")]
pub struct SyntaxError {
    pub position: usize,
    pub expected: String,
}

impl SyntaxError {
    fn new(position: usize, expected: impl Into<String>) -> Self {
        SyntaxError {
            position,
            expected: expected.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Text(String),
    Bool(bool),
    Cell(CellAddr),
    Func(String),
    Op(BinOp),
    Minus,
    Plus,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let simple = match c {
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'{' => Some(Tok::LBrace),
            b'}' => Some(Tok::RBrace),
            b',' => Some(Tok::Comma),
            b':' => Some(Tok::Colon),
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Op(BinOp::Mul)),
            b'/' => Some(Tok::Op(BinOp::Div)),
            b'^' => Some(Tok::Op(BinOp::Pow)),
            b'&' => Some(Tok::Op(BinOp::Concat)),
            b'=' => Some(Tok::Op(BinOp::Eq)),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, pos: start });
            i += 1;
            continue;
        }
        match c {
            b'<' => {
                let (tok, len) = match bytes.get(i + 1) {
                    Some(b'>') => (BinOp::Ne, 2),
                    Some(b'=') => (BinOp::Le, 2),
                    _ => (BinOp::Lt, 1),
                };
                out.push(Token {
                    tok: Tok::Op(tok),
                    pos: start,
                });
                i += len;
            }
            b'>' => {
                let (tok, len) = match bytes.get(i + 1) {
                    Some(b'=') => (BinOp::Ge, 2),
                    _ => (BinOp::Gt, 1),
                };
                out.push(Token {
                    tok: Tok::Op(tok),
                    pos: start,
                });
                i += len;
            }
            b'"' => {
                let mut text = String::new();
                i += 1;
                loop {
                    match src[i..].find('"') {
                        None => return Err(SyntaxError::new(start, "closing quote")),
                        Some(off) => {
                            text.push_str(&src[i..i + off]);
                            i += off + 1;
                            if bytes.get(i) == Some(&b'"') {
                                text.push('"');
                                i += 1;
                            } else {
                                break;
                            }
                        }
                    }
                }
                out.push(Token {
                    tok: Tok::Text(text),
                    pos: start,
                });
            }
            b'0'..=b'9' | b'.' => {
                let (value, len) = lex_number(&src[i..]).ok_or_else(|| SyntaxError::new(start, "number"))?;
                out.push(Token {
                    tok: Tok::Number(value),
                    pos: start,
                });
                i += len;
            }
            b'$' | b'A'..=b'Z' | b'a'..=b'z' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || matches!(bytes[i], b'$' | b'_' | b'.')) {
                    i += 1;
                }
                let word = &src[start..i];
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                    j += 1;
                }
                let tok = if bytes.get(j) == Some(&b'(') && !word.contains('$') {
                    Tok::Func(word.to_ascii_uppercase())
                } else if let Some(addr) = parse_cell_addr(word) {
                    Tok::Cell(addr)
                } else if word.eq_ignore_ascii_case("TRUE") {
                    Tok::Bool(true)
                } else if word.eq_ignore_ascii_case("FALSE") {
                    Tok::Bool(false)
                } else {
                    return Err(SyntaxError::new(start, "cell reference, TRUE/FALSE or function call"));
                };
                out.push(Token { tok, pos: start });
            }
            _ => return Err(SyntaxError::new(start, "token")),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: src.len(),
    });
    Ok(out)
}

/// Lexes `digits [. digits] [e [+-] digits]`; returns value and byte length.
fn lex_number(s: &str) -> Option<(f64, usize)> {
    let b = s.as_bytes();
    let mut i = 0;
    let digits = |i: &mut usize| {
        let st = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        *i - st
    };
    let int_digits = digits(&mut i);
    let mut frac_digits = 0;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        frac_digits = digits(&mut i);
    }
    if int_digits + frac_digits == 0 {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let mut k = j;
        if digits(&mut k) == 0 {
            return None;
        }
        i = k;
    }
    if i < b.len() && (b[i].is_ascii_alphabetic() || b[i] == b'.' || b[i] == b'$') {
        return None;
    }
    let v: f64 = s[..i].parse().ok()?;
    v.is_finite().then_some((v, i))
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> usize {
        self.toks[self.pos].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), SyntaxError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(SyntaxError::new(self.here(), what))
        }
    }

    fn enter(&mut self) -> Result<(), SyntaxError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(SyntaxError::new(self.here(), "shallower nesting"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.enter()?;
        let lhs = self.concat()?;
        let out = match *self.peek() {
            Tok::Op(op) if op.is_comparison() => {
                self.bump();
                let rhs = self.concat()?;
                Expr::binary(op, lhs, rhs)
            }
            _ => lhs,
        };
        self.depth -= 1;
        Ok(out)
    }

    fn concat(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.additive()?;
        while *self.peek() == Tok::Op(BinOp::Concat) {
            self.bump();
            let rhs = self.additive()?;
            lhs = Expr::binary(BinOp::Concat, lhs, rhs);
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.power()?;
        while let Tok::Op(op @ (BinOp::Mul | BinOp::Div)) = *self.peek() {
            self.bump();
            let rhs = self.power()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Op(BinOp::Pow) {
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(BinOp::Pow, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        let op = match self.peek() {
            Tok::Minus => UnOp::Neg,
            Tok::Plus => UnOp::Plus,
            _ => return self.atom(),
        };
        self.bump();
        self.enter()?;
        let operand = self.unary()?;
        self.depth -= 1;
        Ok(Expr::unary(op, operand))
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let pos = self.here();
        match self.bump() {
            Tok::Number(v) => Ok(Expr::Number(Num(v))),
            Tok::Text(s) => Ok(Expr::Text(s)),
            Tok::Bool(b) => Ok(Expr::Bool(b)),
            Tok::Cell(a) => {
                if *self.peek() == Tok::Colon {
                    self.bump();
                    match self.bump() {
                        Tok::Cell(b) => Ok(Expr::Range(a, b)),
                        _ => Err(SyntaxError::new(
                            self.toks[self.pos - 1].pos,
                            "cell reference after `:`",
                        )),
                    }
                } else {
                    Ok(Expr::Cell(a))
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::LBrace => self.array(),
            Tok::Func(name) => self.call(name, pos),
            Tok::Eof => Err(SyntaxError::new(pos, "expression")),
            _ => Err(SyntaxError::new(pos, "expression")),
        }
    }

    fn array(&mut self) -> Result<Expr, SyntaxError> {
        let mut items = Vec::new();
        loop {
            let pos = self.here();
            let item = match self.bump() {
                Tok::Number(v) => Expr::Number(Num(v)),
                Tok::Text(s) => Expr::Text(s),
                Tok::Bool(b) => Expr::Bool(b),
                sign @ (Tok::Minus | Tok::Plus) => match self.bump() {
                    Tok::Number(v) => {
                        let op = if sign == Tok::Minus { UnOp::Neg } else { UnOp::Plus };
                        Expr::unary(op, Expr::Number(Num(v)))
                    }
                    _ => return Err(SyntaxError::new(pos, "number after sign in array")),
                },
                _ => return Err(SyntaxError::new(pos, "array constant")),
            };
            items.push(item);
            match self.bump() {
                Tok::Comma => continue,
                Tok::RBrace => break,
                _ => return Err(SyntaxError::new(self.toks[self.pos - 1].pos, "`,` or `}`")),
            }
        }
        Ok(Expr::Array(items))
    }

    fn call(&mut self, name: String, pos: usize) -> Result<Expr, SyntaxError> {
        self.expect(Tok::LParen, "`(`")?;
        self.enter()?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`,` or `)`")?;
        self.depth -= 1;
        match name.as_str() {
            "IF" if !(2..=3).contains(&args.len()) => Err(SyntaxError::new(pos, "IF with 2 or 3 arguments")),
            "IFS" if args.is_empty() || args.len() % 2 != 0 => {
                Err(SyntaxError::new(pos, "IFS with an even number of arguments"))
            }
            _ => Ok(Expr::Call { name, args }),
        }
    }
}

/// Parses formula text (leading `=` optional).
pub fn parse(source: &str) -> Result<Expr, SyntaxError> {
    let trimmed = source.trim();
    let offset = source.len() - source.trim_start().len();
    let body = trimmed.strip_prefix('=').unwrap_or(trimmed);
    let body_offset = offset + (trimmed.len() - body.len());
    if body.trim().is_empty() {
        return Err(SyntaxError::new(body_offset, "formula"));
    }
    let toks = lex(body).map_err(|e| SyntaxError::new(e.position + body_offset, e.expected))?;
    let mut p = Parser { toks, pos: 0, depth: 0 };
    let e = p
        .expr()
        .map_err(|e| SyntaxError::new(e.position + body_offset, e.expected))?;
    if *p.peek() != Tok::Eof {
        return Err(SyntaxError::new(p.here() + body_offset, "end of formula"));
    }
    Ok(e)
}

pub fn parse_formula(f: &Formula) -> Result<Expr, SyntaxError> {
    parse(&f.source)
}

/// Canonical text of a tree (no leading `=`).
pub fn print(e: &Expr) -> String {
    e.to_string()
}
