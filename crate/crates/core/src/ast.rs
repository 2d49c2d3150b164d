//! Formula syntax tree, cell addresses and the canonical printer.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest column index accepted (XFD).
pub const MAX_COLUMN: u32 = 16_384;
/// Largest row index accepted.
pub const MAX_ROW: u32 = 1_048_576;

/// An A1-style cell address. Column and row are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellAddr {
    pub column: u32,
    pub row: u32,
    pub col_absolute: bool,
    pub row_absolute: bool,
}

impl CellAddr {
    /// Relative address; panics on a zero coordinate.
    pub fn new(column: u32, row: u32) -> Self {
        assert!(column >= 1 && row >= 1, "cell coordinates are 1-based");
        CellAddr {
            column,
            row,
            col_absolute: false,
            row_absolute: false,
        }
    }

    /// Same position with both absolute markers cleared.
    pub fn relative(self) -> Self {
        CellAddr {
            col_absolute: false,
            row_absolute: false,
            ..self
        }
    }

    /// Same position regardless of `$` markers.
    pub fn same_position(&self, other: &CellAddr) -> bool {
        self.column == other.column && self.row == other.row
    }
}

/// Converts a 1-based column index to its letter form (1 -> A, 27 -> AA).
pub fn column_name(mut column: u32) -> String {
    let mut out = Vec::new();
    while column > 0 {
        let rem = (column - 1) % 26;
        out.push(b'A' + rem as u8);
        column = (column - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Parses column letters (case-insensitive) into a 1-based index.
pub fn column_index(letters: &str) -> Option<u32> {
    if letters.is_empty() || letters.len() > 3 {
        return None;
    }
    let mut value: u32 = 0;
    for c in letters.chars() {
        if !c.is_ascii_alphabetic() {
            return None;
        }
        value = value * 26 + (c.to_ascii_uppercase() as u32 - 'A' as u32 + 1);
    }
    (value <= MAX_COLUMN).then_some(value)
}

impl fmt::Display for CellAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.col_absolute {
            f.write_str("$")?;
        }
        f.write_str(&column_name(self.column))?;
        if self.row_absolute {
            f.write_str("$")?;
        }
        write!(f, "{}", self.row)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid cell address `{0}`")]
pub struct InvalidCellAddr(pub String);

impl FromStr for CellAddr {
    type Err = InvalidCellAddr;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_cell_addr(s.trim()).ok_or_else(|| InvalidCellAddr(s.to_string()))
    }
}

/// Parses `[$]letters[$]digits`. Returns `None` unless the whole string matches.
pub(crate) fn parse_cell_addr(s: &str) -> Option<CellAddr> {
    let bytes = s.as_bytes();
    let mut i = 0;
    let col_absolute = bytes.first() == Some(&b'$');
    if col_absolute {
        i += 1;
    }
    let letters_start = i;
    while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
        i += 1;
    }
    let column = column_index(&s[letters_start..i])?;
    let row_absolute = bytes.get(i) == Some(&b'$');
    if row_absolute {
        i += 1;
    }
    let digits = &s[i..];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    if digits.len() > 7 {
        return None;
    }
    let row: u32 = digits.parse().ok()?;
    if row == 0 || row > MAX_ROW {
        return None;
    }
    Some(CellAddr {
        column,
        row,
        col_absolute,
        row_absolute,
    })
}

impl Serialize for CellAddr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellAddr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A finite, non-negative numeric literal.
///
/// Equality and ordering are bitwise-total so the tree can be `Eq`/`Ord`.
#[derive(Debug, Clone, Copy)]
pub struct Num(pub f64);

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}
impl Eq for Num {}
impl PartialOrd for Num {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Num {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}
impl Hash for Num {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Concat,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
            BinOp::Concat => "&",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Pow)
    }

    /// Logical complement of a comparison (`=` <-> `<>`, `<` <-> `>=`, `>` <-> `<=`).
    pub fn complement(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Eq => BinOp::Ne,
            BinOp::Ne => BinOp::Eq,
            BinOp::Lt => BinOp::Ge,
            BinOp::Ge => BinOp::Lt,
            BinOp::Gt => BinOp::Le,
            BinOp::Le => BinOp::Gt,
            _ => return None,
        })
    }

    /// The operator obtained by swapping operands (`a < b` == `b > a`).
    pub fn flipped(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Eq => BinOp::Eq,
            BinOp::Ne => BinOp::Ne,
            BinOp::Lt => BinOp::Gt,
            BinOp::Gt => BinOp::Lt,
            BinOp::Le => BinOp::Ge,
            BinOp::Ge => BinOp::Le,
            _ => return None,
        })
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => PREC_CMP,
            BinOp::Concat => PREC_CONCAT,
            BinOp::Add | BinOp::Sub => PREC_ADD,
            BinOp::Mul | BinOp::Div => PREC_MUL,
            BinOp::Pow => PREC_POW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnOp {
    Neg,
    Plus,
}

const PREC_CMP: u8 = 1;
const PREC_CONCAT: u8 = 2;
const PREC_ADD: u8 = 3;
const PREC_MUL: u8 = 4;
const PREC_POW: u8 = 5;
const PREC_UNARY: u8 = 6;
const PREC_ATOM: u8 = 7;

/// A parsed formula expression.
///
/// Function names are stored uppercase. `IF` has 2 or 3 arguments and `IFS`
/// an even, non-zero number of arguments whenever the tree comes from the
/// parser or the rewriter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Number(Num),
    Text(String),
    Bool(bool),
    Cell(CellAddr),
    Range(CellAddr, CellAddr),
    Array(Vec<Expr>),
    Call { name: String, args: Vec<Expr> },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Unary { op: UnOp, operand: Box<Expr> },
}

/// Child-index path from the root of a tree to one of its nodes.
pub type Path = Vec<usize>;

impl Expr {
    /// Numeric literal; negative values become a unary minus over the magnitude.
    pub fn number(value: f64) -> Expr {
        if value < 0.0 {
            Expr::unary(UnOp::Neg, Expr::Number(Num(-value)))
        } else {
            Expr::Number(Num(value))
        }
    }

    pub fn text(s: impl Into<String>) -> Expr {
        Expr::Text(s.into())
    }

    pub fn cell(column: u32, row: u32) -> Expr {
        Expr::Cell(CellAddr::new(column, row))
    }

    pub fn call(name: impl Into<String>, args: Vec<Expr>) -> Expr {
        Expr::Call {
            name: name.into().to_ascii_uppercase(),
            args,
        }
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn unary(op: UnOp, operand: Expr) -> Expr {
        Expr::Unary {
            op,
            operand: Box::new(operand),
        }
    }

    /// `IF(cond, then)` or `IF(cond, then, else)`.
    pub fn if_(cond: Expr, then: Expr, otherwise: Option<Expr>) -> Expr {
        let mut args = vec![cond, then];
        args.extend(otherwise);
        Expr::call("IF", args)
    }

    /// Returns the arguments when this node is a call to `name`.
    pub fn as_call(&self, name: &str) -> Option<&[Expr]> {
        match self {
            Expr::Call { name: n, args } if n == name => Some(args),
            _ => None,
        }
    }

    /// True for well-formed IF calls (two or three arguments).
    pub fn is_if(&self) -> bool {
        self.as_if().is_some()
    }

    /// Views an `IF` node as `(condition, true branch, optional false branch)`.
    pub fn as_if(&self) -> Option<IfParts<'_>> {
        match self.as_call("IF")? {
            [c, t] => Some(IfParts {
                cond: c,
                then: t,
                otherwise: None,
            }),
            [c, t, e] => Some(IfParts {
                cond: c,
                then: t,
                otherwise: Some(e),
            }),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::Number(_) | Expr::Text(_) | Expr::Bool(_)) || self.as_number().is_some()
    }

    /// Numeric value of a literal, accepting a leading unary minus.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Expr::Number(n) => Some(n.0),
            Expr::Unary { op: UnOp::Neg, operand } => match operand.as_ref() {
                Expr::Number(n) => Some(-n.0),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Number(_) | Expr::Text(_) | Expr::Bool(_) | Expr::Cell(_) | Expr::Range(..) => Vec::new(),
            Expr::Array(items) => items.iter().collect(),
            Expr::Call { args, .. } => args.iter().collect(),
            Expr::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            Expr::Unary { operand, .. } => vec![operand],
        }
    }

    fn child_mut(&mut self, index: usize) -> Option<&mut Expr> {
        match self {
            Expr::Array(items) => items.get_mut(index),
            Expr::Call { args, .. } => args.get_mut(index),
            Expr::Binary { lhs, rhs, .. } => match index {
                0 => Some(lhs),
                1 => Some(rhs),
                _ => None,
            },
            Expr::Unary { operand, .. } => (index == 0).then_some(operand.as_mut()),
            _ => None,
        }
    }

    pub fn get(&self, path: &[usize]) -> Option<&Expr> {
        let mut node = self;
        for &i in path {
            node = *node.children().get(i)?;
        }
        Some(node)
    }

    pub fn get_mut(&mut self, path: &[usize]) -> Option<&mut Expr> {
        let mut node = self;
        for &i in path {
            node = node.child_mut(i)?;
        }
        Some(node)
    }

    /// Replaces the node at `path`. Returns false when the path is invalid.
    pub fn replace_at(&mut self, path: &[usize], replacement: Expr) -> bool {
        match self.get_mut(path) {
            Some(slot) => {
                *slot = replacement;
                true
            }
            None => false,
        }
    }

    /// Pre-order traversal with paths.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr, &[usize])) {
        fn go<'a>(e: &'a Expr, path: &mut Path, f: &mut impl FnMut(&'a Expr, &[usize])) {
            f(e, path);
            for (i, c) in e.children().into_iter().enumerate() {
                path.push(i);
                go(c, path, f);
                path.pop();
            }
        }
        go(self, &mut Vec::new(), f)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    pub fn if_count(&self) -> usize {
        let own = usize::from(self.is_if());
        own + self.children().iter().map(|c| c.if_count()).sum::<usize>()
    }

    /// Every cell address mentioned directly (ranges contribute their corners).
    pub fn referenced_cells(&self) -> Vec<CellAddr> {
        let mut out = Vec::new();
        self.walk(&mut |e, _| match e {
            Expr::Cell(a) => out.push(*a),
            Expr::Range(a, b) => {
                out.push(*a);
                out.push(*b);
            }
            _ => {}
        });
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Unary { .. } => PREC_UNARY,
            _ => PREC_ATOM,
        }
    }

    /// Renders the formula with a custom cell-reference writer.
    pub fn render_with(&self, out: &mut String, cell: &dyn Fn(&CellAddr) -> String) {
        match self {
            Expr::Number(n) => out.push_str(&format_number(n.0)),
            Expr::Text(s) => {
                out.push('"');
                out.push_str(&s.replace('"', "\"\""));
                out.push('"');
            }
            Expr::Bool(true) => out.push_str("TRUE"),
            Expr::Bool(false) => out.push_str("FALSE"),
            Expr::Cell(a) => out.push_str(&cell(a)),
            Expr::Range(a, b) => {
                out.push_str(&cell(a));
                out.push(':');
                out.push_str(&cell(b));
            }
            Expr::Array(items) => {
                out.push('{');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.render_with(out, cell);
                }
                out.push('}');
            }
            Expr::Call { name, args } => {
                out.push_str(name);
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    a.render_with(out, cell);
                }
                out.push(')');
            }
            Expr::Binary { op, lhs, rhs } => {
                let prec = op.precedence();
                // comparisons are non-associative, the rest associate left
                let lhs_parens = if prec == PREC_CMP {
                    lhs.precedence() <= prec
                } else {
                    lhs.precedence() < prec
                };
                render_child(lhs, lhs_parens, out, cell);
                out.push_str(op.symbol());
                render_child(rhs, rhs.precedence() <= prec, out, cell);
            }
            Expr::Unary { op, operand } => {
                out.push_str(match op {
                    UnOp::Neg => "-",
                    UnOp::Plus => "+",
                });
                render_child(operand, operand.precedence() < PREC_UNARY, out, cell);
            }
        }
    }
}

fn render_child(e: &Expr, parens: bool, out: &mut String, cell: &dyn Fn(&CellAddr) -> String) {
    if parens {
        out.push('(');
        e.render_with(out, cell);
        out.push(')');
    } else {
        e.render_with(out, cell);
    }
}

/// Shortest decimal text that reads back to the same double.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.render_with(&mut s, &|a| a.to_string());
        f.write_str(&s)
    }
}

/// Borrowed view of an `IF` call.
#[derive(Debug, Clone, Copy)]
pub struct IfParts<'a> {
    pub cond: &'a Expr,
    pub then: &'a Expr,
    pub otherwise: Option<&'a Expr>,
}

impl IfParts<'_> {
    /// The false branch, with an omitted one materialized as `FALSE`.
    pub fn otherwise_or_false(&self) -> Expr {
        self.otherwise.cloned().unwrap_or(Expr::Bool(false))
    }
}

/// Formula source text plus the cell it lives in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub source: String,
    pub anchor: Option<CellAddr>,
}

impl Formula {
    pub fn new(source: impl Into<String>) -> Self {
        Formula {
            source: source.into(),
            anchor: None,
        }
    }

    pub fn anchored(source: impl Into<String>, anchor: CellAddr) -> Self {
        Formula {
            source: source.into(),
            anchor: Some(anchor),
        }
    }
}
