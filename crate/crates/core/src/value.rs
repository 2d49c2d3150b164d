//! Runtime values and the comparison/coercion rules shared by the
//! evaluator and the lookup functions.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ast::{format_number, CellAddr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorKind {
    Value,
    Na,
    Div0,
    Ref,
    Num,
}

impl ErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            ErrorKind::Value => "#VALUE!",
            ErrorKind::Na => "#N/A",
            ErrorKind::Div0 => "#DIV/0!",
            ErrorKind::Ref => "#REF!",
            ErrorKind::Num => "#NUM!",
        }
    }

    pub fn from_code(code: &str) -> Option<ErrorKind> {
        Some(match code {
            "#VALUE!" => ErrorKind::Value,
            "#N/A" => ErrorKind::Na,
            "#DIV/0!" => ErrorKind::Div0,
            "#REF!" => ErrorKind::Ref,
            "#NUM!" => ErrorKind::Num,
            _ => return None,
        })
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// A spreadsheet value. `Number` is always finite.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Text(String),
    Bool(bool),
    Blank,
    Error(ErrorKind),
}

impl Value {
    /// Builds a number, mapping NaN and infinities to `#NUM!`.
    pub fn number(v: f64) -> Value {
        if v.is_finite() {
            Value::Number(v)
        } else {
            Value::Error(ErrorKind::Num)
        }
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    pub fn error(&self) -> Option<ErrorKind> {
        match self {
            Value::Error(k) => Some(*k),
            _ => None,
        }
    }

    /// Numeric coercion used by arithmetic: blank is 0, booleans are 0/1 and
    /// numeric-looking text is parsed.
    pub fn to_number(&self) -> Result<f64, ErrorKind> {
        match self {
            Value::Number(n) => Ok(*n),
            Value::Blank => Ok(0.0),
            Value::Bool(b) => Ok(if *b { 1.0 } else { 0.0 }),
            Value::Text(s) => parse_numeric_text(s).ok_or(ErrorKind::Value),
            Value::Error(k) => Err(*k),
        }
    }

    /// Truth value of a condition. Text is not a condition.
    pub fn truthy(&self) -> Result<bool, ErrorKind> {
        match self {
            Value::Bool(b) => Ok(*b),
            Value::Number(n) => Ok(*n != 0.0),
            Value::Blank => Ok(false),
            Value::Text(_) => Err(ErrorKind::Value),
            Value::Error(k) => Err(*k),
        }
    }

    /// Text coercion used by `&`.
    pub fn to_text(&self) -> Result<String, ErrorKind> {
        match self {
            Value::Number(n) => Ok(format_number(*n)),
            Value::Text(s) => Ok(s.clone()),
            Value::Bool(true) => Ok("TRUE".to_string()),
            Value::Bool(false) => Ok("FALSE".to_string()),
            Value::Blank => Ok(String::new()),
            Value::Error(k) => Err(*k),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(n) => f.write_str(&format_number(*n)),
            Value::Text(s) => write!(f, "{s:?}"),
            Value::Bool(true) => f.write_str("TRUE"),
            Value::Bool(false) => f.write_str("FALSE"),
            Value::Blank => f.write_str("<blank>"),
            Value::Error(k) => f.write_str(k.code()),
        }
    }
}

fn parse_numeric_text(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty()
        || !t
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-'))
    {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn type_rank(v: &Value) -> u8 {
    match v {
        Value::Number(_) => 0,
        Value::Text(_) => 1,
        Value::Bool(_) => 2,
        Value::Blank | Value::Error(_) => unreachable!("blank and errors are resolved first"),
    }
}

/// Ordering used by every comparison operator.
///
/// Errors propagate (left operand first). A blank takes the zero value of
/// the other side's type. Across types, numbers sort before text and text
/// before booleans. Text compares case-insensitively.
pub fn compare(a: &Value, b: &Value) -> Result<Ordering, ErrorKind> {
    if let Value::Error(k) = a {
        return Err(*k);
    }
    if let Value::Error(k) = b {
        return Err(*k);
    }
    let blank_as = |other: &Value| match other {
        Value::Number(_) => Value::Number(0.0),
        Value::Text(_) => Value::Text(String::new()),
        Value::Bool(_) => Value::Bool(false),
        _ => Value::Blank,
    };
    let (a, b) = match (a, b) {
        (Value::Blank, Value::Blank) => return Ok(Ordering::Equal),
        (Value::Blank, other) => (blank_as(other), other.clone()),
        (other, Value::Blank) => (other.clone(), blank_as(other)),
        (x, y) => (x.clone(), y.clone()),
    };
    Ok(match (&a, &b) {
        (Value::Number(x), Value::Number(y)) => x.partial_cmp(y).unwrap_or(Ordering::Equal),
        (Value::Text(x), Value::Text(y)) => x.to_lowercase().cmp(&y.to_lowercase()),
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        _ => type_rank(&a).cmp(&type_rank(&b)),
    })
}

/// `a = b` as the `=` operator sees it.
pub fn values_equal(a: &Value, b: &Value) -> Result<bool, ErrorKind> {
    compare(a, b).map(|o| o == Ordering::Equal)
}

/// Equality of two formula results: identical error kinds, or neither an
/// error and equal under the `=` operator.
pub fn same_result(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Error(x), Value::Error(y)) => x == y,
        (Value::Error(_), _) | (_, Value::Error(_)) => false,
        _ => values_equal(a, b).unwrap_or(false),
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Number(n) => serializer.serialize_f64(*n),
            Value::Text(s) => serializer.serialize_str(s),
            Value::Bool(b) => serializer.serialize_bool(*b),
            Value::Blank => serializer.serialize_none(),
            Value::Error(k) => {
                use serde::ser::SerializeMap;
                let mut m = serializer.serialize_map(Some(1))?;
                m.serialize_entry("error", k.code())?;
                m.end()
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ValueRepr {
    Number(f64),
    Text(String),
    Bool(bool),
    Error { error: String },
    Blank(()),
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(match ValueRepr::deserialize(deserializer)? {
            ValueRepr::Number(n) => Value::number(n),
            ValueRepr::Text(s) => Value::Text(s),
            ValueRepr::Bool(b) => Value::Bool(b),
            ValueRepr::Blank(()) => Value::Blank,
            ValueRepr::Error { error } => Value::Error(
                ErrorKind::from_code(&error)
                    .ok_or_else(|| serde::de::Error::custom(format!("unknown error code {error}")))?,
            ),
        })
    }
}

/// Cell contents visible to a formula. Unmapped cells read as blank.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Environment {
    cells: BTreeMap<CellAddr, Value>,
}

impl Environment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, addr: CellAddr, value: Value) {
        let key = addr.relative();
        if value == Value::Blank {
            self.cells.remove(&key);
        } else {
            self.cells.insert(key, value);
        }
    }

    pub fn with(mut self, addr: &str, value: Value) -> Self {
        self.set(addr.parse().expect("valid address"), value);
        self
    }

    pub fn get(&self, addr: &CellAddr) -> Value {
        self.cells.get(&addr.relative()).cloned().unwrap_or(Value::Blank)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellAddr, &Value)> {
        self.cells.iter()
    }
}
