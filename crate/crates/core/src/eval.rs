//! Reference interpreter for the supported formula subset.

use std::cmp::Ordering;

use thiserror::Error;

use crate::ast::{BinOp, CellAddr, Expr, UnOp};
use crate::value::{compare, values_equal, Environment, ErrorKind, Value};

pub const SUPPORTED_FUNCTIONS: &[&str] = &[
    "IF", "IFS", "AND", "OR", "NOT", "CHOOSE", "MATCH", "VLOOKUP", "HLOOKUP", "MAX", "MIN", "SUM",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unsupported function {0}")]
    UnsupportedFunction(String),
}

/// Result of a traced evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub value: Value,
    /// Some two-argument IF took its implicit FALSE branch.
    pub implicit_else: bool,
}

pub fn check_supported(e: &Expr) -> Result<(), EvalError> {
    let mut bad = None;
    e.walk(&mut |n, _| {
        if let Expr::Call { name, .. } = n {
            if bad.is_none() && !SUPPORTED_FUNCTIONS.contains(&name.as_str()) {
                bad = Some(name.clone());
            }
        }
    });
    match bad {
        Some(name) => Err(EvalError::UnsupportedFunction(name)),
        None => Ok(()),
    }
}

pub fn eval_formula(e: &Expr, env: &Environment) -> Result<Value, EvalError> {
    eval_traced(e, env).map(|t| t.value)
}

pub fn eval_traced(e: &Expr, env: &Environment) -> Result<Trace, EvalError> {
    check_supported(e)?;
    Ok(eval_unchecked(e, env))
}

pub(crate) fn eval_unchecked(e: &Expr, env: &Environment) -> Trace {
    let mut it = Interp {
        env,
        implicit_else: false,
    };
    let value = it.eval(e);
    Trace {
        value,
        implicit_else: it.implicit_else,
    }
}

struct Interp<'a> {
    env: &'a Environment,
    implicit_else: bool,
}

#[derive(Clone, Copy)]
struct Bounds {
    c0: u32,
    r0: u32,
    c1: u32,
    r1: u32,
}

impl Bounds {
    fn new(a: &CellAddr, b: &CellAddr) -> Self {
        Bounds {
            c0: a.column.min(b.column),
            r0: a.row.min(b.row),
            c1: a.column.max(b.column),
            r1: a.row.max(b.row),
        }
    }

    fn contains(&self, c: &CellAddr) -> bool {
        (self.c0..=self.c1).contains(&c.column) && (self.r0..=self.r1).contains(&c.row)
    }

    fn width(&self) -> u32 {
        self.c1 - self.c0 + 1
    }

    fn height(&self) -> u32 {
        self.r1 - self.r0 + 1
    }
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(k) => return Value::Error(k),
        }
    };
}

enum Arg {
    One(Value),
    Many(Vec<Value>),
}

impl Interp<'_> {
    fn eval(&mut self, e: &Expr) -> Value {
        match e {
            Expr::Number(n) => Value::number(n.0),
            Expr::Text(s) => Value::Text(s.clone()),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Cell(c) => self.env.get(c),
            Expr::Range(..) | Expr::Array(_) => Value::Error(ErrorKind::Value),
            Expr::Unary { op, operand } => {
                let v = self.eval(operand);
                match op {
                    UnOp::Plus => v,
                    UnOp::Neg => Value::number(-tri!(v.to_number())),
                }
            }
            Expr::Binary { op, lhs, rhs } => {
                let a = self.eval(lhs);
                let b = self.eval(rhs);
                binary(*op, &a, &b)
            }
            Expr::Call { name, args } => self.call(name, args),
        }
    }

    fn call(&mut self, name: &str, args: &[Expr]) -> Value {
        match name {
            "IF" | "IFS" | "CHOOSE" => match self.select(name, args) {
                Ok(branch) => self.eval(branch),
                Err(v) => v,
            },
            "AND" => self.and_or(args, true),
            "OR" => self.and_or(args, false),
            "NOT" => {
                if args.len() != 1 {
                    return Value::Error(ErrorKind::Value);
                }
                Value::Bool(!tri!(self.eval(&args[0]).truthy()))
            }
            "MATCH" => self.match_fn(args),
            "VLOOKUP" => self.lookup(args, true),
            "HLOOKUP" => self.lookup(args, false),
            "MAX" => self.extremum(args, Ordering::Greater),
            "MIN" => self.extremum(args, Ordering::Less),
            "SUM" => self.sum(args),
            _ => Value::Error(ErrorKind::Value),
        }
    }

    /// The branch an IF, IFS or CHOOSE call picks, or the value it yields
    /// without picking one. Branches are returned unevaluated so that a
    /// selected range still reaches functions that take ranges.
    fn select<'e>(&mut self, name: &str, args: &'e [Expr]) -> Result<&'e Expr, Value> {
        let picked = match name {
            "IF" => {
                if !(2..=3).contains(&args.len()) {
                    return Err(Value::Error(ErrorKind::Value));
                }
                if self.eval(&args[0]).truthy().map_err(Value::Error)? {
                    &args[1]
                } else if let Some(e) = args.get(2) {
                    e
                } else {
                    self.implicit_else = true;
                    return Err(Value::Bool(false));
                }
            }
            "IFS" => {
                if args.is_empty() || !args.len().is_multiple_of(2) {
                    return Err(Value::Error(ErrorKind::Value));
                }
                let mut hit = None;
                for pair in args.chunks(2) {
                    if self.eval(&pair[0]).truthy().map_err(Value::Error)? {
                        hit = Some(&pair[1]);
                        break;
                    }
                }
                hit.ok_or(Value::Error(ErrorKind::Na))?
            }
            _ => {
                if args.len() < 2 {
                    return Err(Value::Error(ErrorKind::Value));
                }
                let idx = self.eval(&args[0]).to_number().map_err(Value::Error)?.trunc();
                if idx < 1.0 || idx >= args.len() as f64 {
                    return Err(Value::Error(ErrorKind::Value));
                }
                &args[idx as usize]
            }
        };
        Ok(picked)
    }

    /// Follows IF/IFS/CHOOSE selections down to the expression that
    /// produces the value.
    fn resolve<'e>(&mut self, e: &'e Expr) -> Result<&'e Expr, Value> {
        match e {
            Expr::Call { name, args } if matches!(name.as_str(), "IF" | "IFS" | "CHOOSE") => {
                let picked = self.select(name, args)?;
                self.resolve(picked)
            }
            _ => Ok(e),
        }
    }

    fn and_or(&mut self, args: &[Expr], is_and: bool) -> Value {
        if args.is_empty() {
            return Value::Error(ErrorKind::Value);
        }
        let mut seen = false;
        let mut acc = is_and;
        for a in args {
            let items = match self.arg(a) {
                Arg::Many(vals) => vals
                    .into_iter()
                    .filter(|v| !matches!(v, Value::Text(_) | Value::Blank))
                    .collect(),
                Arg::One(v) => vec![v],
            };
            for v in items {
                let b = tri!(v.truthy());
                seen = true;
                if is_and {
                    acc &= b;
                } else {
                    acc |= b;
                }
            }
        }
        if seen {
            Value::Bool(acc)
        } else {
            Value::Error(ErrorKind::Value)
        }
    }

    fn match_fn(&mut self, args: &[Expr]) -> Value {
        if !(2..=3).contains(&args.len()) {
            return Value::Error(ErrorKind::Value);
        }
        let needle = self.eval(&args[0]);
        if let Value::Error(k) = needle {
            return Value::Error(k);
        }
        if let Some(t) = args.get(2) {
            if tri!(self.eval(t).to_number()) != 0.0 {
                return Value::Error(ErrorKind::Value);
            }
        }
        let haystack = match self.resolve(&args[1]) {
            Ok(h) => h,
            Err(Value::Error(k)) => return Value::Error(k),
            Err(_) => return Value::Error(ErrorKind::Na),
        };
        let items = match haystack {
            Expr::Range(a, b) => {
                let bd = Bounds::new(a, b);
                if bd.width() != 1 && bd.height() != 1 {
                    return Value::Error(ErrorKind::Na);
                }
                let cells = (bd.r0..=bd.r1).flat_map(|r| (bd.c0..=bd.c1).map(move |c| (c, r)));
                for (i, (c, r)) in cells.enumerate() {
                    if values_equal(&needle, &self.env.get(&CellAddr::new(c, r))) == Ok(true) {
                        return Value::Number((i + 1) as f64);
                    }
                }
                return Value::Error(ErrorKind::Na);
            }
            Expr::Array(items) => items.iter().map(|i| self.eval(i)).collect(),
            other => vec![self.eval(other)],
        };
        for (i, v) in items.iter().enumerate() {
            if values_equal(&needle, v) == Ok(true) {
                return Value::Number((i + 1) as f64);
            }
        }
        Value::Error(ErrorKind::Na)
    }

    fn lookup(&mut self, args: &[Expr], vertical: bool) -> Value {
        if !(3..=4).contains(&args.len()) {
            return Value::Error(ErrorKind::Value);
        }
        let needle = self.eval(&args[0]);
        if let Value::Error(k) = needle {
            return Value::Error(k);
        }
        let (a, b) = match self.resolve(&args[1]) {
            Ok(Expr::Range(a, b)) => (a, b),
            Err(Value::Error(k)) => return Value::Error(k),
            _ => return Value::Error(ErrorKind::Value),
        };
        let bd = Bounds::new(a, b);
        let offset = tri!(self.eval(&args[2]).to_number()).trunc();
        let span = if vertical { bd.width() } else { bd.height() };
        if offset < 1.0 {
            return Value::Error(ErrorKind::Value);
        }
        if offset > span as f64 {
            return Value::Error(ErrorKind::Ref);
        }
        let approximate = match args.get(3) {
            Some(e) => tri!(self.eval(e).truthy()),
            None => true,
        };
        if approximate {
            return Value::Error(ErrorKind::Value);
        }
        let offset = offset as u32 - 1;
        let (start, end) = if vertical { (bd.r0, bd.r1) } else { (bd.c0, bd.c1) };
        for i in start..=end {
            let (key, hit) = if vertical {
                (CellAddr::new(bd.c0, i), CellAddr::new(bd.c0 + offset, i))
            } else {
                (CellAddr::new(i, bd.r0), CellAddr::new(i, bd.r0 + offset))
            };
            let k = self.env.get(&key);
            if values_equal(&needle, &k) == Ok(true) {
                return self.env.get(&hit);
            }
        }
        Value::Error(ErrorKind::Na)
    }

    fn extremum(&mut self, args: &[Expr], keep: Ordering) -> Value {
        if args.is_empty() {
            return Value::Error(ErrorKind::Value);
        }
        let mut best: Option<f64> = None;
        let mut take = |n: f64| {
            best = Some(match best {
                Some(b) if n.partial_cmp(&b) != Some(keep) => b,
                _ => n,
            })
        };
        for a in args {
            match self.arg(a) {
                Arg::Many(vals) => {
                    for v in vals {
                        match v {
                            Value::Number(n) => take(n),
                            Value::Error(k) => return Value::Error(k),
                            _ => {}
                        }
                    }
                }
                Arg::One(v) => match v {
                    Value::Number(n) => take(n),
                    Value::Blank => take(0.0),
                    Value::Error(k) => return Value::Error(k),
                    Value::Bool(_) | Value::Text(_) => return Value::Error(ErrorKind::Value),
                },
            }
        }
        Value::Number(best.unwrap_or(0.0))
    }

    fn sum(&mut self, args: &[Expr]) -> Value {
        if args.is_empty() {
            return Value::Error(ErrorKind::Value);
        }
        let mut total = 0.0;
        for a in args {
            match self.arg(a) {
                Arg::Many(vals) => {
                    for v in vals {
                        match v {
                            Value::Number(n) => total += n,
                            Value::Error(k) => return Value::Error(k),
                            _ => {}
                        }
                    }
                }
                Arg::One(v) => total += tri!(v.to_number()),
            }
        }
        Value::number(total)
    }

    /// Evaluates a function argument, keeping ranges and arrays whole.
    fn arg(&mut self, e: &Expr) -> Arg {
        match self.resolve(e) {
            Err(v) => Arg::One(v),
            Ok(Expr::Range(a, b)) => Arg::Many(self.range_values(Bounds::new(a, b))),
            Ok(Expr::Array(items)) => Arg::Many(items.iter().map(|i| self.eval(i)).collect()),
            Ok(other) => Arg::One(self.eval(other)),
        }
    }

    /// Row-major cell values. Large ranges only yield their non-blank cells,
    /// so callers must ignore blanks.
    fn range_values(&self, bd: Bounds) -> Vec<Value> {
        let area = bd.width() as u64 * bd.height() as u64;
        if area > 4096 && area > self.env.len() as u64 {
            let mut hits: Vec<(&CellAddr, &Value)> = self.env.iter().filter(|(c, _)| bd.contains(c)).collect();
            hits.sort_by_key(|(c, _)| (c.row, c.column));
            return hits.into_iter().map(|(_, v)| v.clone()).collect();
        }
        let mut out = Vec::with_capacity(area as usize);
        for r in bd.r0..=bd.r1 {
            for c in bd.c0..=bd.c1 {
                out.push(self.env.get(&CellAddr::new(c, r)));
            }
        }
        out
    }
}

fn binary(op: BinOp, a: &Value, b: &Value) -> Value {
    if op.is_comparison() {
        let ord = tri!(compare(a, b));
        return Value::Bool(match op {
            BinOp::Eq => ord == Ordering::Equal,
            BinOp::Ne => ord != Ordering::Equal,
            BinOp::Lt => ord == Ordering::Less,
            BinOp::Le => ord != Ordering::Greater,
            BinOp::Gt => ord == Ordering::Greater,
            BinOp::Ge => ord != Ordering::Less,
            _ => unreachable!(),
        });
    }
    if op == BinOp::Concat {
        let x = tri!(a.to_text());
        let y = tri!(b.to_text());
        return Value::Text(x + &y);
    }
    if let Value::Error(k) = a {
        return Value::Error(*k);
    }
    let x = tri!(a.to_number());
    let y = tri!(b.to_number());
    match op {
        BinOp::Add => Value::number(x + y),
        BinOp::Sub => Value::number(x - y),
        BinOp::Mul => Value::number(x * y),
        BinOp::Div if y == 0.0 => Value::Error(ErrorKind::Div0),
        BinOp::Div => Value::number(x / y),
        BinOp::Pow if x == 0.0 && y < 0.0 => Value::Error(ErrorKind::Div0),
        BinOp::Pow => Value::number(x.powf(y)),
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn ev(src: &str, env: &Environment) -> Value {
        eval_formula(&parse(src).unwrap(), env).unwrap()
    }

    fn n(v: f64) -> Value {
        Value::Number(v)
    }

    #[test]
    fn branch_selection() {
        let env = Environment::new().with("A1", n(3.0)).with("B1", n(5.0));
        assert_eq!(ev("IF(A1>B1,A1,B1)", &env), n(5.0));
        assert_eq!(ev("IF(A1<B1,A1)", &env), n(3.0));
        assert_eq!(ev("IF(A1>B1,A1)", &env), Value::Bool(false));
    }

    #[test]
    fn ifs_first_true_and_no_match() {
        let env = Environment::new().with("A1", n(9.0));
        assert_eq!(ev("IFS(A1=1,\"a\",TRUE,\"z\")", &env), Value::text("z"));
        assert_eq!(ev("IFS(A1=1,\"a\")", &env), Value::Error(ErrorKind::Na));
    }

    #[test]
    fn vlookup_exact() {
        let env = Environment::new()
            .with("A1", Value::text("k2"))
            .with("C1", Value::text("k1"))
            .with("C2", Value::text("k2"))
            .with("D1", n(10.0))
            .with("D2", n(20.0));
        assert_eq!(ev("VLOOKUP(A1,C1:D4,2,FALSE)", &env), n(20.0));
        assert_eq!(ev("VLOOKUP(\"zz\",C1:D4,2,FALSE)", &env), Value::Error(ErrorKind::Na));
        assert_eq!(ev("VLOOKUP(A1,C1:D4,3,FALSE)", &env), Value::Error(ErrorKind::Ref));
        let h = Environment::new()
            .with("A1", n(2.0))
            .with("C1", n(1.0))
            .with("D1", n(2.0))
            .with("D2", Value::text("hit"));
        assert_eq!(ev("HLOOKUP(A1,C1:E2,2,FALSE)", &h), Value::text("hit"));
    }

    #[test]
    fn choose_and_match() {
        let env = Environment::new().with("A1", n(4.0));
        assert_eq!(ev("CHOOSE(A1,\"a\",\"b\",\"c\")", &env), Value::Error(ErrorKind::Value));
        assert_eq!(ev("CHOOSE(A1-2,\"a\",\"b\",\"c\")", &env), Value::text("b"));
        assert_eq!(ev("CHOOSE(A1/3,\"a\",\"b\")", &env), Value::text("a"));
        let env = Environment::new().with("A1", Value::text("Y"));
        assert_eq!(ev("MATCH(A1,{\"x\",\"y\",\"z\"},0)", &env), n(2.0));
        assert_eq!(ev("MATCH(\"q\",{\"x\"},0)", &env), Value::Error(ErrorKind::Na));
    }

    #[test]
    fn and_or_are_eager() {
        let env = Environment::new().with("A1", Value::Bool(false));
        assert_eq!(ev("AND(A1,1/0)", &env), Value::Error(ErrorKind::Div0));
        assert_eq!(ev("IF(A1,1/0>1,FALSE)", &env), Value::Bool(false));
        assert_eq!(ev("OR(A1,B1,2)", &env), Value::Bool(true));
        assert_eq!(ev("AND(TRUE,\"x\")", &env), Value::Error(ErrorKind::Value));
    }

    #[test]
    fn arithmetic_coercions() {
        let env = Environment::new();
        assert_eq!(ev("\"2\"+1", &env), n(3.0));
        assert_eq!(ev("TRUE+1", &env), n(2.0));
        assert_eq!(ev("B1+1", &env), n(1.0));
        assert_eq!(ev("\"a\"+1", &env), Value::Error(ErrorKind::Value));
        assert_eq!(ev("1/0", &env), Value::Error(ErrorKind::Div0));
        assert_eq!(ev("(-8)^0.5", &env), Value::Error(ErrorKind::Num));
        assert_eq!(ev("1&2", &env), Value::text("12"));
        assert_eq!(ev("B1=\"\"", &env), Value::Bool(true));
        assert_eq!(ev("B1=0", &env), Value::Bool(true));
    }

    #[test]
    fn max_min_sum() {
        let env = Environment::new()
            .with("A1", n(3.0))
            .with("A2", Value::text("x"))
            .with("A3", n(-1.0));
        assert_eq!(ev("MAX(A1,B1)", &env), n(3.0));
        assert_eq!(ev("MIN(A3,B1)", &env), n(-1.0));
        assert_eq!(ev("MIN(A1,B1)", &env), n(0.0));
        assert_eq!(ev("MAX(A1,A2)", &env), Value::Error(ErrorKind::Value));
        assert_eq!(ev("MAX(A1:A3)", &env), n(3.0));
        assert_eq!(ev("SUM(A1:A3,2)", &env), n(4.0));
        assert_eq!(ev("MAX(TRUE,1)", &env), Value::Error(ErrorKind::Value));
    }

    #[test]
    fn selected_ranges_stay_ranges() {
        let env = Environment::new()
            .with("A1", n(3.0))
            .with("A2", Value::text("x"))
            .with("B1", n(5.0));
        assert_eq!(ev("SUM(IF(A1>0,A1:A3,0))", &env), n(3.0));
        assert_eq!(ev("MAX(CHOOSE(2,A1,B1:B3))", &env), n(5.0));
        assert_eq!(ev("MATCH(\"x\",IFS(FALSE,B1:B2,TRUE,A1:A2),0)", &env), n(2.0));
        assert_eq!(ev("VLOOKUP(3,IF(TRUE,A1:B1),2,FALSE)", &env), n(5.0));
        assert_eq!(ev("SUM(IF(FALSE,A1:A3))", &env), n(0.0));
        assert_eq!(ev("IF(TRUE,A1:A3)", &env), Value::Error(ErrorKind::Value));
    }

    #[test]
    fn large_ranges() {
        let env = Environment::new().with("A5", Value::text("x")).with("B9000", n(1.0));
        assert_eq!(ev("MATCH(\"x\",A1:A100000,0)", &env), n(5.0));
        assert_eq!(ev("MATCH(B1,A3:A100000,0)", &env), n(1.0));
        assert_eq!(ev("SUM(A1:C100000)", &env), n(1.0));
    }

    #[test]
    fn unsupported_function() {
        let e = parse("IF(A1,VLOOKUPX(1),2)").unwrap();
        assert_eq!(
            eval_formula(&e, &Environment::new()),
            Err(EvalError::UnsupportedFunction("VLOOKUPX".into()))
        );
    }

    #[test]
    fn trace_reports_implicit_else() {
        let e = parse("IF(A1=1,\"a\",IF(A1=2,\"b\"))").unwrap();
        let env = Environment::new().with("A1", n(3.0));
        let t = eval_traced(&e, &env).unwrap();
        assert!(t.implicit_else);
        assert_eq!(t.value, Value::Bool(false));
        let env = Environment::new().with("A1", n(2.0));
        assert!(!eval_traced(&e, &env).unwrap().implicit_else);
    }
}
