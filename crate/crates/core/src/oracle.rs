//! Differential equivalence checking: sample cell environments for a pair of
//! formulas and compare their results under the reference interpreter.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{extract_if_chains, ChainDirection};
use crate::ast::{BinOp, CellAddr, Expr, UnOp};
use crate::eval::{check_supported, eval_unchecked, EvalError};
use crate::patterns::TableSpec;
use crate::redundancy::remove_redundancy;
use crate::value::{same_result, Environment, Value};

/// Ranges with at most this many cells get every cell sampled.
const SMALL_RANGE: u64 = 64;
const REJECTION_TRIES: usize = 64;

/// One sample on which the two formulas disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counterexample {
    pub env: Environment,
    pub original: Value,
    pub refactored: Value,
    pub in_domain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Equivalence {
    /// Results agree on every sample.
    pub equal: bool,
    /// Results agree on every in-domain sample.
    pub in_domain_equal: bool,
    pub samples: usize,
    pub in_domain_samples: usize,
    pub mismatches: Vec<Counterexample>,
}

impl Equivalence {
    pub fn first_counterexample(&self) -> Option<&Counterexample> {
        self.mismatches.first()
    }
}

#[derive(Debug, Default, Clone)]
struct Usage {
    text: BTreeSet<String>,
    numbers: Vec<f64>,
    numeric: bool,
    linked: bool,
    boolish: bool,
}

#[derive(Debug, Clone)]
enum Pool {
    NumberLiterals(Vec<f64>),
    Numeric,
    TextLiterals(Vec<String>),
    Linked,
    Boolish,
    Mixed,
}

struct Sampler {
    cells: Vec<(CellAddr, Pool)>,
    linked: Vec<Value>,
}

fn literal_number(e: &Expr) -> Option<f64> {
    match e {
        Expr::Number(n) => Some(n.0),
        Expr::Unary { op: UnOp::Neg, operand } => literal_number(operand).map(|v| -v),
        _ => None,
    }
}

fn collect_usage(e: &Expr, usage: &mut BTreeMap<CellAddr, Usage>) {
    let mut mark = |e: &Expr, f: &mut dyn FnMut(&mut Usage)| {
        if let Expr::Cell(c) = e {
            f(usage.entry(c.relative()).or_default());
        }
    };
    e.walk(&mut |n, _| match n {
        Expr::Cell(c) => {
            mark(&Expr::Cell(*c), &mut |_| {});
        }
        Expr::Range(a, b) => {
            let (c0, c1) = (a.column.min(b.column), a.column.max(b.column));
            let (r0, r1) = (a.row.min(b.row), a.row.max(b.row));
            if (c1 - c0 + 1) as u64 * (r1 - r0 + 1) as u64 <= SMALL_RANGE {
                for r in r0..=r1 {
                    for c in c0..=c1 {
                        mark(&Expr::Cell(CellAddr::new(c, r)), &mut |_| {});
                    }
                }
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let sides = [(lhs.as_ref(), rhs.as_ref()), (rhs.as_ref(), lhs.as_ref())];
            for (side, other) in sides {
                match op {
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => mark(side, &mut |u| u.numeric = true),
                    op if op.is_arithmetic() => mark(side, &mut |u| u.numeric = true),
                    BinOp::Eq | BinOp::Ne => match other {
                        Expr::Text(s) => {
                            let s = s.clone();
                            mark(side, &mut |u| {
                                u.text.insert(s.clone());
                            })
                        }
                        Expr::Cell(_) => mark(side, &mut |u| u.linked = true),
                        Expr::Bool(_) => mark(side, &mut |u| u.boolish = true),
                        o => {
                            if let Some(v) = literal_number(o) {
                                mark(side, &mut |u| u.numbers.push(v));
                            }
                        }
                    },
                    _ => {}
                }
            }
        }
        Expr::Call { name, args } => match name.as_str() {
            "IF" => mark(&args[0], &mut |u| u.boolish = true),
            "IFS" => args.iter().step_by(2).for_each(|a| mark(a, &mut |u| u.boolish = true)),
            "AND" | "OR" | "NOT" => args.iter().for_each(|a| mark(a, &mut |u| u.boolish = true)),
            "MAX" | "MIN" | "SUM" => args.iter().for_each(|a| mark(a, &mut |u| u.numeric = true)),
            _ => {}
        },
        _ => {}
    });
}

impl Sampler {
    fn new(formulas: &[&Expr]) -> Self {
        let mut usage = BTreeMap::new();
        for f in formulas {
            collect_usage(f, &mut usage);
        }
        let mut linked: Vec<Value> = vec![
            Value::Number(1.0),
            Value::Number(2.0),
            Value::Number(3.0),
            Value::text("a"),
            Value::Blank,
        ];
        for u in usage.values() {
            linked.extend(u.text.iter().map(|s| Value::text(s.clone())));
            linked.extend(u.numbers.iter().map(|n| Value::Number(*n)));
        }
        let cells = usage
            .into_iter()
            .map(|(addr, u)| {
                let pool = if !u.numbers.is_empty() {
                    Pool::NumberLiterals(u.numbers)
                } else if u.numeric {
                    Pool::Numeric
                } else if !u.text.is_empty() {
                    Pool::TextLiterals(u.text.into_iter().collect())
                } else if u.linked {
                    Pool::Linked
                } else if u.boolish {
                    Pool::Boolish
                } else {
                    Pool::Mixed
                };
                (addr, pool)
            })
            .collect();
        Sampler { cells, linked }
    }

    fn draw(&self, pool: &Pool, rng: &mut ChaCha8Rng) -> Value {
        let roll: f64 = rng.gen();
        match pool {
            Pool::NumberLiterals(lits) => {
                let base = *lits.choose(rng).expect("non-empty");
                if roll < 0.6 {
                    Value::Number(base)
                } else if roll < 0.75 {
                    Value::Number(base + [-1.0, 1.0, 0.5][rng.gen_range(0..3)])
                } else if roll < 0.9 {
                    Value::Number(rng.gen_range(-3..=12) as f64)
                } else {
                    Value::Blank
                }
            }
            Pool::Numeric => {
                if roll < 0.6 {
                    Value::Number(rng.gen_range(-5..=10) as f64)
                } else if roll < 0.85 {
                    Value::Number(rng.gen_range(-100..=100) as f64 / 10.0)
                } else if roll < 0.95 {
                    Value::Blank
                } else {
                    Value::Number(0.0)
                }
            }
            Pool::TextLiterals(lits) => {
                if roll < 0.6 {
                    Value::text(lits.choose(rng).expect("non-empty").clone())
                } else if roll < 0.7 {
                    Value::text(lits.choose(rng).expect("non-empty").to_uppercase())
                } else if roll < 0.85 {
                    Value::text(format!("r{}", rng.gen_range(0..100)))
                } else {
                    Value::Blank
                }
            }
            Pool::Linked => self.linked.choose(rng).expect("non-empty").clone(),
            Pool::Boolish => {
                if roll < 0.7 {
                    Value::Bool(rng.gen())
                } else if roll < 0.9 {
                    Value::Number(rng.gen_range(0..=1) as f64)
                } else {
                    Value::Blank
                }
            }
            Pool::Mixed => match rng.gen_range(0..6) {
                0 | 1 => Value::Number(rng.gen_range(0..=5) as f64),
                2 => Value::text(["x", "y"][rng.gen_range(0..2)]),
                3 => Value::Bool(rng.gen()),
                4 => Value::Number(rng.gen_range(-50..=50) as f64 / 4.0),
                _ => Value::Blank,
            },
        }
    }

    fn pool(&self, c: &CellAddr) -> Option<&Pool> {
        let key = c.relative();
        self.cells.iter().find(|(a, _)| *a == key).map(|(_, p)| p)
    }

    /// A value of the cell's type with the requested truthiness.
    fn truthy_value(&self, c: &CellAddr, want: bool, rng: &mut ChaCha8Rng) -> Value {
        match self.pool(c) {
            Some(Pool::Numeric | Pool::NumberLiterals(_)) => Value::Number(if want {
                *[1.0, 2.0, -3.0, 0.5].choose(rng).expect("non-empty")
            } else {
                0.0
            }),
            _ => Value::Bool(want),
        }
    }

    fn fresh(&self, rng: &mut ChaCha8Rng) -> Environment {
        let mut env = Environment::new();
        for (addr, pool) in &self.cells {
            env.set(*addr, self.draw(pool, rng));
        }
        env
    }
}

/// Conditions of the outermost IF chain of `e`, following whichever branch
/// direction yields the longer chain.
fn outer_chain(e: &Expr) -> (ChainDirection, Vec<Expr>) {
    let pick = |dir| {
        extract_if_chains(e, dir)
            .into_iter()
            .next()
            .map(|c| {
                c.nodes
                    .iter()
                    .map(|n| n.as_if().expect("IF").cond.clone())
                    .collect::<Vec<_>>()
            })
            .unwrap_or_default()
    };
    let f = pick(ChainDirection::FalseBranch);
    let t = pick(ChainDirection::TrueBranch);
    if t.len() > f.len() {
        (ChainDirection::TrueBranch, t)
    } else {
        (ChainDirection::FalseBranch, f)
    }
}

fn outer_chain_conditions(e: &Expr) -> Vec<Expr> {
    outer_chain(e).1
}

fn holds(cond: &Expr, env: &Environment) -> bool {
    eval_unchecked(cond, env).value.truthy() == Ok(true)
}

/// Tries a direct assignment that makes `cond` true, keeping cells within
/// their sampled type.
fn force(sampler: &Sampler, cond: &Expr, env: &mut Environment, rng: &mut ChaCha8Rng) {
    match cond {
        Expr::Cell(c) => env.set(*c, sampler.truthy_value(c, true, rng)),
        Expr::Call { name, args } if name == "NOT" && args.len() == 1 => {
            if let Expr::Cell(c) = &args[0] {
                env.set(*c, sampler.truthy_value(c, false, rng));
            }
        }
        Expr::Binary {
            op: op @ (BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge),
            lhs,
            rhs,
        } => {
            // solve for the left cell if there is one, else for the right one
            let (cell, other, op) = match (lhs.as_ref(), rhs.as_ref()) {
                (Expr::Cell(a), o) => (*a, o, *op),
                (o, Expr::Cell(b)) => (*b, o, op.flipped().expect("comparison")),
                _ => return,
            };
            let pivot = match other {
                Expr::Cell(b) => match env.get(b) {
                    Value::Number(n) => n,
                    _ => {
                        let n = rng.gen_range(-5..=10) as f64;
                        env.set(*b, Value::Number(n));
                        n
                    }
                },
                o => match literal_number(o) {
                    Some(n) => n,
                    None => return,
                },
            };
            let step = rng.gen_range(1..=3) as f64;
            let v = match op {
                BinOp::Lt => pivot - step,
                BinOp::Gt => pivot + step,
                BinOp::Le => pivot - step + 1.0,
                _ => pivot + step - 1.0,
            };
            env.set(cell, Value::Number(v));
        }
        Expr::Binary {
            op: BinOp::Eq,
            lhs,
            rhs,
        } => {
            let (cell, other) = match (lhs.as_ref(), rhs.as_ref()) {
                (Expr::Cell(a), Expr::Cell(b)) => {
                    if rng.gen() {
                        (*a, env.get(b))
                    } else {
                        (*b, env.get(a))
                    }
                }
                (Expr::Cell(a), o) | (o, Expr::Cell(a)) if o.is_literal() || literal_number(o).is_some() => {
                    (*a, eval_unchecked(o, env).value)
                }
                _ => return,
            };
            env.set(cell, other);
        }
        _ => {}
    }
}

/// Samples `count` environments covering every cell referenced by either
/// formula. At least a quarter of them (every other one) make some
/// condition of the original's outermost IF chain true whenever that is
/// reachable.
pub fn sample_environments(original: &Expr, refactored: &Expr, count: usize, seed: u64) -> Vec<Environment> {
    let sampler = Sampler::new(&[original, refactored]);
    // Dead IFs cut chains short; the chain of the cleaned formula reaches
    // the same leaves.
    let cleaned = remove_redundancy(original)
        .map(|(e, _)| e)
        .unwrap_or_else(|_| original.clone());
    let (direction, conds) = outer_chain(&cleaned);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mut env = sampler.fresh(&mut rng);
            if i % 2 != 0 || conds.is_empty() {
                return env;
            }
            // Along a true-branch chain a node is reached only when every
            // condition before it holds, so force a whole prefix.
            let targets: Vec<&Expr> = match direction {
                ChainDirection::TrueBranch => {
                    let k = if rng.gen() {
                        conds.len()
                    } else {
                        rng.gen_range(1..=conds.len())
                    };
                    conds[..k].iter().collect()
                }
                ChainDirection::FalseBranch => vec![conds.choose(&mut rng).expect("non-empty")],
            };
            let mut tries = 0;
            loop {
                for t in &targets {
                    force(&sampler, t, &mut env, &mut rng);
                }
                if targets.iter().all(|c| holds(c, &env)) || tries >= REJECTION_TRIES {
                    break;
                }
                env = sampler.fresh(&mut rng);
                tries += 1;
            }
            env
        })
        .collect()
}

/// Whether some condition of the outermost IF chain of `original` holds.
pub fn satisfies_outer_chain(original: &Expr, env: &Environment) -> bool {
    outer_chain_conditions(original).iter().any(|c| holds(c, env))
}

/// An environment is in-domain for a rewrite when evaluating `original`
/// never falls through to the implicit FALSE of a two-argument IF, and every
/// IF/IFS condition of either formula, evaluated on its own, yields a
/// boolean, number or blank without falling through either.
pub fn is_in_domain(original: &Expr, refactored: &Expr, env: &Environment) -> bool {
    !eval_unchecked(original, env).implicit_else
        && conditions_well_formed(original, env)
        && conditions_well_formed(refactored, env)
}

fn conditions_well_formed(e: &Expr, env: &Environment) -> bool {
    let mut ok = true;
    e.walk(&mut |n, _| {
        if !ok {
            return;
        }
        let conds: Vec<&Expr> = match n {
            Expr::Call { name, args } if name == "IF" => args.iter().take(1).collect(),
            Expr::Call { name, args } if name == "IFS" => args.iter().step_by(2).collect(),
            _ => return,
        };
        for c in conds {
            let t = eval_unchecked(c, env);
            if t.implicit_else || matches!(t.value, Value::Text(_) | Value::Error(_)) {
                ok = false;
            }
        }
    });
    ok
}

/// Evaluates both formulas on `count` sampled environments, with the cells
/// of `tables` written over each sample first.
pub fn verify_equivalence(
    original: &Expr,
    refactored: &Expr,
    tables: &[TableSpec],
    count: usize,
    seed: u64,
) -> Result<Equivalence, EvalError> {
    check_supported(original)?;
    check_supported(refactored)?;
    let mut result = Equivalence {
        equal: true,
        in_domain_equal: true,
        samples: count,
        in_domain_samples: 0,
        mismatches: Vec::new(),
    };
    for mut env in sample_environments(original, refactored, count, seed) {
        for t in tables {
            t.write_into(&mut env);
        }
        let a = eval_unchecked(original, &env).value;
        let b = eval_unchecked(refactored, &env).value;
        let in_domain = is_in_domain(original, refactored, &env);
        result.in_domain_samples += usize::from(in_domain);
        if !same_result(&a, &b) {
            result.equal = false;
            result.in_domain_equal &= !in_domain;
            result.mismatches.push(Counterexample {
                env,
                original: a,
                refactored: b,
                in_domain,
            });
        }
    }
    Ok(result)
}
