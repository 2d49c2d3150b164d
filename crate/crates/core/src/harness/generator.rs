//! Seeded synthetic corpora: pattern templates at chosen depths, optional
//! injected redundancy, negative controls, and unconstrained fuzz formulas.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::if_depth;
use crate::ast::{BinOp, CellAddr, Expr, UnOp};
use crate::par::item_seed;
use crate::parser::print;
use crate::patterns::PatternId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerateSpec {
    pub per_pattern: BTreeMap<PatternId, usize>,
    pub min_depth: usize,
    pub max_depth: usize,
    /// Fraction of template formulas that get a dominated IF injected.
    pub redundancy_fraction: f64,
    /// Number of negative controls appended.
    pub controls: usize,
    pub seed: u64,
}

impl Default for GenerateSpec {
    fn default() -> Self {
        GenerateSpec {
            per_pattern: BTreeMap::new(),
            min_depth: 2,
            max_depth: 12,
            redundancy_fraction: 0.0,
            controls: 0,
            seed: 0,
        }
    }
}

impl GenerateSpec {
    /// `count` formulas for each pattern template other than REDUN.
    pub fn uniform(count: usize) -> Self {
        let per_pattern = PatternId::ALL
            .into_iter()
            .filter(|p| *p != PatternId::Redun)
            .map(|p| (p, count))
            .collect();
        GenerateSpec {
            per_pattern,
            ..GenerateSpec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error("depth range {0}..={1} is empty or below 2")]
    DepthRange(usize, usize),
    #[error("redundancy fraction {0} is outside [0, 1]")]
    Fraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GeneratedKind {
    Pattern(PatternId),
    Control,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GeneratedFormula {
    pub formula: String,
    pub kind: GeneratedKind,
    pub depth: usize,
    /// The template before injection, when a dominated IF was injected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
}

impl GeneratedFormula {
    pub fn is_control(&self) -> bool {
        self.kind == GeneratedKind::Control
    }
}

/// Allocates distinct cells so that unrelated template parts never share a
/// reference.
struct Cells {
    next: u32,
}

impl Cells {
    const FIRST_COLUMN: u32 = 6;
    const WIDTH: u32 = 20;

    fn new() -> Self {
        Cells { next: 0 }
    }

    fn fresh(&mut self) -> Expr {
        let k = self.next;
        self.next += 1;
        Expr::cell(Self::FIRST_COLUMN + k % Self::WIDTH, 1 + k / Self::WIDTH)
    }

    /// Columns to the right of everything [`Cells::fresh`] hands out.
    fn block_column(&self) -> u32 {
        Self::FIRST_COLUMN + Self::WIDTH + 2
    }
}

struct Gen {
    rng: ChaCha8Rng,
    cells: Cells,
    unique: u32,
}

const WORDS: &[&str] = &[
    "red", "green", "blue", "north", "south", "east", "west", "gold", "iron", "oak", "pine", "mint",
];

impl Gen {
    fn new(seed: u64) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            cells: Cells::new(),
            unique: 0,
        }
    }

    fn tick(&mut self) -> u32 {
        self.unique += 1;
        self.unique
    }

    fn word(&mut self) -> String {
        let w = WORDS.choose(&mut self.rng).expect("non-empty");
        format!("{w}{}", self.tick())
    }

    fn ordered_op(&mut self) -> BinOp {
        *[BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge]
            .choose(&mut self.rng)
            .expect("non-empty")
    }

    /// A condition over cells no other part of the formula uses.
    fn condition(&mut self) -> Expr {
        match self.rng.gen_range(0..6) {
            0 | 1 => {
                let op = self.ordered_op();
                let n = self.rng.gen_range(0..20) as f64;
                Expr::binary(op, self.cells.fresh(), Expr::number(n))
            }
            2 => {
                let op = self.ordered_op();
                Expr::binary(op, self.cells.fresh(), self.cells.fresh())
            }
            3 => self.cells.fresh(),
            4 => {
                let w = self.word();
                Expr::binary(BinOp::Eq, self.cells.fresh(), Expr::text(w))
            }
            _ => Expr::call("NOT", vec![self.cells.fresh()]),
        }
    }

    /// A branch value distinct from every other value generated so far.
    fn value(&mut self) -> Expr {
        match self.rng.gen_range(0..5) {
            0 => Expr::number(self.tick() as f64 * 10.0),
            1 => {
                let w = self.word();
                Expr::text(w)
            }
            2 => self.cells.fresh(),
            3 => Expr::binary(
                BinOp::Mul,
                self.cells.fresh(),
                Expr::number(self.rng.gen_range(2..9) as f64),
            ),
            _ => {
                let w = self.word();
                Expr::binary(BinOp::Concat, self.cells.fresh(), Expr::text(w))
            }
        }
    }

    fn maybe_else(&mut self, p_omit: f64) -> Option<Expr> {
        if self.rng.gen_bool(p_omit) {
            None
        } else {
            Some(self.value())
        }
    }

    /// `IF(c1,v1,IF(c2,v2,...,IF(cn,vn,tail)))`.
    fn false_chain(conds: Vec<Expr>, values: Vec<Expr>, tail: Option<Expr>) -> Expr {
        conds
            .into_iter()
            .zip(values)
            .rev()
            .fold(tail, |acc, (c, v)| Some(Expr::if_(c, v, acc)))
            .expect("non-empty chain")
    }

    fn chain_parts(&mut self, n: usize) -> (Vec<Expr>, Vec<Expr>) {
        let conds = (0..n).map(|_| self.condition()).collect();
        let values = (0..n).map(|_| self.value()).collect();
        (conds, values)
    }

    fn and(&mut self, depth: usize) -> Expr {
        let conds: Vec<Expr> = (0..depth).map(|_| self.condition()).collect();
        let then = self.value();
        let otherwise = self.maybe_else(0.2);
        conds
            .into_iter()
            .rev()
            .fold(then, |acc, c| Expr::if_(c, acc, otherwise.clone()))
    }

    fn or(&mut self, depth: usize) -> Expr {
        let conds: Vec<Expr> = (0..depth).map(|_| self.condition()).collect();
        let shared = self.value();
        let tail = self.maybe_else(0.3);
        Self::false_chain(conds, vec![shared; depth], tail)
    }

    fn progression(&mut self, n: usize) -> (i64, i64) {
        let d = *[1i64, 1, 2, 3, 5, -1, -2].choose(&mut self.rng).expect("non-empty");
        let a = match self.rng.gen_range(0..3) {
            0 => 1,
            1 => d,
            _ => self.rng.gen_range(-3..=6),
        };
        // keep the progression clear of d == 0 and of huge values
        debug_assert!(d != 0 && (a + n as i64 * d).abs() < 1000);
        (a, d)
    }

    fn choose(&mut self, depth: usize) -> Expr {
        let x = self.cells.fresh();
        let (a, d) = self.progression(depth);
        let conds = (0..depth)
            .map(|i| Expr::binary(BinOp::Eq, x.clone(), Expr::number((a + i as i64 * d) as f64)))
            .collect();
        let values = (0..depth).map(|_| Expr::text(self.word())).collect();
        Self::false_chain(conds, values, None)
    }

    fn match_(&mut self, depth: usize) -> Expr {
        let x = self.cells.fresh();
        let (a, d) = self.progression(depth);
        let conds = (0..depth)
            .map(|_| Expr::binary(BinOp::Eq, x.clone(), Expr::text(self.word())))
            .collect();
        let values = (0..depth).map(|i| Expr::number((a + i as i64 * d) as f64)).collect();
        Self::false_chain(conds, values, None)
    }

    fn lookup(&mut self, depth: usize) -> Expr {
        let x = self.cells.fresh();
        let (conds, values): (Vec<Expr>, Vec<Expr>) = if self.rng.gen_bool(0.5) {
            let base_col = self.cells.block_column() + self.rng.gen_range(0..4);
            let base_row = self.rng.gen_range(1..20u32);
            let offset = self.rng.gen_range(1..3u32);
            let vertical = self.rng.gen_bool(0.6);
            (0..depth as u32)
                .map(|i| {
                    let (key, val) = if vertical {
                        (
                            CellAddr::new(base_col, base_row + i),
                            CellAddr::new(base_col + offset, base_row + i),
                        )
                    } else {
                        (
                            CellAddr::new(base_col + i, base_row),
                            CellAddr::new(base_col + i, base_row + offset),
                        )
                    };
                    (Expr::binary(BinOp::Eq, x.clone(), Expr::Cell(key)), Expr::Cell(val))
                })
                .unzip()
        } else {
            (0..depth)
                .map(|_| {
                    let k = self.word();
                    let v = self.word();
                    (Expr::binary(BinOp::Eq, x.clone(), Expr::text(k)), Expr::text(v))
                })
                .unzip()
        };
        Self::false_chain(conds, values, None)
    }

    fn maxmin_tail(&mut self) -> Expr {
        let (a, b) = (self.cells.fresh(), self.cells.fresh());
        let op = self.ordered_op();
        let (t, e) = if self.rng.gen_bool(0.5) {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        Expr::if_(Expr::binary(op, a, b), t, Some(e))
    }

    fn useless_tail(&mut self) -> Expr {
        let (a, b) = (self.cells.fresh(), self.cells.fresh());
        match self.rng.gen_range(0..4) {
            0 => Expr::if_(Expr::binary(BinOp::Eq, a.clone(), b.clone()), a, Some(b)),
            1 => Expr::if_(Expr::binary(BinOp::Ne, a.clone(), b.clone()), b, Some(a)),
            2 => Expr::if_(
                Expr::binary(BinOp::Eq, a.clone(), Expr::text("")),
                Expr::text(""),
                Some(a),
            ),
            _ => {
                let c = self.condition();
                let v = self.value();
                Expr::if_(c, v.clone(), Some(v))
            }
        }
    }

    fn with_tail(&mut self, depth: usize, tail: Expr) -> Expr {
        let (conds, values) = self.chain_parts(depth - 1);
        if conds.is_empty() {
            return tail;
        }
        Self::false_chain(conds, values, Some(tail))
    }

    fn ifs(&mut self, depth: usize) -> Expr {
        let (conds, values) = self.chain_parts(depth);
        let tail = self.maybe_else(0.5);
        Self::false_chain(conds, values, tail)
    }

    fn template(&mut self, p: PatternId, depth: usize) -> Expr {
        match p {
            PatternId::And => self.and(depth),
            PatternId::Or => self.or(depth),
            PatternId::Choose => self.choose(depth),
            PatternId::Match => self.match_(depth),
            PatternId::Lookup => self.lookup(depth),
            PatternId::Maxmin => {
                let t = self.maxmin_tail();
                self.with_tail(depth, t)
            }
            PatternId::Useless => {
                let t = self.useless_tail();
                self.with_tail(depth, t)
            }
            PatternId::Ifs | PatternId::Redun => self.ifs(depth),
        }
    }

    fn control(&mut self, which: usize) -> Expr {
        let if_bool = |g: &mut Gen| Expr::if_(g.cells.fresh(), Expr::Bool(true), Some(Expr::Bool(false)));
        if which.is_multiple_of(2) {
            let cond = Expr::call("AND", vec![if_bool(self), if_bool(self)]);
            let (v1, v2) = (self.value(), self.value());
            Expr::if_(cond, v1, Some(v2))
        } else {
            let c3 = self.cells.fresh();
            let inner1 = Expr::if_(self.cells.fresh(), self.value(), Some(self.value()));
            let inner2 = Expr::if_(self.cells.fresh(), self.value(), Some(self.value()));
            let v5 = self.value();
            Expr::if_(c3, Expr::call("SUM", vec![inner1, inner2]), Some(v5))
        }
    }
}

/// `c` written differently but with the same truth value.
fn same_condition(c: &Expr, flip: bool) -> Expr {
    match c {
        Expr::Binary { op, lhs, rhs } if flip && op.is_comparison() => {
            Expr::binary(op.flipped().expect("comparison"), (**rhs).clone(), (**lhs).clone())
        }
        _ => c.clone(),
    }
}

/// A condition true exactly when `c` is false.
fn complement_condition(c: &Expr, use_not: bool) -> Expr {
    match c {
        Expr::Binary { op, lhs, rhs } if !use_not && op.is_comparison() => {
            Expr::binary(op.complement().expect("comparison"), (**lhs).clone(), (**rhs).clone())
        }
        Expr::Call { name, args } if !use_not && name == "NOT" && args.len() == 1 => args[0].clone(),
        _ => Expr::call("NOT", vec![c.clone()]),
    }
}

/// Wraps one branch of a random IF node in a new IF whose condition is
/// decided by that node's condition, so the new IF is dead weight.
pub fn inject_redundancy(e: &Expr, rng: &mut impl Rng) -> Expr {
    let mut sites = Vec::new();
    e.walk(&mut |n, path| {
        if n.is_if() {
            sites.push(path.to_vec());
        }
    });
    let path = sites.choose(rng).expect("formula has an IF").clone();
    let node = e.get(&path).expect("valid path").as_if().expect("IF");
    let junk = Expr::text(format!("dead{}", rng.gen_range(0..1000)));
    let wrap_else = node.otherwise.is_some() && rng.gen_bool(0.5);
    let same = same_condition(node.cond, rng.gen());
    let comp = complement_condition(node.cond, rng.gen());
    let positive = rng.gen_bool(0.5);
    let (slot, branch) = if wrap_else {
        (2, node.otherwise.expect("checked"))
    } else {
        (1, node.then)
    };
    // On the then-branch the condition is known true; on the else-branch false.
    let keep_first = positive != wrap_else;
    let cond = if positive { same } else { comp };
    let wrapped = if keep_first {
        Expr::if_(cond, branch.clone(), Some(junk))
    } else {
        Expr::if_(cond, junk, Some(branch.clone()))
    };
    let mut out = e.clone();
    let mut target = path;
    target.push(slot);
    out.replace_at(&target, wrapped);
    out
}

fn check(spec: &GenerateSpec) -> Result<(), GenerateError> {
    if spec.min_depth < 2 || spec.min_depth > spec.max_depth {
        return Err(GenerateError::DepthRange(spec.min_depth, spec.max_depth));
    }
    if !(0.0..=1.0).contains(&spec.redundancy_fraction) {
        return Err(GenerateError::Fraction(spec.redundancy_fraction));
    }
    Ok(())
}

/// Generates the corpus described by `spec`: templates in pattern order,
/// then the controls. The same spec always yields the same formulas.
pub fn generate(spec: &GenerateSpec) -> Result<Vec<GeneratedFormula>, GenerateError> {
    check(spec)?;
    let mut out = Vec::new();
    let mut index = 0u64;
    let mut template_index = 0usize;
    for (&pattern, &count) in &spec.per_pattern {
        for _ in 0..count {
            let mut g = Gen::new(item_seed(spec.seed, index));
            index += 1;
            let f = spec.redundancy_fraction;
            let i = template_index as f64;
            template_index += 1;
            let inject = pattern == PatternId::Redun || ((i + 1.0) * f).floor() > (i * f).floor();
            let top = if inject && spec.max_depth > spec.min_depth {
                spec.max_depth - 1
            } else {
                spec.max_depth
            };
            let depth = g.rng.gen_range(spec.min_depth..=top);
            let base = g.template(pattern, depth);
            let (e, base) = if inject {
                let injected = inject_redundancy(&base, &mut g.rng);
                (injected, Some(print(&base)))
            } else {
                (base, None)
            };
            out.push(GeneratedFormula {
                formula: print(&e),
                kind: GeneratedKind::Pattern(pattern),
                depth: if_depth(&e),
                base,
            });
        }
    }
    for c in 0..spec.controls {
        let mut g = Gen::new(item_seed(spec.seed, index));
        index += 1;
        let e = g.control(c);
        out.push(GeneratedFormula {
            formula: print(&e),
            kind: GeneratedKind::Control,
            depth: if_depth(&e),
            base: None,
        });
    }
    Ok(out)
}

/// Templates of one pattern with a dominated IF injected, paired with the
/// template itself.
pub fn injected_pairs(count: usize, seed: u64) -> Vec<(Expr, Expr)> {
    let patterns: Vec<PatternId> = PatternId::ALL.into_iter().filter(|p| *p != PatternId::Redun).collect();
    (0..count)
        .map(|i| {
            let mut g = Gen::new(item_seed(seed, i as u64));
            let depth = g.rng.gen_range(2..=11);
            let base = g.template(patterns[i % patterns.len()], depth);
            let injected = inject_redundancy(&base, &mut g.rng);
            (base, injected)
        })
        .collect()
}

const FUZZ_CELLS: &[&str] = &["A1", "A2", "B1", "B2", "C1", "C3", "D4"];

struct Fuzz<'r, R: Rng> {
    rng: &'r mut R,
    ifs_left: usize,
}

impl<R: Rng> Fuzz<'_, R> {
    fn cell(&mut self) -> Expr {
        Expr::Cell(FUZZ_CELLS.choose(self.rng).expect("non-empty").parse().expect("valid"))
    }

    fn leaf(&mut self) -> Expr {
        match self.rng.gen_range(0..10) {
            0..=3 => self.cell(),
            4 | 5 => Expr::number(self.rng.gen_range(-2..6) as f64),
            6 => Expr::number(self.rng.gen_range(-20..20) as f64 / 4.0),
            7 => Expr::text(["a", "b", "", "x\"y"][self.rng.gen_range(0..4)]),
            8 => Expr::Bool(self.rng.gen()),
            _ => Expr::Range("A1".parse().expect("valid"), "B2".parse().expect("valid")),
        }
    }

    fn cond(&mut self, depth: usize) -> Expr {
        match self.rng.gen_range(0..6) {
            0 => self.cell(),
            1 => Expr::call("NOT", vec![self.cell()]),
            2 => self.node(depth + 1),
            _ => {
                let ops = [BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge];
                let op = *ops.choose(self.rng).expect("non-empty");
                let (l, r) = if self.rng.gen_bool(0.7) {
                    (self.cell(), self.leaf())
                } else {
                    (self.leaf(), self.cell())
                };
                Expr::binary(op, l, r)
            }
        }
    }

    fn node(&mut self, depth: usize) -> Expr {
        if depth > 7 {
            return self.leaf();
        }
        let roll = self.rng.gen_range(0..100);
        if roll < 45 && self.ifs_left > 0 {
            self.ifs_left -= 1;
            let c = self.cond(depth);
            let t = self.node(depth + 1);
            let e = if self.rng.gen_bool(0.75) {
                Some(self.node(depth + 1))
            } else {
                None
            };
            return Expr::if_(c, t, e);
        }
        match roll {
            0..=69 => self.leaf(),
            70..=77 => {
                let ops = [
                    BinOp::Add,
                    BinOp::Sub,
                    BinOp::Mul,
                    BinOp::Div,
                    BinOp::Pow,
                    BinOp::Concat,
                    BinOp::Eq,
                    BinOp::Gt,
                ];
                let op = *ops.choose(self.rng).expect("non-empty");
                Expr::binary(op, self.node(depth + 1), self.node(depth + 1))
            }
            78..=80 => Expr::unary(UnOp::Neg, self.node(depth + 1)),
            _ => {
                let names = [
                    "AND", "OR", "NOT", "MAX", "MIN", "SUM", "CHOOSE", "IFS", "MATCH", "VLOOKUP", "ROUND",
                ];
                let name = *names.choose(self.rng).expect("non-empty");
                let args = match name {
                    "NOT" => vec![self.node(depth + 1)],
                    "IFS" => (0..2 * self.rng.gen_range(1..3))
                        .map(|_| self.node(depth + 1))
                        .collect(),
                    "MATCH" => vec![
                        self.node(depth + 1),
                        Expr::Array(vec![Expr::text("a"), Expr::number(1.0)]),
                        Expr::number(0.0),
                    ],
                    "VLOOKUP" => vec![
                        self.node(depth + 1),
                        Expr::Range("A1".parse().expect("valid"), "B4".parse().expect("valid")),
                        Expr::number(2.0),
                        Expr::Bool(false),
                    ],
                    _ => (0..self.rng.gen_range(1..4)).map(|_| self.node(depth + 1)).collect(),
                };
                Expr::call(name, args)
            }
        }
    }
}

/// A random formula over a small pool of cells and literals with at most
/// `max_ifs` IF nodes. The small pools make repeated conditions, and with
/// them redundancy and patterns, common.
pub fn fuzz_formula(rng: &mut impl Rng, max_ifs: usize) -> Expr {
    let mut f = Fuzz { rng, ifs_left: max_ifs };
    f.node(0)
}
