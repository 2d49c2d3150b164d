//! Recognition of fragmented semantics in IF chains and their reassembly
//! into built-in functions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{extract_if_chains, same_value_expr, ChainDirection, IfChain};
use crate::ast::{BinOp, CellAddr, Expr, Path, MAX_COLUMN};
use crate::eval::eval_unchecked;
use crate::value::{Environment, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PatternId {
    Redun,
    And,
    Or,
    Choose,
    Match,
    Lookup,
    Maxmin,
    Useless,
    Ifs,
}

impl PatternId {
    pub const ALL: [PatternId; 9] = [
        PatternId::Redun,
        PatternId::And,
        PatternId::Or,
        PatternId::Choose,
        PatternId::Match,
        PatternId::Lookup,
        PatternId::Maxmin,
        PatternId::Useless,
        PatternId::Ifs,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PatternId::Redun => "REDUN",
            PatternId::And => "AND",
            PatternId::Or => "OR",
            PatternId::Choose => "CHOOSE",
            PatternId::Match => "MATCH",
            PatternId::Lookup => "LOOKUP",
            PatternId::Maxmin => "MAXMIN",
            PatternId::Useless => "USELESS",
            PatternId::Ifs => "IFS",
        }
    }
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown pattern {0:?}")]
pub struct UnknownPattern(pub String);

impl FromStr for PatternId {
    type Err = UnknownPattern;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        PatternId::ALL
            .into_iter()
            .find(|p| p.name() == up)
            .ok_or_else(|| UnknownPattern(s.to_string()))
    }
}

/// A subset of patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatternSet(u16);

impl PatternSet {
    pub fn all() -> Self {
        PatternSet((1 << PatternId::ALL.len()) - 1)
    }

    pub fn empty() -> Self {
        PatternSet(0)
    }

    pub fn contains(self, p: PatternId) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn with(self, p: PatternId) -> Self {
        PatternSet(self.0 | (1 << p.index()))
    }

    pub fn without(self, p: PatternId) -> Self {
        PatternSet(self.0 & !(1 << p.index()))
    }

    pub fn iter(self) -> impl Iterator<Item = PatternId> {
        PatternId::ALL.into_iter().filter(move |p| self.contains(*p))
    }
}

impl Default for PatternSet {
    fn default() -> Self {
        Self::all()
    }
}

impl FromIterator<PatternId> for PatternSet {
    fn from_iter<I: IntoIterator<Item = PatternId>>(iter: I) -> Self {
        iter.into_iter().fold(PatternSet::empty(), PatternSet::with)
    }
}

/// Comma-separated pattern names.
impl FromStr for PatternSet {
    type Err = UnknownPattern;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(PatternId::from_str)
            .collect()
    }
}

/// How an omitted final else is carried into IFS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Drop it, as in the published rewrite table.
    #[default]
    Paper,
    /// Append `TRUE,FALSE` so the result stays value-equivalent.
    Strict,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Mode::Paper),
            "strict" => Ok(Mode::Strict),
            _ => Err(format!("unknown mode {s:?} (expected paper or strict)")),
        }
    }
}

/// Why a rewrite is only equivalent on part of the input space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Caveat {
    /// Differs where the original falls through an omitted else.
    OutOfDomainDivergence,
    /// Differs where a condition that the original would skip raises an error.
    EvaluationOrderDivergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Vertical,
    Horizontal,
}

/// Cells a rewrite needs written into the sheet: key/value pairs laid out in
/// two adjacent columns (or rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub range: (CellAddr, CellAddr),
    pub orientation: Orientation,
    pub cells: BTreeMap<CellAddr, Value>,
}

impl TableSpec {
    pub fn write_into(&self, env: &mut Environment) {
        for (addr, v) in &self.cells {
            env.set(*addr, v.clone());
        }
    }

    pub fn last_column(&self) -> u32 {
        self.range.0.column.max(self.range.1.column)
    }
}

/// Parallel condition / true-branch / false-branch lists of an IF chain.
/// Omitted false branches appear as `FALSE` and are flagged in `omitted_else`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreePartList {
    pub direction: ChainDirection,
    pub conditions: Vec<Expr>,
    pub true_branches: Vec<Expr>,
    pub false_branches: Vec<Expr>,
    pub omitted_else: Vec<bool>,
}

impl ThreePartList {
    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    /// Sub-list for the IF nodes `start..=end`.
    pub fn window(&self, start: usize, end: usize) -> ThreePartList {
        ThreePartList {
            direction: self.direction,
            conditions: self.conditions[start..=end].to_vec(),
            true_branches: self.true_branches[start..=end].to_vec(),
            false_branches: self.false_branches[start..=end].to_vec(),
            omitted_else: self.omitted_else[start..=end].to_vec(),
        }
    }

    fn last(&self) -> usize {
        self.len() - 1
    }

    fn else_of(&self, i: usize) -> Option<Expr> {
        (!self.omitted_else[i]).then(|| self.false_branches[i].clone())
    }
}

pub fn build_three_part_list(chain: &IfChain<'_>) -> ThreePartList {
    let mut tpl = ThreePartList {
        direction: chain.direction,
        conditions: Vec::with_capacity(chain.len()),
        true_branches: Vec::with_capacity(chain.len()),
        false_branches: Vec::with_capacity(chain.len()),
        omitted_else: Vec::with_capacity(chain.len()),
    };
    for node in &chain.nodes {
        let parts = node.as_if().expect("chain nodes are IF calls");
        tpl.conditions.push(parts.cond.clone());
        tpl.true_branches.push(parts.then.clone());
        tpl.false_branches.push(parts.otherwise_or_false());
        tpl.omitted_else.push(parts.otherwise.is_none());
    }
    tpl
}

/// A recognized pattern and the expression replacing the matched node.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub pattern: PatternId,
    pub replacement: Expr,
    pub caveat: Option<Caveat>,
    pub tables: Vec<TableSpec>,
}

impl MatchOutcome {
    fn new(pattern: PatternId, replacement: Expr, caveat: Option<Caveat>) -> Self {
        MatchOutcome {
            pattern,
            replacement,
            caveat,
            tables: Vec::new(),
        }
    }
}

pub fn match_and(tpl: &ThreePartList) -> Option<MatchOutcome> {
    if tpl.direction != ChainDirection::TrueBranch || tpl.len() < 2 {
        return None;
    }
    let shared = &tpl.false_branches[0];
    if !tpl.false_branches.iter().all(|f| same_value_expr(f, shared)) {
        return None;
    }
    let otherwise = (0..tpl.len()).find_map(|i| tpl.else_of(i));
    let cond = Expr::call("AND", tpl.conditions.clone());
    Some(MatchOutcome::new(
        PatternId::And,
        Expr::if_(cond, tpl.true_branches[tpl.last()].clone(), otherwise),
        Some(Caveat::EvaluationOrderDivergence),
    ))
}

pub fn match_or(tpl: &ThreePartList) -> Option<MatchOutcome> {
    if tpl.direction != ChainDirection::FalseBranch || tpl.len() < 2 {
        return None;
    }
    let shared = &tpl.true_branches[0];
    if !tpl.true_branches.iter().all(|t| same_value_expr(t, shared)) {
        return None;
    }
    let cond = Expr::call("OR", tpl.conditions.clone());
    Some(MatchOutcome::new(
        PatternId::Or,
        Expr::if_(cond, shared.clone(), tpl.else_of(tpl.last())),
        Some(Caveat::EvaluationOrderDivergence),
    ))
}

fn eq_sides(c: &Expr) -> Option<(&Expr, &Expr)> {
    match c {
        Expr::Binary {
            op: BinOp::Eq,
            lhs,
            rhs,
        } => Some((lhs, rhs)),
        _ => None,
    }
}

/// Splits every condition `x = k_i` into the common subject `x` and the keys.
fn keyed_chain(tpl: &ThreePartList, key_ok: impl Fn(&Expr) -> bool) -> Option<(Expr, Vec<Expr>)> {
    let (l0, r0) = eq_sides(&tpl.conditions[0])?;
    'subject: for subject in [l0, r0] {
        if subject.is_literal() {
            continue;
        }
        let mut keys = Vec::with_capacity(tpl.len());
        for c in &tpl.conditions {
            let (l, r) = eq_sides(c)?;
            let key = if l == subject {
                r
            } else if r == subject {
                l
            } else {
                continue 'subject;
            };
            if key == subject || !key_ok(key) {
                continue 'subject;
            }
            keys.push(key.clone());
        }
        return Some((subject.clone(), keys));
    }
    None
}

fn lookup_chain_ok(tpl: &ThreePartList) -> bool {
    tpl.direction == ChainDirection::FalseBranch && tpl.len() >= 2 && tpl.omitted_else[tpl.last()]
}

const MAX_PROGRESSION: f64 = 1e9;

/// First term and step of an integer arithmetic progression with a nonzero step.
fn progression(values: &[f64]) -> Option<(i64, i64)> {
    if values.len() < 2 || values.iter().any(|v| v.fract() != 0.0 || v.abs() > MAX_PROGRESSION) {
        return None;
    }
    let a = values[0] as i64;
    let d = values[1] as i64 - a;
    if d == 0 {
        return None;
    }
    values
        .iter()
        .enumerate()
        .all(|(i, v)| *v as i64 == a + i as i64 * d)
        .then_some((a, d))
}

/// `e + k` written without a negative literal on the right.
fn add_offset(e: Expr, k: i64) -> Expr {
    match k.cmp(&0) {
        std::cmp::Ordering::Equal => e,
        std::cmp::Ordering::Greater => Expr::binary(BinOp::Add, e, Expr::number(k as f64)),
        std::cmp::Ordering::Less => Expr::binary(BinOp::Sub, e, Expr::number(-(k as f64))),
    }
}

pub fn match_choose(tpl: &ThreePartList) -> Option<MatchOutcome> {
    if !lookup_chain_ok(tpl) || !tpl.true_branches.iter().all(|t| matches!(t, Expr::Text(_))) {
        return None;
    }
    let (subject, keys) = keyed_chain(tpl, |k| k.as_number().is_some())?;
    let nums: Vec<f64> = keys.iter().map(|k| k.as_number().expect("numeric key")).collect();
    let (a, d) = progression(&nums)?;
    // position i (1-based) holds a + (i-1)d, so i = (x - (a - d)) / d
    let mut index = add_offset(subject, -(a - d));
    if d != 1 {
        index = Expr::binary(BinOp::Div, index, Expr::number(d as f64));
    }
    let mut args = vec![index];
    args.extend(tpl.true_branches.iter().cloned());
    Some(MatchOutcome::new(
        PatternId::Choose,
        Expr::call("CHOOSE", args),
        Some(Caveat::OutOfDomainDivergence),
    ))
}

pub fn match_match(tpl: &ThreePartList) -> Option<MatchOutcome> {
    if !lookup_chain_ok(tpl) {
        return None;
    }
    let nums: Vec<f64> = tpl.true_branches.iter().map(Expr::as_number).collect::<Option<_>>()?;
    let (a, d) = progression(&nums)?;
    let (subject, keys) = keyed_chain(tpl, |k| matches!(k, Expr::Text(_)))?;
    let mut e = Expr::call("MATCH", vec![subject, Expr::Array(keys), Expr::number(0.0)]);
    if d != 1 {
        e = Expr::binary(BinOp::Mul, Expr::number(d as f64), e);
    }
    Some(MatchOutcome::new(
        PatternId::Match,
        add_offset(e, a - d),
        Some(Caveat::OutOfDomainDivergence),
    ))
}

/// Placement context for synthesized lookup tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableContext {
    /// First column free for new tables.
    pub first_free_column: u32,
}

impl TableContext {
    /// Places tables to the right of every column referenced by `formulas`
    /// and of the `existing` tables.
    pub fn after<'a>(formulas: &[&Expr], existing: impl IntoIterator<Item = &'a TableSpec>) -> Self {
        let refs = formulas.iter().flat_map(|f| f.referenced_cells()).map(|c| c.column);
        let tables = existing.into_iter().map(TableSpec::last_column);
        TableContext {
            first_free_column: refs.chain(tables).max().unwrap_or(0) + 1,
        }
    }
}

fn cells(keys: &[Expr]) -> Option<Vec<CellAddr>> {
    keys.iter()
        .map(|k| match k {
            Expr::Cell(c) => Some(*c),
            _ => None,
        })
        .collect()
}

type Axis = fn(&CellAddr) -> u32;

/// Direct lookup: keys form a contiguous run in one column (row) and the
/// results sit at a fixed offset along the other axis.
fn direct_lookup(tpl: &ThreePartList) -> Option<MatchOutcome> {
    let (subject, keys) = keyed_chain(tpl, |k| matches!(k, Expr::Cell(_)))?;
    let keys = cells(&keys)?;
    let values = cells(&tpl.true_branches)?;
    let vertical = keys.iter().all(|k| k.column == keys[0].column);
    let horizontal = keys.iter().all(|k| k.row == keys[0].row);
    let (along, across): (Axis, Axis) = if vertical {
        (|c| c.row, |c| c.column)
    } else if horizontal {
        (|c| c.column, |c| c.row)
    } else {
        return None;
    };
    let contiguous = keys.windows(2).all(|w| along(&w[1]) == along(&w[0]) + 1);
    let offset = across(&values[0]).checked_sub(across(&keys[0])).filter(|o| *o >= 1)?;
    let parallel = keys
        .iter()
        .zip(&values)
        .all(|(k, v)| along(v) == along(k) && across(v) == across(k) + offset);
    if !contiguous || !parallel {
        return None;
    }
    let range = Expr::Range(keys[0], *values.last().expect("non-empty"));
    let name = if vertical { "VLOOKUP" } else { "HLOOKUP" };
    Some(MatchOutcome::new(
        PatternId::Lookup,
        Expr::call(
            name,
            vec![subject, range, Expr::number(offset as f64 + 1.0), Expr::Bool(false)],
        ),
        Some(Caveat::OutOfDomainDivergence),
    ))
}

/// Synthesized lookup: literal keys and results go into a new two-column table.
fn synthesized_lookup(tpl: &ThreePartList, ctx: &TableContext) -> Option<MatchOutcome> {
    if !tpl.true_branches.iter().all(Expr::is_literal) {
        return None;
    }
    let (subject, keys) = keyed_chain(tpl, Expr::is_literal)?;
    let col = ctx.first_free_column;
    if col == 0 || col + 1 > MAX_COLUMN {
        return None;
    }
    let literal = |e: &Expr| eval_unchecked(e, &Environment::new()).value;
    let mut table = BTreeMap::new();
    for (i, (k, v)) in keys.iter().zip(&tpl.true_branches).enumerate() {
        let row = i as u32 + 1;
        table.insert(CellAddr::new(col, row), literal(k));
        table.insert(CellAddr::new(col + 1, row), literal(v));
    }
    let range = (CellAddr::new(col, 1), CellAddr::new(col + 1, keys.len() as u32));
    let mut outcome = MatchOutcome::new(
        PatternId::Lookup,
        Expr::call(
            "VLOOKUP",
            vec![
                subject,
                Expr::Range(range.0, range.1),
                Expr::number(2.0),
                Expr::Bool(false),
            ],
        ),
        Some(Caveat::OutOfDomainDivergence),
    );
    outcome.tables.push(TableSpec {
        range,
        orientation: Orientation::Vertical,
        cells: table,
    });
    Some(outcome)
}

pub fn match_lookup(tpl: &ThreePartList, ctx: &TableContext) -> Option<MatchOutcome> {
    if !lookup_chain_ok(tpl) {
        return None;
    }
    direct_lookup(tpl).or_else(|| synthesized_lookup(tpl, ctx))
}

/// Operands whose value is always a number (or an error), so that MAX/MIN
/// agree with the comparison they replace.
fn numeric_shaped(e: &Expr) -> bool {
    match e {
        Expr::Cell(_) | Expr::Number(_) => true,
        Expr::Unary { operand, .. } => numeric_shaped(operand),
        Expr::Binary { op, .. } => op.is_arithmetic(),
        Expr::Call { name, .. } => matches!(name.as_str(), "MAX" | "MIN" | "SUM" | "MATCH"),
        _ => false,
    }
}

pub fn match_maxmin(node: &Expr) -> Option<MatchOutcome> {
    let parts = node.as_if()?;
    let otherwise = parts.otherwise?;
    let Expr::Binary { op, lhs, rhs } = parts.cond else {
        return None;
    };
    let (a, b) = (lhs.as_ref(), rhs.as_ref());
    if a == b || !numeric_shaped(a) || !numeric_shaped(b) {
        return None;
    }
    let picks_lhs = if parts.then == a && otherwise == b {
        true
    } else if parts.then == b && otherwise == a {
        false
    } else {
        return None;
    };
    let max = match op {
        BinOp::Gt | BinOp::Ge => picks_lhs,
        BinOp::Lt | BinOp::Le => !picks_lhs,
        _ => return None,
    };
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    // Reordered operands can report a different error when both sides fail.
    let caveat = (x != a).then_some(Caveat::EvaluationOrderDivergence);
    Some(MatchOutcome::new(
        PatternId::Maxmin,
        Expr::call(if max { "MAX" } else { "MIN" }, vec![x.clone(), y.clone()]),
        caveat,
    ))
}

pub fn match_useless(node: &Expr) -> Option<MatchOutcome> {
    let parts = node.as_if()?;
    let otherwise = parts.otherwise?;
    let pick = |e: &Expr| {
        Some(MatchOutcome::new(
            PatternId::Useless,
            e.clone(),
            Some(Caveat::EvaluationOrderDivergence),
        ))
    };
    if same_value_expr(parts.then, otherwise) {
        return pick(parts.then);
    }
    let Expr::Binary {
        op: op @ (BinOp::Eq | BinOp::Ne),
        lhs,
        rhs,
    } = parts.cond
    else {
        return None;
    };
    let straight = parts.then == lhs.as_ref() && otherwise == rhs.as_ref();
    let crossed = parts.then == rhs.as_ref() && otherwise == lhs.as_ref();
    if !straight && !crossed {
        return None;
    }
    // IF(a=b,a,b) and IF(a=b,b,a) always yield the else branch (up to `=`);
    // with `<>` they always yield the then branch.
    match op {
        BinOp::Eq => pick(otherwise),
        _ => pick(parts.then),
    }
}

pub fn match_ifs(tpl: &ThreePartList, mode: Mode) -> Option<MatchOutcome> {
    if tpl.direction != ChainDirection::FalseBranch || tpl.len() < 2 {
        return None;
    }
    let mut args = Vec::with_capacity(2 * tpl.len() + 2);
    for (c, t) in tpl.conditions.iter().zip(&tpl.true_branches) {
        args.push(c.clone());
        args.push(t.clone());
    }
    let mut caveat = None;
    match (tpl.else_of(tpl.last()), mode) {
        (Some(e), _) => args.extend([Expr::Bool(true), e]),
        (None, Mode::Strict) => args.extend([Expr::Bool(true), Expr::Bool(false)]),
        (None, Mode::Paper) => caveat = Some(Caveat::OutOfDomainDivergence),
    }
    Some(MatchOutcome::new(PatternId::Ifs, Expr::call("IFS", args), caveat))
}

/// Options for one reassembly probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeOptions {
    pub mode: Mode,
    pub enabled: PatternSet,
    pub tables: TableContext,
}

/// A rewrite applied at `site`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reassembly {
    pub pattern: PatternId,
    pub site: Path,
    pub expr: Expr,
    pub caveat: Option<Caveat>,
    pub tables: Vec<TableSpec>,
}

/// Longest window of at least two nodes accepted by `f`; ties go outermost.
fn best_window(
    tpl: &ThreePartList,
    f: impl Fn(&ThreePartList) -> Option<MatchOutcome>,
) -> Option<(usize, MatchOutcome)> {
    let n = tpl.len();
    for len in (2..=n).rev() {
        for start in 0..=n - len {
            if let Some(o) = f(&tpl.window(start, start + len - 1)) {
                return Some((start, o));
            }
        }
    }
    None
}

/// Longest suffix window of at least two nodes accepted by `f`.
fn best_suffix(
    tpl: &ThreePartList,
    f: impl Fn(&ThreePartList) -> Option<MatchOutcome>,
) -> Option<(usize, MatchOutcome)> {
    let n = tpl.len();
    (0..n.saturating_sub(1)).find_map(|start| f(&tpl.window(start, n - 1)).map(|o| (start, o)))
}

fn probe(
    pattern: PatternId,
    e: &Expr,
    chains: &[(IfChain<'_>, ThreePartList)],
    opts: &ProbeOptions,
) -> Option<(Path, MatchOutcome)> {
    let over_chains = |dir: ChainDirection, pick: &dyn Fn(&ThreePartList) -> Option<(usize, MatchOutcome)>| {
        chains
            .iter()
            .filter(|(c, _)| c.direction == dir && c.len() >= 2)
            .find_map(|(c, tpl)| pick(tpl).map(|(start, o)| (c.path_of(start), o)))
    };
    let over_nodes = |f: fn(&Expr) -> Option<MatchOutcome>| {
        let mut found = None;
        e.walk(&mut |n, path| {
            if found.is_none() && n.is_if() {
                found = f(n).map(|o| (path.to_vec(), o));
            }
        });
        found
    };
    match pattern {
        PatternId::Redun => None,
        PatternId::And => over_chains(ChainDirection::TrueBranch, &|t| best_window(t, match_and)),
        PatternId::Or => over_chains(ChainDirection::FalseBranch, &|t| best_window(t, match_or)),
        PatternId::Choose => over_chains(ChainDirection::FalseBranch, &|t| best_suffix(t, match_choose)),
        PatternId::Match => over_chains(ChainDirection::FalseBranch, &|t| best_suffix(t, match_match)),
        PatternId::Lookup => over_chains(ChainDirection::FalseBranch, &|t| {
            best_suffix(t, |w| match_lookup(w, &opts.tables))
        }),
        PatternId::Maxmin => over_nodes(match_maxmin),
        PatternId::Useless => over_nodes(match_useless),
        PatternId::Ifs => over_chains(ChainDirection::FalseBranch, &|t| {
            match_ifs(t, opts.mode).map(|o| (0, o))
        }),
    }
}

/// Probing order after redundancy removal.
pub const PROBE_ORDER: [PatternId; 8] = [
    PatternId::And,
    PatternId::Or,
    PatternId::Choose,
    PatternId::Match,
    PatternId::Lookup,
    PatternId::Maxmin,
    PatternId::Useless,
    PatternId::Ifs,
];

/// Applies the first pattern (in [`PROBE_ORDER`]) that matches anywhere in
/// `e`, at its outermost site.
pub fn reassemble_once(e: &Expr, opts: &ProbeOptions) -> Option<Reassembly> {
    let mut chains = Vec::new();
    for dir in [ChainDirection::TrueBranch, ChainDirection::FalseBranch] {
        for c in extract_if_chains(e, dir) {
            let tpl = build_three_part_list(&c);
            chains.push((c, tpl));
        }
    }
    for pattern in PROBE_ORDER {
        if !opts.enabled.contains(pattern) {
            continue;
        }
        if let Some((site, outcome)) = probe(pattern, e, &chains, opts) {
            let mut expr = e.clone();
            let ok = expr.replace_at(&site, outcome.replacement);
            debug_assert!(ok);
            return Some(Reassembly {
                pattern,
                site,
                expr,
                caveat: outcome.caveat,
                tables: outcome.tables,
            });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse, print};

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn tpl(src: &str, dir: ChainDirection) -> ThreePartList {
        let e = p(src);
        let chains = extract_if_chains(&e, dir);
        build_three_part_list(&chains[0])
    }

    fn once(src: &str, mode: Mode) -> Option<(PatternId, String)> {
        let e = p(src);
        let opts = ProbeOptions {
            mode,
            enabled: PatternSet::all(),
            tables: TableContext::after(&[&e], []),
        };
        reassemble_once(&e, &opts).map(|r| (r.pattern, print(&r.expr)))
    }

    fn strs(v: &[Expr]) -> Vec<String> {
        v.iter().map(print).collect()
    }

    #[test]
    fn three_part_lists() {
        let t = tpl("IF(C1,IF(C2,IF(C3,V1,V2),V2),V2)", ChainDirection::TrueBranch);
        assert_eq!(strs(&t.conditions), ["C1", "C2", "C3"]);
        assert_eq!(strs(&t.false_branches), ["V2", "V2", "V2"]);
        let t = tpl("IF(C1,V1,V2)", ChainDirection::FalseBranch);
        assert_eq!(t.len(), 1);
        let t = tpl("IF(C1,V1,IF(C2,V2,V3))", ChainDirection::FalseBranch);
        assert_eq!(strs(&t.conditions), ["C1", "C2"]);
        assert_eq!(strs(&t.true_branches), ["V1", "V2"]);
        assert_eq!(strs(&t.false_branches), ["IF(C2,V2,V3)", "V3"]);
    }

    #[test]
    fn and_or() {
        assert_eq!(
            once("IF(C1,IF(C2,IF(C3,V1,V2),V2),V2)", Mode::Paper),
            Some((PatternId::And, "IF(AND(C1,C2,C3),V1,V2)".into()))
        );
        assert_eq!(
            once("IF(C1,V1,IF(C2,V1,IF(C3,V1,V2)))", Mode::Paper),
            Some((PatternId::Or, "IF(OR(C1,C2,C3),V1,V2)".into()))
        );
        let t = tpl("IF(C1,V1,IF(C2,V2,V3))", ChainDirection::FalseBranch);
        assert!(match_or(&t).is_none());
        let t = tpl("IF(C1,IF(C2,V2,V3),V1)", ChainDirection::TrueBranch);
        assert!(match_and(&t).is_none());
    }

    #[test]
    fn and_takes_longest_window() {
        assert_eq!(
            once("IF(C1,IF(C2,IF(C3,V1,V2),V2),V9)", Mode::Paper),
            Some((PatternId::And, "IF(C1,IF(AND(C2,C3),V1,V2),V9)".into()))
        );
    }

    #[test]
    fn choose() {
        assert_eq!(
            once("IF(A1=1,\"s1\",IF(A1=2,\"s2\",IF(A1=3,\"s3\")))", Mode::Paper),
            Some((PatternId::Choose, "CHOOSE(A1,\"s1\",\"s2\",\"s3\")".into()))
        );
        assert_eq!(
            once(
                "IF(A1=2,\"s1\",IF(A1=4,\"s2\",IF(A1=6,\"s3\",IF(A1=8,\"s4\"))))",
                Mode::Paper
            ),
            Some((PatternId::Choose, "CHOOSE(A1/2,\"s1\",\"s2\",\"s3\",\"s4\")".into()))
        );
        assert_eq!(
            once("IF(A1=5,\"a\",IF(A1=8,\"b\",IF(A1=11,\"c\")))", Mode::Paper)
                .unwrap()
                .1,
            "CHOOSE((A1-2)/3,\"a\",\"b\",\"c\")"
        );
        assert_eq!(
            once("IF(A1=0,\"a\",IF(A1=1,\"b\"))", Mode::Paper).unwrap().1,
            "CHOOSE(A1+1,\"a\",\"b\")"
        );
        let t = tpl(
            "IF(A1=1,\"a\",IF(A1=2,\"b\",IF(A1=4,\"c\")))",
            ChainDirection::FalseBranch,
        );
        assert!(match_choose(&t).is_none());
    }

    #[test]
    fn match_pattern() {
        assert_eq!(
            once(
                "IF(A1=\"s1\",1,IF(A1=\"s2\",2,IF(A1=\"s3\",3,IF(A1=\"s4\",4))))",
                Mode::Paper
            ),
            Some((PatternId::Match, "MATCH(A1,{\"s1\",\"s2\",\"s3\",\"s4\"},0)".into()))
        );
        assert_eq!(
            once(
                "IF(A1=\"a\",2,IF(A1=\"b\",4,IF(A1=\"c\",6,IF(A1=\"d\",8))))",
                Mode::Paper
            )
            .unwrap()
            .1,
            "2*MATCH(A1,{\"a\",\"b\",\"c\",\"d\"},0)"
        );
        assert_eq!(
            once("IF(A1=\"a\",5,IF(A1=\"b\",7))", Mode::Paper).unwrap().1,
            "2*MATCH(A1,{\"a\",\"b\"},0)+3"
        );
        let t = tpl(
            "IF(A1=\"a\",1,IF(A1=\"b\",2,IF(A1=\"c\",2)))",
            ChainDirection::FalseBranch,
        );
        assert!(match_match(&t).is_none());
    }

    #[test]
    fn lookup_direct_and_synthesized() {
        assert_eq!(
            once("IF(A1=C1,D1,IF(A1=C2,D2,IF(A1=C3,D3,IF(A1=C4,D4))))", Mode::Paper),
            Some((PatternId::Lookup, "VLOOKUP(A1,C1:D4,2,FALSE)".into()))
        );
        assert_eq!(
            once("IF(A1=C1,C3,IF(A1=D1,D3))", Mode::Paper).unwrap().1,
            "HLOOKUP(A1,C1:D3,3,FALSE)"
        );
        let e = p("IF(A1=\"k1\",\"v1\",IF(A1=\"k2\",\"v2\",IF(A1=\"k3\",\"v3\",IF(A1=\"k4\",\"v4\"))))");
        let opts = ProbeOptions {
            mode: Mode::Paper,
            enabled: PatternSet::all(),
            tables: TableContext::after(&[&e], []),
        };
        let r = reassemble_once(&e, &opts).unwrap();
        assert_eq!(r.pattern, PatternId::Lookup);
        assert_eq!(print(&r.expr), "VLOOKUP(A1,B1:C4,2,FALSE)");
        assert_eq!(r.tables.len(), 1);
        assert_eq!(r.tables[0].cells.len(), 8);
        assert_eq!(r.tables[0].cells[&"C3".parse().unwrap()], Value::text("v3"));
        let t = tpl("IF(A1=C1,D1,IF(A1=C3,D3,IF(A1=C4,D4)))", ChainDirection::FalseBranch);
        assert!(direct_lookup(&t).is_none());
    }

    #[test]
    fn maxmin() {
        let m = |s: &str| match_maxmin(&p(s)).map(|o| print(&o.replacement));
        assert_eq!(m("IF(A1>B1,A1,B1)").as_deref(), Some("MAX(A1,B1)"));
        assert_eq!(m("IF(B1>=A1,A1,B1)").as_deref(), Some("MIN(A1,B1)"));
        assert_eq!(m("IF(A1>B1,B1,A1)").as_deref(), Some("MIN(A1,B1)"));
        assert_eq!(m("IF(A1<B1,B1,A1)").as_deref(), Some("MAX(A1,B1)"));
        assert_eq!(m("IF(A1=B1,A1,B1)"), None);
        assert_eq!(match_maxmin(&p("IF(A1>B1,A1,B1)")).unwrap().caveat, None);
        assert_eq!(
            match_maxmin(&p("IF(B1>=A1,A1,B1)")).unwrap().caveat,
            Some(Caveat::EvaluationOrderDivergence)
        );
        assert_eq!(m("IF(A1>\"x\",A1,\"x\")"), None);
        assert_eq!(
            once("IF(C1,V1,IF(A1>B1,A1,B1))", Mode::Paper),
            Some((PatternId::Maxmin, "IF(C1,V1,MAX(A1,B1))".into()))
        );
    }

    #[test]
    fn useless() {
        let m = |s: &str| match_useless(&p(s)).map(|o| print(&o.replacement));
        assert_eq!(m("IF(A1=B1,A1,B1)").as_deref(), Some("B1"));
        assert_eq!(m("IF(A1=B1,B1,A1)").as_deref(), Some("A1"));
        assert_eq!(m("IF(A1<>B1,A1,B1)").as_deref(), Some("A1"));
        assert_eq!(m("IF(A1<>B1,B1,A1)").as_deref(), Some("B1"));
        assert_eq!(m("IF(M1=\"\",\"\",M1)").as_deref(), Some("M1"));
        assert_eq!(m("IF(C1,V1,V1)").as_deref(), Some("V1"));
        assert_eq!(m("IF(C1,V1,V2)"), None);
    }

    #[test]
    fn ifs_modes() {
        let src = "IF(C1,V1,IF(C2,V2,IF(C3,V3,IF(C4,V4))))";
        assert_eq!(once(src, Mode::Paper).unwrap().1, "IFS(C1,V1,C2,V2,C3,V3,C4,V4)");
        assert_eq!(
            once(src, Mode::Strict).unwrap().1,
            "IFS(C1,V1,C2,V2,C3,V3,C4,V4,TRUE,FALSE)"
        );
        assert_eq!(
            once("IF(Q1=X1,Q1,IF(Q1=\"\",X1,Q1))", Mode::Paper).unwrap().1,
            "IFS(Q1=X1,Q1,Q1=\"\",X1,TRUE,Q1)"
        );
    }

    #[test]
    fn priority_prefers_and_over_ifs() {
        let (pat, _) = once("IF(C1,IF(C2,V1,V2),V2)", Mode::Paper).unwrap();
        assert_eq!(pat, PatternId::And);
    }

    #[test]
    fn nothing_to_do() {
        assert_eq!(once("SUM(A1,B1)", Mode::Paper), None);
        assert_eq!(once("IF(C1,V1,V2)", Mode::Paper), None);
    }

    #[test]
    fn pattern_names_parse() {
        let set: PatternSet = "and, ifs,MaxMin".parse().unwrap();
        assert_eq!(
            set.iter().collect::<Vec<_>>(),
            [PatternId::And, PatternId::Maxmin, PatternId::Ifs]
        );
        assert!("AND,NOPE".parse::<PatternSet>().is_err());
        assert_eq!(serde_json::to_string(&PatternId::Maxmin).unwrap(), "\"MAXMIN\"");
    }
}
