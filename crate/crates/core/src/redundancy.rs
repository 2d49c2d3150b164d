//! Removal of IF conditions whose outcome is fixed by an enclosing IF.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::analysis::{cond_key, CondKey, Polarity};
use crate::ast::{Expr, Path};

pub const DEFAULT_PASS_LIMIT: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RedundancyError {
    #[error("redundancy removal did not settle after {0} passes")]
    IterationLimit(usize),
}

/// Truth values known on the current path, keyed by canonical atom.
#[derive(Debug, Clone, Default)]
pub struct FactSet {
    facts: Vec<(Expr, bool)>,
}

impl FactSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Records that `cond` evaluated to `value`.
    pub fn assume(&mut self, cond: &Expr, value: bool) {
        let (atom, truth) = atom_truth(&cond_key(cond), value);
        debug_assert!(!self.facts.iter().any(|(a, t)| *a == atom && *t != truth));
        self.facts.push((atom, truth));
    }

    fn pop(&mut self) {
        self.facts.pop();
    }

    fn lookup(&self, atom: &Expr) -> Option<bool> {
        self.facts.iter().rev().find(|(a, _)| a == atom).map(|(_, t)| *t)
    }
}

fn atom_truth(key: &CondKey, value: bool) -> (Expr, bool) {
    let truth = match key.polarity {
        Polarity::Positive => value,
        Polarity::Negative => !value,
    };
    (key.canonical.clone(), truth)
}

pub fn implied_truth(cond: &Expr, facts: &FactSet) -> Truth {
    let key = cond_key(cond);
    match facts.lookup(&key.canonical) {
        None => Truth::Unknown,
        Some(t) => {
            if (key.polarity == Polarity::Positive) == t {
                Truth::True
            } else {
                Truth::False
            }
        }
    }
}

/// Rewrites `e` until no IF condition is decided by its ancestors.
/// Returns the rewritten tree and the number of IF nodes replaced.
pub fn remove_redundancy(e: &Expr) -> Result<(Expr, usize), RedundancyError> {
    remove_redundancy_with_limit(e, DEFAULT_PASS_LIMIT)
}

pub fn remove_redundancy_with_limit(e: &Expr, limit: usize) -> Result<(Expr, usize), RedundancyError> {
    let mut cur = e.clone();
    let mut total = 0;
    for _ in 0..limit {
        let mut removed = 0;
        let next = pass(&cur, &mut FactSet::new(), &mut removed);
        if removed == 0 {
            return Ok((cur, total));
        }
        total += removed;
        cur = next;
    }
    Err(RedundancyError::IterationLimit(limit))
}

fn pass(e: &Expr, facts: &mut FactSet, removed: &mut usize) -> Expr {
    if let Some(parts) = e.as_if() {
        // Simplifying the condition can turn it into one the facts decide.
        let cond = match implied_truth(parts.cond, facts) {
            Truth::Unknown => pass(parts.cond, facts, removed),
            _ => parts.cond.clone(),
        };
        match implied_truth(&cond, facts) {
            Truth::True => {
                *removed += 1;
                return pass(parts.then, facts, removed);
            }
            Truth::False => {
                *removed += 1;
                return pass(&parts.otherwise_or_false(), facts, removed);
            }
            Truth::Unknown => {
                facts.assume(&cond, true);
                let then = pass(parts.then, facts, removed);
                facts.pop();
                let otherwise = parts.otherwise.map(|o| {
                    facts.assume(&cond, false);
                    let o = pass(o, facts, removed);
                    facts.pop();
                    o
                });
                return Expr::if_(cond, then, otherwise);
            }
        }
    }
    match e {
        Expr::Call { name, args } => Expr::Call {
            name: name.clone(),
            args: args.iter().map(|a| pass(a, facts, removed)).collect(),
        },
        Expr::Binary { op, lhs, rhs } => Expr::binary(*op, pass(lhs, facts, removed), pass(rhs, facts, removed)),
        Expr::Unary { op, operand } => Expr::unary(*op, pass(operand, facts, removed)),
        Expr::Array(items) => Expr::Array(items.iter().map(|i| pass(i, facts, removed)).collect()),
        other => other.clone(),
    }
}

/// One IF node filed under its condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub path: Path,
    pub true_branch: Expr,
    pub false_branch: Option<Expr>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiteLists {
    pub direct: Vec<Site>,
    pub negated: Vec<Site>,
}

impl SiteLists {
    pub fn len(&self) -> usize {
        self.direct.len() + self.negated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Every IF site of a tree grouped by canonical condition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CondBranchIndex {
    pub entries: BTreeMap<Expr, SiteLists>,
}

impl CondBranchIndex {
    pub fn build(e: &Expr) -> Self {
        let mut index = CondBranchIndex::default();
        e.walk(&mut |n, path| {
            if let Some(parts) = n.as_if() {
                let key = cond_key(parts.cond);
                let site = Site {
                    path: path.to_vec(),
                    true_branch: parts.then.clone(),
                    false_branch: parts.otherwise.cloned(),
                };
                let lists = index.entries.entry(key.canonical).or_default();
                match key.polarity {
                    Polarity::Positive => lists.direct.push(site),
                    Polarity::Negative => lists.negated.push(site),
                }
            }
        });
        index
    }

    pub fn sites(&self, cond: &Expr) -> Option<&SiteLists> {
        self.entries.get(&cond_key(cond).canonical)
    }

    /// Conditions tested at more than one site, the candidates for removal.
    pub fn repeated(&self) -> impl Iterator<Item = (&Expr, &SiteLists)> {
        self.entries.iter().filter(|(_, s)| s.len() > 1)
    }
}
