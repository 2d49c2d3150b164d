//! Per-formula driver: redundancy removal and pattern reassembly to a
//! fixpoint, with optional differential verification of the result.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::if_depth;
use crate::ast::{Expr, Formula};
use crate::eval::{check_supported, EvalError};
use crate::oracle::{verify_equivalence, Counterexample};
use crate::parser::{parse_formula, print, SyntaxError};
use crate::patterns::{reassemble_once, Caveat, Mode, PatternId, PatternSet, ProbeOptions, TableContext, TableSpec};
use crate::redundancy::{remove_redundancy, RedundancyError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EngineConfig {
    pub mode: Mode,
    /// Upper bound on pattern rewrites per formula.
    pub max_iterations: usize,
    #[serde(with = "pattern_set_serde")]
    pub enabled_patterns: PatternSet,
    pub verify: bool,
    pub verify_env_count: usize,
    pub seed: u64,
    /// Re-run redundancy removal after every rewrite, not only before the first.
    pub rerun_redundancy: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::Paper,
            max_iterations: 20,
            enabled_patterns: PatternSet::all(),
            verify: true,
            verify_env_count: 200,
            seed: 0,
            rerun_redundancy: true,
        }
    }
}

mod pattern_set_serde {
    use super::{PatternId, PatternSet};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(set: &PatternSet, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(set.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<PatternSet, D::Error> {
        Ok(Vec::<PatternId>::deserialize(d)?.into_iter().collect())
    }
}

/// Outcome of the differential check attached to a result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Verification {
    NotRequested,
    /// Nothing changed, so there was nothing to check.
    Unchanged,
    /// Equal on every sampled environment.
    Strict,
    /// Equal on every in-domain sample, as the result's caveats allow.
    InDomain,
    /// The formula uses a function the interpreter does not model.
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RefactorResult {
    pub original: String,
    pub refactored: String,
    pub changed: bool,
    #[serde(rename = "pList")]
    pub p_list: [bool; 9],
    /// Patterns in the order they fired.
    pub applied: Vec<PatternId>,
    pub depth_before: usize,
    pub depth_after: usize,
    pub dep_reduce_num: usize,
    pub dep_reduce_ratio: f64,
    pub caveats: Vec<Caveat>,
    pub tables: Vec<TableSpec>,
    pub verification: Verification,
}

impl RefactorResult {
    pub fn fired(&self, p: PatternId) -> bool {
        self.p_list[p.index()]
    }

    pub fn pattern_count(&self) -> usize {
        self.p_list.iter().filter(|b| **b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("parse error: {0}")]
    Parse(#[from] SyntaxError),
    #[error("no fixpoint within {0} iterations")]
    IterationLimit(usize),
    #[error("verification failed: original {} vs refactored {}", .0.original, .0.refactored)]
    VerificationFailed(Box<Counterexample>),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<RedundancyError> for EngineError {
    fn from(e: RedundancyError) -> Self {
        match e {
            RedundancyError::IterationLimit(n) => EngineError::IterationLimit(n),
        }
    }
}

pub fn refactor_formula(f: &Formula, cfg: &EngineConfig) -> Result<RefactorResult, EngineError> {
    let e = parse_formula(f)?;
    let mut r = refactor_expr(&e, cfg)?;
    r.original = f.source.trim().to_string();
    Ok(r)
}

/// Refactors an already parsed formula. `original` in the result is the
/// printed input.
pub fn refactor_expr(e: &Expr, cfg: &EngineConfig) -> Result<RefactorResult, EngineError> {
    if cfg.max_iterations == 0 {
        return Err(EngineError::Config("max_iterations must be at least 1".into()));
    }
    if cfg.verify && cfg.verify_env_count == 0 {
        return Err(EngineError::Config("verify_env_count must be at least 1".into()));
    }
    let depth_before = if_depth(e);
    let mut p_list = [false; 9];
    let mut applied = Vec::new();
    let mut caveats: Vec<Caveat> = Vec::new();
    let mut tables: Vec<TableSpec> = Vec::new();
    let mut cur = e.clone();

    if depth_before > 1 {
        let redundancy = cfg.enabled_patterns.contains(PatternId::Redun);
        let mut rewrites = 0;
        loop {
            if redundancy && (rewrites == 0 || cfg.rerun_redundancy) {
                let (next, removed) = remove_redundancy(&cur)?;
                if removed > 0 {
                    p_list[PatternId::Redun.index()] = true;
                    if applied.last() != Some(&PatternId::Redun) {
                        applied.push(PatternId::Redun);
                    }
                    cur = next;
                }
            }
            let opts = ProbeOptions {
                mode: cfg.mode,
                enabled: cfg.enabled_patterns,
                tables: TableContext::after(&[e, &cur], &tables),
            };
            let Some(step) = reassemble_once(&cur, &opts) else {
                break;
            };
            if rewrites == cfg.max_iterations {
                return Err(EngineError::IterationLimit(cfg.max_iterations));
            }
            rewrites += 1;
            p_list[step.pattern.index()] = true;
            applied.push(step.pattern);
            caveats.extend(step.caveat);
            tables.extend(step.tables);
            cur = step.expr;
        }
    }
    caveats.sort();
    caveats.dedup();

    let changed = cur != *e;
    let depth_after = if_depth(&cur);
    let dep_reduce_num = depth_before.saturating_sub(depth_after);
    let verification = if !cfg.verify {
        Verification::NotRequested
    } else if !changed {
        Verification::Unchanged
    } else {
        verify(e, &cur, &tables, &caveats, cfg)?
    };
    Ok(RefactorResult {
        original: print(e),
        refactored: print(&cur),
        changed,
        p_list,
        applied,
        depth_before,
        depth_after,
        dep_reduce_num,
        dep_reduce_ratio: if depth_before > 0 {
            dep_reduce_num as f64 / depth_before as f64
        } else {
            0.0
        },
        caveats,
        tables,
        verification,
    })
}

fn verify(
    original: &Expr,
    refactored: &Expr,
    tables: &[TableSpec],
    caveats: &[Caveat],
    cfg: &EngineConfig,
) -> Result<Verification, EngineError> {
    if let Err(EvalError::UnsupportedFunction(name)) = check_supported(original).and(check_supported(refactored)) {
        return Ok(Verification::Unsupported(name));
    }
    let eq = verify_equivalence(original, refactored, tables, cfg.verify_env_count, cfg.seed)
        .expect("support checked above");
    let strict = caveats.is_empty();
    let ok = if strict { eq.equal } else { eq.in_domain_equal };
    if ok {
        return Ok(if strict {
            Verification::Strict
        } else {
            Verification::InDomain
        });
    }
    let cx = eq
        .mismatches
        .into_iter()
        .find(|m| strict || m.in_domain)
        .expect("a failing check has a counterexample");
    Err(EngineError::VerificationFailed(Box::new(cx)))
}

/// Ratio bin index (0..4) for `(0,25]`, `(25,50]`, `(50,75]`, `(75,100]`,
/// or `None` when nothing was reduced.
pub fn ratio_bin(reduced: usize, before: usize) -> Option<usize> {
    if reduced == 0 || before == 0 {
        return None;
    }
    (1..=4).find(|b| reduced * 4 <= b * before).map(|b| b - 1)
}

pub const RATIO_BIN_LABELS: [&str; 4] = ["(0,25]", "(25,50]", "(50,75]", "(75,100]"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DepthHistograms {
    /// depReduceNum value -> record count.
    pub depth_reduce_hist: BTreeMap<usize, usize>,
    /// Counts per reduction-ratio bin, in [`RATIO_BIN_LABELS`] order.
    pub ratio_bins: [usize; 4],
    /// Records whose depth did not go down.
    pub unreduced: usize,
    /// depthAfter value -> record count.
    pub final_depth_hist: BTreeMap<usize, usize>,
}

impl DepthHistograms {
    pub fn add(&mut self, r: &RefactorResult) {
        *self.depth_reduce_hist.entry(r.dep_reduce_num).or_default() += 1;
        *self.final_depth_hist.entry(r.depth_after).or_default() += 1;
        match ratio_bin(r.dep_reduce_num, r.depth_before) {
            Some(b) => self.ratio_bins[b] += 1,
            None => self.unreduced += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.ratio_bins.iter().sum::<usize>() + self.unreduced
    }
}

pub fn depth_histograms<'a>(results: impl IntoIterator<Item = &'a RefactorResult>) -> DepthHistograms {
    let mut h = DepthHistograms::default();
    for r in results {
        h.add(r);
    }
    h
}
