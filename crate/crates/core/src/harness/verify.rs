//! Differential re-check of refactoring records.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Record;
use crate::oracle::{verify_equivalence, Counterexample};
use crate::par::{item_seed, map_indexed, Execution};
use crate::parser::parse;
use crate::patterns::Caveat;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyConfigError {
    #[error("environment count must be at least 1")]
    ZeroEnvironments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyRecord {
    pub line: usize,
    /// False for unchanged and failed records, which have nothing to compare.
    pub checked: bool,
    pub strict_equal: bool,
    pub in_domain_equal: bool,
    pub samples: usize,
    pub in_domain_samples: usize,
    pub caveats: Vec<Caveat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifySummary {
    pub env_count: usize,
    pub seed: u64,
    pub records: usize,
    pub checked: usize,
    pub errors: usize,
    pub strict_equal: usize,
    pub in_domain_equal: usize,
    pub caveat_free: usize,
    pub caveat_free_strict_equal: usize,
}

impl VerifySummary {
    /// Every caveat-free record is strictly equal and every record is equal
    /// in-domain.
    pub fn passed(&self) -> bool {
        self.errors == 0 && self.caveat_free_strict_equal == self.caveat_free && self.in_domain_equal == self.checked
    }
}

fn verify_record(rec: &Record, env_count: usize, seed: u64) -> VerifyRecord {
    let mut out = VerifyRecord {
        line: rec.line,
        checked: false,
        strict_equal: true,
        in_domain_equal: true,
        samples: 0,
        in_domain_samples: 0,
        caveats: Vec::new(),
        counterexample: None,
        error: None,
    };
    let Some(r) = rec.result() else {
        return out;
    };
    out.caveats = r.caveats.clone();
    if !r.changed {
        return out;
    }
    let parsed = parse(&r.original).and_then(|a| Ok((a, parse(&r.refactored)?)));
    let (a, b) = match parsed {
        Ok(p) => p,
        Err(e) => {
            out.error = Some(format!("parse error: {e}"));
            return out;
        }
    };
    match verify_equivalence(&a, &b, &r.tables, env_count, item_seed(seed, rec.line as u64)) {
        Ok(eq) => {
            out.checked = true;
            out.strict_equal = eq.equal;
            out.in_domain_equal = eq.in_domain_equal;
            out.samples = eq.samples;
            out.in_domain_samples = eq.in_domain_samples;
            let first_in_domain = eq.mismatches.iter().position(|m| m.in_domain).unwrap_or(0);
            out.counterexample = eq.mismatches.into_iter().nth(first_in_domain);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Re-evaluates every changed record on `env_count` sampled environments.
pub fn verify_records(
    records: &[Record],
    env_count: usize,
    seed: u64,
    exec: Execution,
) -> Result<(Vec<VerifyRecord>, VerifySummary), VerifyConfigError> {
    if env_count == 0 {
        return Err(VerifyConfigError::ZeroEnvironments);
    }
    let out = map_indexed(records, exec, |_, r| verify_record(r, env_count, seed));
    let mut s = VerifySummary {
        env_count,
        seed,
        records: records.len(),
        ..VerifySummary::default()
    };
    for v in out.iter().filter(|v| v.checked || v.error.is_some()) {
        if v.error.is_some() {
            s.errors += 1;
            continue;
        }
        s.checked += 1;
        s.strict_equal += usize::from(v.strict_equal);
        s.in_domain_equal += usize::from(v.in_domain_equal);
        if v.caveats.is_empty() {
            s.caveat_free += 1;
            s.caveat_free_strict_equal += usize::from(v.strict_equal);
        }
    }
    Ok((out, s))
}
