//! Aggregate coverage, pattern and depth statistics over refactoring records.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::stats::{cluster_key, DepthRanges};
use super::Record;
use crate::engine::{depth_histograms, EngineConfig, RATIO_BIN_LABELS};
use crate::patterns::PatternId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternShare {
    pub count: usize,
    /// Share of refactored records, in percent.
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<EngineConfig>,
    pub total_count: usize,
    pub refactored_count: usize,
    pub unique_count: usize,
    pub unique_refactored_count: usize,
    pub coverage_pct: f64,
    pub unique_coverage_pct: f64,
    pub error_count: usize,
    pub per_pattern: BTreeMap<PatternId, PatternShare>,
    /// Number of distinct patterns fired -> refactored records.
    pub multi_pattern: BTreeMap<usize, usize>,
    pub max_patterns_per_formula: usize,
    /// Rows and columns in pattern order. Off-diagonal cells count records
    /// where both patterns fired; the diagonal counts records where only
    /// that pattern fired.
    pub overlap_matrix: [[usize; 9]; 9],
    pub depth_reduce_hist: BTreeMap<usize, usize>,
    pub ratio_bins: BTreeMap<String, usize>,
    pub unreduced: usize,
    pub final_depth_hist: BTreeMap<usize, usize>,
    pub if_depth_ranges: DepthRanges,
    pub caveat_counts: BTreeMap<String, usize>,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 * 100.0 / den as f64
    }
}

impl CorpusReport {
    pub fn from_records(records: &[Record], config: Option<EngineConfig>) -> Self {
        let results: Vec<_> = records.iter().filter_map(|r| r.result().map(|res| (r, res))).collect();
        let total = results.len();
        let refactored = results.iter().filter(|(_, r)| r.changed).count();

        let mut clusters: HashMap<String, bool> = HashMap::new();
        for (rec, res) in &results {
            clusters
                .entry(cluster_key(&res.original, rec.anchor))
                .or_insert(res.changed);
        }
        let unique_refactored = clusters.values().filter(|c| **c).count();

        let mut per_pattern = BTreeMap::new();
        let mut multi = BTreeMap::new();
        let mut overlap = [[0usize; 9]; 9];
        let mut caveat_counts = BTreeMap::new();
        let mut ranges = DepthRanges::default();
        for (_, r) in &results {
            ranges.add(r.depth_before);
            for c in &r.caveats {
                *caveat_counts.entry(format!("{c:?}")).or_insert(0) += 1;
            }
            if !r.changed {
                continue;
            }
            let fired: Vec<PatternId> = PatternId::ALL.into_iter().filter(|p| r.fired(*p)).collect();
            *multi.entry(fired.len()).or_insert(0) += 1;
            for p in &fired {
                per_pattern
                    .entry(*p)
                    .or_insert(PatternShare { count: 0, pct: 0.0 })
                    .count += 1;
            }
            if let [only] = fired[..] {
                overlap[only.index()][only.index()] += 1;
            }
            for a in &fired {
                for b in &fired {
                    if a != b {
                        overlap[a.index()][b.index()] += 1;
                    }
                }
            }
        }
        for share in per_pattern.values_mut() {
            share.pct = pct(share.count, refactored);
        }
        let hist = depth_histograms(results.iter().map(|(_, r)| *r));
        CorpusReport {
            config,
            total_count: total,
            refactored_count: refactored,
            unique_count: clusters.len(),
            unique_refactored_count: unique_refactored,
            coverage_pct: pct(refactored, total),
            unique_coverage_pct: pct(unique_refactored, clusters.len()),
            error_count: records.len() - total,
            per_pattern,
            max_patterns_per_formula: multi.keys().copied().max().unwrap_or(0),
            multi_pattern: multi,
            overlap_matrix: overlap,
            depth_reduce_hist: hist.depth_reduce_hist,
            ratio_bins: RATIO_BIN_LABELS
                .iter()
                .zip(hist.ratio_bins)
                .map(|(l, n)| (l.to_string(), n))
                .collect(),
            unreduced: hist.unreduced,
            final_depth_hist: hist.final_depth_hist,
            if_depth_ranges: ranges,
            caveat_counts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{read_corpus, refactor_corpus};
    use crate::par::Execution;

    #[test]
    fn counts_and_overlap() {
        let corpus = "\
IF(C1,IF(C2,IF(C3,V1,V2),V2),V2)
IF(C1,V1,IF(A1>B1,A1,B1))
IF(C1,V1,IF(C2,V2,IF(A1>B1,A1,B1)))
IF(A1>0,1,2)
bad(((
";
        let recs = refactor_corpus(&read_corpus(corpus), &EngineConfig::default(), Execution::Sequential);
        let rep = CorpusReport::from_records(&recs, None);
        assert_eq!(rep.total_count, 4);
        assert_eq!(rep.error_count, 1);
        assert_eq!(rep.refactored_count, 3);
        assert_eq!(rep.coverage_pct, 75.0);
        assert_eq!(rep.per_pattern[&PatternId::Maxmin].count, 2);
        assert_eq!(rep.multi_pattern[&2], 1);
        let (m, i) = (PatternId::Maxmin.index(), PatternId::Ifs.index());
        assert_eq!(rep.overlap_matrix[m][i], 1);
        assert_eq!(rep.overlap_matrix[i][m], 1);
        assert_eq!(rep.overlap_matrix[m][m], 1);
        assert_eq!(rep.ratio_bins.values().sum::<usize>() + rep.unreduced, rep.total_count);
    }
}
