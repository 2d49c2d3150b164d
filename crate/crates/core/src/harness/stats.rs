//! Corpus statistics: if-depth distribution and clustering of dragged copies.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::CorpusLine;
use crate::analysis::{expr_to_r1c1, if_depth};
use crate::ast::CellAddr;
use crate::parser::{parse, print};

/// Formulas per if-depth range.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthRanges {
    #[serde(rename = "[0,1]")]
    pub flat: usize,
    #[serde(rename = "(1,5]")]
    pub upto5: usize,
    #[serde(rename = "(5,10]")]
    pub upto10: usize,
    #[serde(rename = "(10,15]")]
    pub upto15: usize,
    #[serde(rename = "(15,65]")]
    pub upto65: usize,
    #[serde(rename = "(65,inf)")]
    pub beyond: usize,
}

impl DepthRanges {
    pub fn add(&mut self, depth: usize) {
        let slot = match depth {
            0..=1 => &mut self.flat,
            2..=5 => &mut self.upto5,
            6..=10 => &mut self.upto10,
            11..=15 => &mut self.upto15,
            16..=65 => &mut self.upto65,
            _ => &mut self.beyond,
        };
        *slot += 1;
    }

    pub fn nested(&self) -> usize {
        self.upto5 + self.upto10 + self.upto15 + self.upto65 + self.beyond
    }

    pub fn total(&self) -> usize {
        self.flat + self.nested()
    }
}

/// Grouping key under which dragged copies coincide: the R1C1 rendering when
/// the anchor is known, the normalized A1 text otherwise, and the raw text
/// for formulas that do not parse.
pub fn cluster_key(formula: &str, anchor: Option<CellAddr>) -> String {
    match (parse(formula), anchor) {
        (Ok(e), Some(a)) => expr_to_r1c1(&e, &a),
        (Ok(e), None) => print(&e),
        (Err(_), _) => formula.trim().to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Cluster {
    pub key: String,
    pub size: usize,
    /// Line number of the first member.
    pub representative: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatsReport {
    pub total_count: usize,
    pub unique_count: usize,
    pub nested_count: usize,
    pub unique_nested_count: usize,
    pub parse_errors: usize,
    /// The whole input counts as one workbook.
    pub formulas_per_workbook: usize,
    pub if_depth_ranges: DepthRanges,
    pub unique_if_depth_ranges: DepthRanges,
    /// Largest clusters first.
    pub clusters: Vec<Cluster>,
}

impl StatsReport {
    pub fn from_lines(lines: &[CorpusLine]) -> Self {
        let mut ranges = DepthRanges::default();
        let mut unique_ranges = DepthRanges::default();
        let mut parse_errors = 0;
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut clusters: Vec<Cluster> = Vec::new();
        for l in lines {
            let depth = match parse(&l.formula) {
                Ok(e) => if_depth(&e),
                Err(_) => {
                    parse_errors += 1;
                    continue;
                }
            };
            ranges.add(depth);
            let key = cluster_key(&l.formula, l.anchor);
            match index.get(&key) {
                Some(&i) => clusters[i].size += 1,
                None => {
                    unique_ranges.add(depth);
                    index.insert(key.clone(), clusters.len());
                    clusters.push(Cluster {
                        key,
                        size: 1,
                        representative: l.line,
                        depth,
                    });
                }
            }
        }
        clusters.sort_by(|a, b| b.size.cmp(&a.size).then(a.representative.cmp(&b.representative)));
        StatsReport {
            total_count: lines.len(),
            unique_count: clusters.len(),
            nested_count: ranges.nested(),
            unique_nested_count: unique_ranges.nested(),
            parse_errors,
            formulas_per_workbook: lines.len(),
            if_depth_ranges: ranges,
            unique_if_depth_ranges: unique_ranges,
            clusters,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::read_corpus;

    #[test]
    fn dragged_copies_form_one_cluster() {
        let text: String = (1..=10)
            .map(|r| format!("B{r}\t=IF(A{r}>0,A{r},IF(A{r}<-5,1,$C$1))\n"))
            .collect();
        let s = StatsReport::from_lines(&read_corpus(&text));
        assert_eq!(s.total_count, 10);
        assert_eq!(s.unique_count, 1);
        assert_eq!(s.clusters[0].size, 10);
    }

    #[test]
    fn without_anchors_text_is_the_key() {
        let s = StatsReport::from_lines(&read_corpus("=A1+1\nA1 + 1\nA2+1\n"));
        assert_eq!(s.unique_count, 2);
    }

    #[test]
    fn depth_ranges() {
        let d2 = "IF(A1,IF(A2,1,2),3)";
        let d7 = (0..7).fold("0".to_string(), |acc, i| format!("IF(A{},{acc},1)", i + 1));
        let s = StatsReport::from_lines(&read_corpus(&format!("{d2}\n{d7}\nbad(\n")));
        assert_eq!(s.if_depth_ranges.upto5, 1);
        assert_eq!(s.if_depth_ranges.upto10, 1);
        assert_eq!(s.total_count, 3);
        assert_eq!(s.parse_errors, 1);
        let mut r = DepthRanges::default();
        for d in [0, 1, 5, 6, 15, 65, 66] {
            r.add(d);
        }
        assert_eq!(
            (r.flat, r.upto5, r.upto10, r.upto15, r.upto65, r.beyond),
            (2, 1, 1, 1, 1, 1)
        );
    }
}
