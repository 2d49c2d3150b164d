//! Structural analyses: if-depth, IF chain extraction, condition
//! canonicalization and R1C1 rendering for clustering dragged formulas.

use crate::ast::{BinOp, CellAddr, Expr, Formula, Path};
use crate::parser::{parse_formula, SyntaxError};

/// Largest number of `IF` calls on any root-to-leaf path.
pub fn if_depth(e: &Expr) -> usize {
    let below = e.children().into_iter().map(if_depth).max().unwrap_or(0);
    below + usize::from(e.is_if())
}

/// Which branch links consecutive nodes of an [`IfChain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainDirection {
    FalseBranch,
    TrueBranch,
}

impl ChainDirection {
    /// Argument index of the linking branch inside `IF(...)`.
    pub fn arg_index(self) -> usize {
        match self {
            ChainDirection::TrueBranch => 1,
            ChainDirection::FalseBranch => 2,
        }
    }
}

/// A maximal run of `IF` nodes, each the `direction` child of the previous one.
#[derive(Debug, Clone)]
pub struct IfChain<'a> {
    pub nodes: Vec<&'a Expr>,
    pub direction: ChainDirection,
    /// Path from the formula root to `nodes[0]`.
    pub site: Path,
}

impl IfChain<'_> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Path of the `index`-th node of the chain.
    pub fn path_of(&self, index: usize) -> Path {
        let mut p = self.site.clone();
        p.extend(std::iter::repeat_n(self.direction.arg_index(), index));
        p
    }
}

/// Every maximal IF chain in pre-order (outermost first), including chains
/// nested in condition positions.
pub fn extract_if_chains(e: &Expr, direction: ChainDirection) -> Vec<IfChain<'_>> {
    let link = direction.arg_index();
    let mut heads: Vec<(&Expr, Path)> = Vec::new();
    e.walk(&mut |node, path| {
        if !node.is_if() {
            return;
        }
        let continues_parent = match path.split_last() {
            Some((&last, parent)) => last == link && e.get(parent).is_some_and(Expr::is_if),
            None => false,
        };
        if !continues_parent {
            heads.push((node, path.to_vec()));
        }
    });
    heads
        .into_iter()
        .map(|(head, site)| {
            let mut nodes = vec![head];
            let mut cur = head;
            while let Some(next) = cur.as_call("IF").and_then(|args| args.get(link)).filter(|n| n.is_if()) {
                nodes.push(next);
                cur = next;
            }
            IfChain { nodes, direction, site }
        })
        .collect()
}

/// Truth polarity of a canonical condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn flip(self) -> Polarity {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

/// A condition reduced to a canonical atom plus polarity.
///
/// Comparisons are rewritten over `=`, `<` and `<=` only, with operands
/// oriented so that flipped spellings coincide; `NOT` is unwrapped into the
/// polarity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CondKey {
    pub canonical: Expr,
    pub polarity: Polarity,
}

impl CondKey {
    pub fn negate(&self) -> CondKey {
        CondKey {
            canonical: self.canonical.clone(),
            polarity: self.polarity.flip(),
        }
    }

    /// Expression form of the key (re-canonicalizes to itself).
    pub fn to_expr(&self) -> Expr {
        match (&self.canonical, self.polarity) {
            (_, Polarity::Positive) => self.canonical.clone(),
            (Expr::Binary { op, lhs, rhs }, Polarity::Negative) if op.is_comparison() => {
                Expr::binary(op.complement().unwrap(), (**lhs).clone(), (**rhs).clone())
            }
            (other, Polarity::Negative) => Expr::call("NOT", vec![other.clone()]),
        }
    }
}

/// Canonical key of a boolean-valued condition.
pub fn cond_key(cond: &Expr) -> CondKey {
    if let Some([inner]) = cond.as_call("NOT") {
        return cond_key(inner).negate();
    }
    if let Expr::Binary { op, lhs, rhs } = cond {
        let (l, r) = (lhs.as_ref(), rhs.as_ref());
        let key = |op: BinOp, a: &Expr, b: &Expr, polarity: Polarity| CondKey {
            canonical: Expr::binary(op, a.clone(), b.clone()),
            polarity,
        };
        match op {
            BinOp::Eq | BinOp::Ne => {
                let polarity = if *op == BinOp::Eq {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                };
                let (a, b) = if l <= r { (l, r) } else { (r, l) };
                return key(BinOp::Eq, a, b, polarity);
            }
            // a<b  ==  not(b<=a)
            BinOp::Lt => {
                return if l <= r {
                    key(BinOp::Lt, l, r, Polarity::Positive)
                } else {
                    key(BinOp::Le, r, l, Polarity::Negative)
                };
            }
            // a<=b  ==  not(b<a)
            BinOp::Le => {
                return if l <= r {
                    key(BinOp::Le, l, r, Polarity::Positive)
                } else {
                    key(BinOp::Lt, r, l, Polarity::Negative)
                };
            }
            BinOp::Gt => {
                return cond_key(&Expr::binary(BinOp::Le, l.clone(), r.clone())).negate();
            }
            BinOp::Ge => {
                return cond_key(&Expr::binary(BinOp::Lt, l.clone(), r.clone())).negate();
            }
            _ => {}
        }
    }
    CondKey {
        canonical: cond.clone(),
        polarity: Polarity::Positive,
    }
}

pub fn cond_equals(a: &Expr, b: &Expr) -> bool {
    cond_key(a) == cond_key(b)
}

pub fn negation_of(a: &Expr, b: &Expr) -> bool {
    cond_key(a) == cond_key(b).negate()
}

/// Value-preserving normal form used for branch identity: every comparison is
/// oriented with the structurally smaller operand on the left. `NOT` is kept.
pub fn normalize_value(e: &Expr) -> Expr {
    match e {
        Expr::Binary { op, lhs, rhs } => {
            let l = normalize_value(lhs);
            let r = normalize_value(rhs);
            match op.flipped() {
                Some(flipped) if r < l => Expr::binary(flipped, r, l),
                _ => Expr::binary(*op, l, r),
            }
        }
        Expr::Unary { op, operand } => Expr::unary(*op, normalize_value(operand)),
        Expr::Call { name, args } => Expr::Call {
            name: name.clone(),
            args: args.iter().map(normalize_value).collect(),
        },
        Expr::Array(items) => Expr::Array(items.iter().map(normalize_value).collect()),
        other => other.clone(),
    }
}

/// Structural identity after [`normalize_value`].
pub fn same_value_expr(a: &Expr, b: &Expr) -> bool {
    a == b || normalize_value(a) == normalize_value(b)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum R1C1Error {
    #[error("formula has no anchor cell")]
    MissingAnchor,
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

/// Renders a single reference in R1C1 notation relative to `anchor`.
pub fn cell_to_r1c1(cell: &CellAddr, anchor: &CellAddr) -> String {
    let row = if cell.row_absolute {
        format!("R{}", cell.row)
    } else {
        format!("R[{}]", cell.row as i64 - anchor.row as i64)
    };
    let col = if cell.col_absolute {
        format!("C{}", cell.column)
    } else {
        format!("C[{}]", cell.column as i64 - anchor.column as i64)
    };
    row + &col
}

/// Normalized formula text with every reference rewritten to R1C1.
pub fn to_r1c1(f: &Formula) -> Result<String, R1C1Error> {
    let anchor = f.anchor.ok_or(R1C1Error::MissingAnchor)?;
    let e = parse_formula(f)?;
    Ok(expr_to_r1c1(&e, &anchor))
}

pub fn expr_to_r1c1(e: &Expr, anchor: &CellAddr) -> String {
    let mut out = String::new();
    e.render_with(&mut out, &|c| cell_to_r1c1(c, anchor));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn depth_examples() {
        assert_eq!(if_depth(&p("IF(C1,IF(C2,V1,V2),IF(C3,IF(C4,V3,V4),V5))")), 3);
        assert_eq!(if_depth(&p("SUM(A1,B1)")), 0);
        assert_eq!(if_depth(&p("IF(IF(L1>=F$5,L1),IF(L1<=F$6,L1,\"\"),\"\")")), 2);
        assert_eq!(if_depth(&p("IFS(A1,IF(B1,1,2))")), 1);
    }

    #[test]
    fn chain_inside_sum() {
        let e = p("SUM(IF(C1,V1,IF(NOT(C1),V2,IF(C2,V3,V4))),V5)");
        let chains = extract_if_chains(&e, ChainDirection::FalseBranch);
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].len(), 3);
        assert_eq!(chains[0].site, vec![0]);
        assert_eq!(chains[0].path_of(2), vec![0, 2, 2]);
        assert_eq!(e.get(&chains[0].path_of(2)), Some(chains[0].nodes[2]));
    }

    #[test]
    fn chain_in_condition_position() {
        let e = p("IF(IF(C1,V1,IF(NOT(C1),V2,V3))=V1,V3,IF(NOT(C1),V4,V5))");
        let chains = extract_if_chains(&e, ChainDirection::FalseBranch);
        assert_eq!(chains.len(), 2);
        assert_eq!(chains[0].len(), 2);
        assert_eq!(chains[0].site, Vec::<usize>::new());
        assert_eq!(chains[1].site, vec![0, 0]);
        assert_eq!(chains[1].len(), 2);
    }

    #[test]
    fn no_chains_without_if() {
        assert!(extract_if_chains(&p("A1+B1"), ChainDirection::FalseBranch).is_empty());
    }

    #[test]
    fn true_branch_chains() {
        let e = p("IF(C1,IF(C2,IF(C3,V1,V2),V2),V2)");
        let t = extract_if_chains(&e, ChainDirection::TrueBranch);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].len(), 3);
        let f = extract_if_chains(&e, ChainDirection::FalseBranch);
        assert_eq!(f.len(), 3);
        assert!(f.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn condition_equality_and_negation() {
        assert!(cond_equals(&p("A1<B1"), &p("B1>A1")));
        assert!(cond_equals(&p("A1<=B1"), &p("B1>=A1")));
        assert!(cond_equals(&p("A1=B1"), &p("B1=A1")));
        assert!(negation_of(&p("C1"), &p("NOT(C1)")));
        assert!(negation_of(&p("Q1=X1"), &p("Q1<>X1")));
        assert!(negation_of(&p("A1<B1"), &p("A1>=B1")));
        assert!(negation_of(&p("A1<B1"), &p("B1<=A1")));
        assert!(negation_of(&p("A1>B1"), &p("NOT(B1<A1)")));
        assert!(!negation_of(&p("C1"), &p("C1")));
        assert!(!cond_equals(&p("A1+0=B1"), &p("A1=B1")));
        assert!(cond_equals(&p("NOT(NOT(C1))"), &p("C1")));
    }

    #[test]
    fn key_expr_round_trips() {
        for s in ["A1<B1", "B1>A1", "NOT(C1)", "Q1<>X1", "A1>=3", "3<=A1"] {
            let k = cond_key(&p(s));
            assert_eq!(cond_key(&k.to_expr()), k, "{s}");
        }
    }

    #[test]
    fn r1c1_offsets() {
        let b2 = "B2".parse().unwrap();
        assert_eq!(to_r1c1(&Formula::anchored("=A1+$C$5", b2)).unwrap(), "R[-1]C[-1]+R5C3");
        assert_eq!(to_r1c1(&Formula::anchored("=B2", b2)).unwrap(), "R[0]C[0]");
        assert_eq!(to_r1c1(&Formula::anchored("=C$1", b2)).unwrap(), "R1C[1]");
        assert_eq!(to_r1c1(&Formula::new("=A1")), Err(R1C1Error::MissingAnchor));
    }

    #[test]
    fn dragged_copies_share_r1c1() {
        let a = to_r1c1(&Formula::anchored("=IF(A1>0,A1,0)", "B1".parse().unwrap())).unwrap();
        let b = to_r1c1(&Formula::anchored("=IF(A9>0,A9,0)", "B9".parse().unwrap())).unwrap();
        assert_eq!(a, b);
    }
}
