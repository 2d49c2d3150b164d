use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unnest_core::analysis::if_depth;
use unnest_core::engine::{refactor_expr, EngineConfig};
use unnest_core::harness::generator::fuzz_formula;
use unnest_core::oracle::verify_equivalence;
use unnest_core::patterns::{reassemble_once, Mode, PatternSet, ProbeOptions, TableContext};
use unnest_core::redundancy::remove_redundancy;
use unnest_core::{parse, print, Expr};

fn formula(max_ifs: usize) -> impl Strategy<Value = Expr> {
    any::<u64>().prop_map(move |seed| fuzz_formula(&mut ChaCha8Rng::seed_from_u64(seed), max_ifs))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn print_then_parse_is_identity(e in formula(19)) {
        let text = print(&e);
        prop_assert_eq!(parse(&text).unwrap(), e);
    }

    #[test]
    fn parser_never_panics(s in "\\PC{0,60}") {
        let _ = parse(&s);
    }

    #[test]
    fn parser_never_panics_on_formula_like_text(s in "[=A-D1-4(),<>\"+*/&^:$ .IFNOT]{0,40}") {
        if let Ok(e) = parse(&s) {
            prop_assert_eq!(parse(&print(&e)).unwrap(), e);
        }
    }

    #[test]
    fn redundancy_removal_preserves_values(e in formula(12), seed in any::<u64>()) {
        let (out, removed) = remove_redundancy(&e).unwrap();
        prop_assert!(out.if_count() <= e.if_count());
        prop_assert!(if_depth(&out) <= if_depth(&e));
        if removed > 0 {
            if let Ok(eq) = verify_equivalence(&e, &out, &[], 100, seed) {
                prop_assert!(eq.equal, "{} vs {}: {:?}", print(&e), print(&out), eq.mismatches.first());
            }
        }
    }

    #[test]
    fn redundancy_removal_is_idempotent(e in formula(12)) {
        let (once, _) = remove_redundancy(&e).unwrap();
        let (twice, n) = remove_redundancy(&once).unwrap();
        prop_assert_eq!(n, 0);
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn probing_is_deterministic(e in formula(12)) {
        let opts = ProbeOptions { mode: Mode::Paper, enabled: PatternSet::all(), tables: TableContext::after(&[&e], []) };
        prop_assert_eq!(reassemble_once(&e, &opts), reassemble_once(&e, &opts));
    }

    #[test]
    fn engine_never_deepens(e in formula(19)) {
        let cfg = EngineConfig { verify_env_count: 30, ..EngineConfig::default() };
        let r = refactor_expr(&e, &cfg).map_err(|err| TestCaseError::fail(format!("{}: {err}", print(&e))))?;
        prop_assert!(r.depth_after <= r.depth_before);
        prop_assert!(parse(&r.refactored).unwrap().if_count() <= e.if_count());
    }
}
