#[path = "support/tree_oracle.rs"]
mod tree_oracle;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rootterm_core::exprlang::{Atom, EvalContext, Expression};
use rootterm_core::sampling::{sample_expression, AmafTable, SamplingMode};
use tree_oracle::{build, close, eval, infix, Vars};

fn symbols(e: &Expression) -> Vec<String> {
    e.tokens().iter().map(|a| a.symbol().to_string()).collect()
}

fn random_ctx(rng: &mut impl Rng) -> (EvalContext, Vars) {
    let sc = rng.gen_range(0.0..64.0);
    let pr = rng.gen_range(0.0..1.0);
    let nbp = rng.gen_range(0..64) as f64;
    let nb = rng.gen_range(0..256) as f64;
    (EvalContext::new(sc, pr, nbp, nb), Vars { sc, pr, nbp, nb })
}

#[test]
fn prefix_evaluation_matches_tree_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let table = AmafTable::new();
    for _ in 0..1000 {
        let e = sample_expression(SamplingMode::Uniform, 12, &mut rng, &table, 1.0);
        let tree = build(&symbols(&e)).expect("complete expression is one tree");
        for _ in 0..10 {
            let (ctx, vars) = random_ctx(&mut rng);
            let got = e.evaluate(&ctx).unwrap();
            let want = eval(&tree, &vars);
            assert!(got.is_finite());
            assert!(close(got, want, 1e-12), "{e}: {got} vs {want}");
        }
    }
}

#[test]
fn infix_matches_tree_rendering() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let table = AmafTable::new();
    for _ in 0..500 {
        let e = sample_expression(SamplingMode::Uniform, 12, &mut rng, &table, 1.0);
        let text = e.to_infix().unwrap();
        assert_eq!(text, infix(&build(&symbols(&e)).unwrap()));
        let back = Expression::parse_infix(&text).unwrap();
        assert_eq!(back.tokens(), e.tokens());
    }
}

fn any_atom() -> impl Strategy<Value = Atom> {
    (0..Atom::COUNT).prop_map(|i| Atom::ALL[i])
}

proptest! {
    #[test]
    fn pushing_keeps_the_budget(choices in prop::collection::vec(0usize..1000, 0..40), max_len in 1usize..16) {
        let mut e = Expression::new(max_len);
        for c in choices {
            let legal = e.legal_atoms();
            if e.is_complete() {
                prop_assert!(legal.is_err());
                break;
            }
            let legal = legal.unwrap();
            prop_assert!(!legal.is_empty());
            let atom = legal[c % legal.len()];
            e.push(atom).unwrap();
            prop_assert!(e.len() + e.open_leaves() <= max_len);
        }
    }

    #[test]
    fn illegal_atoms_are_refused(atoms in prop::collection::vec(any_atom(), 1..30)) {
        let mut e = Expression::new(12);
        for a in atoms {
            if e.is_complete() {
                break;
            }
            let legal = e.legal_atoms().unwrap();
            let res = e.push(a);
            prop_assert_eq!(res.is_ok(), legal.contains(&a));
        }
    }

    #[test]
    fn prefix_text_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = sample_expression(SamplingMode::Uniform, 12, &mut rng, &AmafTable::new(), 1.0);
        let back = Expression::parse(&e.canonical_key()).unwrap();
        prop_assert_eq!(back.tokens(), e.tokens());
        prop_assert_eq!(back.to_string(), e.to_string());
    }

    #[test]
    fn evaluation_is_finite_on_finite_contexts(
        seed in any::<u64>(),
        sc in -1e300f64..1e300,
        pr in -1e300f64..1e300,
        nbp in 0f64..1e12,
        nb in 0f64..1e12,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = sample_expression(SamplingMode::Uniform, 12, &mut rng, &AmafTable::new(), 1.0);
        let v = e.evaluate(&EvalContext::new(sc, pr, nbp, nb)).unwrap();
        prop_assert!(v.is_finite());
    }
}

#[test]
fn garbage_text_is_rejected() {
    for bad in ["", "bogus", "+ sc", "sc pr", "log", "1 +", "max(sc pr)"] {
        assert!(Expression::parse(bad).is_err() || Expression::parse_infix(bad).is_err(), "{bad}");
    }
    assert!(Expression::parse("bogus").unwrap_err().to_string().contains("bogus"));
}
