use std::collections::BTreeMap;

use natproof::clausify::Clausifier;
use natproof::desugar::{desugar, Scope};
use natproof::fol::{Formula, Term};
use natproof::lexer::{tokenize, Location};
use natproof::model::{evaluate, find_countermodel, FinderLimits, FinderResult, Model, Signature};
use natproof::notation::{match_atom, parse_notation, NotationScope};
use natproof::parser::{parse_source, AtomSpan};
use natproof::tptp::{decode_name, encode_name, formula_to_tptp, parse_fof, split_problem};
use proptest::prelude::*;

const VARS: &[&str] = &["x", "y", "z"];

fn term(depth: u32, vars: Vec<&'static str>, constants: bool) -> BoxedStrategy<Term> {
    let mut leaves: Vec<BoxedStrategy<Term>> = Vec::new();
    if !vars.is_empty() {
        leaves.push(proptest::sample::select(vars).prop_map(Term::var).boxed());
    }
    if constants || leaves.is_empty() {
        leaves.push(proptest::sample::select(vec!["a", "b"]).prop_map(Term::constant).boxed());
    }
    let leaf = proptest::strategy::Union::new(leaves).boxed();
    if depth == 0 {
        return leaf;
    }
    prop_oneof![3 => leaf.clone(), 1 => leaf.prop_map(|t| Term::app("f", vec![t]))].boxed()
}

fn atom(vars: Vec<&'static str>, constants: bool) -> BoxedStrategy<Formula> {
    let t = || term(1, vars.clone(), constants);
    prop_oneof![
        t().prop_map(|x| Formula::pred("p", vec![x])),
        (t(), t()).prop_map(|(x, y)| Formula::pred("q", vec![x, y])),
        Just(Formula::pred("r", vec![])),
        (t(), t()).prop_map(|(x, y)| Formula::eq(x, y)),
    ]
    .boxed()
}

/// Formulas whose free variables are among `VARS`; `constants` allows `a`
/// and `b`.
fn open_formula(constants: bool) -> BoxedStrategy<Formula> {
    atom(VARS.to_vec(), constants)
        .prop_recursive(3, 16, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::and(l, r)),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::or(l, r)),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::implies(l, r)),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::iff(l, r)),
                (proptest::sample::select(VARS), inner.clone()).prop_map(|(v, b)| Formula::forall([v], b)),
                (proptest::sample::select(VARS), inner).prop_map(|(v, b)| Formula::exists([v], b)),
            ]
        })
        .boxed()
}

fn close(f: Formula) -> Formula {
    let free = f.free_vars_ordered();
    if free.is_empty() {
        f
    } else {
        Formula::Forall(free, Box::new(f))
    }
}

fn closed_formula(constants: bool) -> BoxedStrategy<Formula> {
    open_formula(constants).prop_map(close).boxed()
}

fn model_count(sig: &Signature, n: usize) -> u128 {
    let mut count: u128 = (n as u128).pow(sig.constants.len() as u32);
    for &arity in sig.functions.values() {
        count = count.saturating_mul((n as u128).saturating_pow(n.pow(arity as u32) as u32));
    }
    for &arity in sig.predicates.values() {
        count = count.saturating_mul(1u128 << n.pow(arity as u32).min(100));
    }
    count
}

/// Brute force: does `f` have a model with at most `max` elements?
fn has_model(f: &Formula, max: usize) -> Option<bool> {
    let sig = Signature::of([f]);
    let env = BTreeMap::new();
    for n in 1..=max {
        if model_count(&sig, n) > 40_000 {
            return None;
        }
        if sig.all_models(n).iter().any(|m| evaluate(f, m, &env) == Ok(true)) {
            return Some(true);
        }
    }
    Some(false)
}

fn finder_has_model(formulas: &[Formula], max: usize) -> Option<Model> {
    let limits = FinderLimits { max_size: max, ..FinderLimits::default() };
    match find_countermodel(formulas, &Formula::Falsum, limits, None) {
        FinderResult::Found(m) => Some(m),
        FinderResult::NoneUpTo(_) => None,
        FinderResult::GaveUp => panic!("finder gave up on a tiny problem"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn finder_agrees_with_enumeration(f in closed_formula(true)) {
        let Some(expected) = has_model(&f, 2) else { return Ok(()) };
        let found = finder_has_model(std::slice::from_ref(&f), 2);
        prop_assert_eq!(found.is_some(), expected, "{}", f);
        if let Some(m) = found {
            prop_assert_eq!(evaluate(&f, &m, &BTreeMap::new()), Ok(true));
        }
    }

    #[test]
    fn clausification_preserves_satisfiability(f in closed_formula(true)) {
        let mut c = Clausifier::new();
        c.add(&f);
        let clauses: Vec<Formula> = c.finish().iter().map(|cl| cl.to_formula()).collect();
        let original = finder_has_model(std::slice::from_ref(&f), 2).is_some();
        let clausal = finder_has_model(&clauses, 2).is_some();
        prop_assert_eq!(original, clausal, "{}", f);
    }

    #[test]
    fn substitution_matches_binding(f in open_formula(true), t in term(1, vec![], true), vx in 0usize..2, vy in 0usize..2, vz in 0usize..2) {
        let sig = Signature::of([&f, &Formula::pred("p", vec![t.clone()])]);
        prop_assume!(model_count(&sig, 2) <= 5_000);
        let mut map = BTreeMap::new();
        map.insert("x".to_string(), t.clone());
        let substituted = f.substitute(&map);
        for m in sig.all_models(2) {
            let mut env: BTreeMap<String, usize> = [("y", vy), ("z", vz), ("x", vx)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            let lhs = evaluate(&substituted, &m, &env).unwrap();
            env.insert("x".into(), m.term_value(&t, &[]).unwrap());
            prop_assert_eq!(lhs, evaluate(&f, &m, &env).unwrap());
        }
    }

    #[test]
    fn tptp_round_trip(f in closed_formula(true)) {
        let text = format!("fof(a, axiom, {}).\n", formula_to_tptp(&f));
        let parsed = parse_fof(&text).unwrap();
        let (axioms, _) = split_problem(&parsed);
        prop_assert_eq!(&axioms["a"], &f);
    }

    #[test]
    fn identifiers_encode_reversibly(name in "[a-zA-Z0-9_'éß]{1,8}") {
        let e = encode_name(&name);
        prop_assert!(e.starts_with(|c: char| c.is_ascii_lowercase()));
        prop_assert!(e.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
        prop_assert_eq!(decode_name(&e), Some(name));
    }

    #[test]
    fn english_round_trip(f in closed_formula(false)) {
        let text = format!("Axiom A: {}.", english(&f));
        let raw = parse_source(&text).unwrap();
        let reparsed = parse_source(&raw.to_string()).unwrap();
        prop_assert_eq!(raw.without_locations(), reparsed.without_locations());
        let doc = desugar(&raw, &Scope::default()).unwrap();
        prop_assert_eq!(&doc.decls[0].formula, &f, "{}", text);
    }

    #[test]
    fn notation_render_then_match(args in proptest::collection::vec(proptest::sample::select(vec!["a", "b'", "m", "x1", "p''"]), 4)) {
        let mut scope = NotationScope::new();
        for (name, src) in [("between", "a-b-c"), ("equidistant", "a-b ≡ c-d"), ("parstr", "a-b|-|c-d"), ("parallel", "a-b||c-d")] {
            scope.register_in_place(parse_notation(name, &tokenize(src).unwrap()).unwrap(), Location::default()).unwrap();
        }
        for p in scope.patterns().to_vec() {
            let terms: Vec<Term> = args[..p.arity].iter().map(|a| Term::var(*a)).collect();
            let tokens = tokenize(&p.render(&terms)).unwrap();
            let matched = match_atom(&AtomSpan { loc: tokens[0].loc, tokens }, &scope).unwrap();
            prop_assert_eq!(matched, Formula::pred(p.name.clone(), terms));
        }
    }
}

fn english_term(t: &Term) -> String {
    match t {
        Term::Var(v) | Term::Const(v) => v.clone(),
        Term::App(f, args) => format!("{f}({})", args.iter().map(english_term).collect::<Vec<_>>().join(",")),
    }
}

/// Fully parenthesized controlled English for `f`.
fn english(f: &Formula) -> String {
    let bin = |l: &Formula, op: &str, r: &Formula| format!("({}) {op} ({})", english(l), english(r));
    match f {
        Formula::Falsum => "contradiction".into(),
        Formula::Pred(p, args) if args.is_empty() => p.clone(),
        Formula::Pred(p, args) => format!("{p}({})", args.iter().map(english_term).collect::<Vec<_>>().join(",")),
        Formula::Eq(l, r) => format!("{} = {}", english_term(l), english_term(r)),
        Formula::Not(g) => format!("not ({})", english(g)),
        Formula::And(l, r) => bin(l, "and", r),
        Formula::Or(l, r) => bin(l, "or", r),
        Formula::Implies(l, r) => bin(l, "implies", r),
        Formula::Iff(l, r) => bin(l, "iff", r),
        Formula::Forall(vs, b) => format!("for all {}. ({})", vs.join(","), english(b)),
        Formula::Exists(vs, b) => format!("exists {}. ({})", vs.join(","), english(b)),
    }
}
