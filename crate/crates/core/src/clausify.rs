//! Clause normal form for the built-in prover.
//!
//! Pipeline: negation normal form (with `↔` expanded by polarity),
//! Skolemization, distribution into clauses. Large disjunctive products are
//! broken with definitional predicates. When equality occurs anywhere, the
//! equality axioms and congruence clauses for every symbol are appended.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::fol::{Formula, Term};

pub const SKOLEM_PREFIX: &str = "__sk";
pub const DEFINITION_PREFIX: &str = "__def";

/// Products above this many clauses are split with a definition.
const DISTRIBUTION_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Pred(String, Vec<Term>),
    Eq(Term, Term),
}

impl Atom {
    pub fn args(&self) -> Vec<&Term> {
        match self {
            Atom::Pred(_, args) => args.iter().collect(),
            Atom::Eq(l, r) => vec![l, r],
        }
    }

    pub fn to_formula(&self) -> Formula {
        match self {
            Atom::Pred(p, args) => Formula::Pred(p.clone(), args.clone()),
            Atom::Eq(l, r) => Formula::Eq(l.clone(), r.clone()),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_formula())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn new(positive: bool, atom: Atom) -> Literal {
        Literal { positive, atom }
    }

    pub fn negated(&self) -> Literal {
        Literal { positive: !self.positive, atom: self.atom.clone() }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.positive { '+' } else { '¬' };
        write!(f, "{sign}{}", self.atom)
    }
}

/// A disjunction of literals. Variables are implicitly universal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub literals: Vec<Literal>,
    pub id: usize,
}

impl Clause {
    pub fn new(id: usize, literals: Vec<Literal>) -> Clause {
        let mut literals = literals;
        literals.sort();
        literals.dedup();
        Clause { literals, id }
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn is_tautology(&self) -> bool {
        self.literals.iter().any(|l| {
            !l.positive && self.literals.iter().any(|m| m.positive && m.atom == l.atom)
        }) || self
            .literals
            .iter()
            .any(|l| l.positive && matches!(&l.atom, Atom::Eq(a, b) if a == b))
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.literals
            .iter()
            .flat_map(|l| l.atom.args().into_iter().flat_map(Term::vars).collect::<Vec<_>>())
            .collect()
    }

    /// Universal closure of the clause as a formula.
    pub fn to_formula(&self) -> Formula {
        let body = Formula::disjunction(self.literals.iter().map(|l| {
            let a = l.atom.to_formula();
            if l.positive {
                a
            } else {
                Formula::not(a)
            }
        }))
        .unwrap_or(Formula::Falsum);
        let mut vars: Vec<String> = Vec::new();
        for l in &self.literals {
            for t in l.atom.args() {
                for v in t.vars() {
                    if !vars.contains(&v) {
                        vars.push(v);
                    }
                }
            }
        }
        Formula::forall(vars, body)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str("}")
    }
}

#[derive(Clone, Debug)]
enum Nnf {
    Lit(bool, Atom),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
    Forall(Vec<String>, Box<Nnf>),
    Exists(Vec<String>, Box<Nnf>),
    True,
    False,
}

fn nnf(f: &Formula, positive: bool) -> Nnf {
    match f {
        Formula::Pred(p, args) => Nnf::Lit(positive, Atom::Pred(p.clone(), args.clone())),
        Formula::Eq(l, r) => Nnf::Lit(positive, Atom::Eq(l.clone(), r.clone())),
        Formula::Falsum => {
            if positive {
                Nnf::False
            } else {
                Nnf::True
            }
        }
        Formula::Not(g) => nnf(g, !positive),
        Formula::And(l, r) => {
            let parts = vec![nnf(l, positive), nnf(r, positive)];
            if positive {
                Nnf::And(parts)
            } else {
                Nnf::Or(parts)
            }
        }
        Formula::Or(l, r) => {
            let parts = vec![nnf(l, positive), nnf(r, positive)];
            if positive {
                Nnf::Or(parts)
            } else {
                Nnf::And(parts)
            }
        }
        Formula::Implies(l, r) => {
            let parts = vec![nnf(l, !positive), nnf(r, positive)];
            if positive {
                Nnf::Or(parts)
            } else {
                Nnf::And(parts)
            }
        }
        Formula::Iff(l, r) => {
            if positive {
                Nnf::And(vec![
                    Nnf::Or(vec![nnf(l, false), nnf(r, true)]),
                    Nnf::Or(vec![nnf(l, true), nnf(r, false)]),
                ])
            } else {
                Nnf::Or(vec![
                    Nnf::And(vec![nnf(l, true), nnf(r, false)]),
                    Nnf::And(vec![nnf(l, false), nnf(r, true)]),
                ])
            }
        }
        Formula::Forall(vs, body) => {
            let b = Box::new(nnf(body, positive));
            if positive {
                Nnf::Forall(vs.clone(), b)
            } else {
                Nnf::Exists(vs.clone(), b)
            }
        }
        Formula::Exists(vs, body) => {
            let b = Box::new(nnf(body, positive));
            if positive {
                Nnf::Exists(vs.clone(), b)
            } else {
                Nnf::Forall(vs.clone(), b)
            }
        }
    }
}

fn subst_term(t: &Term, env: &HashMap<String, Term>) -> Term {
    match t {
        Term::Var(v) => env.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Const(_) => t.clone(),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| subst_term(a, env)).collect()),
    }
}

fn subst_atom(a: &Atom, env: &HashMap<String, Term>) -> Atom {
    match a {
        Atom::Pred(p, args) => Atom::Pred(p.clone(), args.iter().map(|t| subst_term(t, env)).collect()),
        Atom::Eq(l, r) => Atom::Eq(subst_term(l, env), subst_term(r, env)),
    }
}

/// Free clause variables (after renaming) occurring in an NNF under `env`.
fn nnf_free_vars(n: &Nnf, env: &HashMap<String, Term>, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match n {
        Nnf::Lit(_, a) => {
            for t in a.args() {
                for v in t.vars() {
                    if bound.contains(&v) {
                        continue;
                    }
                    match env.get(&v) {
                        Some(term) => out.extend(term.vars()),
                        None => {
                            out.insert(v);
                        }
                    }
                }
            }
        }
        Nnf::And(ps) | Nnf::Or(ps) => ps.iter().for_each(|p| nnf_free_vars(p, env, bound, out)),
        Nnf::Forall(vs, b) | Nnf::Exists(vs, b) => {
            let depth = bound.len();
            bound.extend(vs.iter().cloned());
            nnf_free_vars(b, env, bound, out);
            bound.truncate(depth);
        }
        Nnf::True | Nnf::False => {}
    }
}

/// Stateful clausifier; Skolem and definition symbols are numbered across
/// every formula added to the same instance.
#[derive(Debug, Default)]
pub struct Clausifier {
    skolems: usize,
    definitions: usize,
    vars: usize,
    clauses: Vec<Vec<Literal>>,
    support_from: Option<usize>,
}

impl Clausifier {
    pub fn new() -> Clausifier {
        Clausifier::default()
    }

    /// Adds a closed formula (free variables are read as universal).
    pub fn add(&mut self, f: &Formula) {
        let n = nnf(f, true);
        let sk = self.skolemize(&n, &HashMap::new(), &[]);
        let clauses = self.distribute(sk);
        self.clauses.extend(clauses);
    }

    fn fresh_var(&mut self) -> String {
        self.vars += 1;
        format!("X{}", self.vars)
    }

    /// Removes quantifiers; universals become fresh clause variables,
    /// existentials Skolem terms over the universals they depend on.
    fn skolemize(&mut self, n: &Nnf, env: &HashMap<String, Term>, universals: &[String]) -> Nnf {
        match n {
            Nnf::Lit(pos, a) => Nnf::Lit(*pos, subst_atom(a, env)),
            Nnf::And(ps) => Nnf::And(ps.iter().map(|p| self.skolemize(p, env, universals)).collect()),
            Nnf::Or(ps) => Nnf::Or(ps.iter().map(|p| self.skolemize(p, env, universals)).collect()),
            Nnf::Forall(vs, body) => {
                let mut env = env.clone();
                let mut universals = universals.to_vec();
                for v in vs {
                    let fresh = self.fresh_var();
                    env.insert(v.clone(), Term::Var(fresh.clone()));
                    universals.push(fresh);
                }
                self.skolemize(body, &env, &universals)
            }
            Nnf::Exists(vs, body) => {
                let mut free = BTreeSet::new();
                nnf_free_vars(n, env, &mut Vec::new(), &mut free);
                let deps: Vec<Term> = universals
                    .iter()
                    .filter(|u| free.contains(*u))
                    .map(|u| Term::Var(u.clone()))
                    .collect();
                let mut env = env.clone();
                for v in vs {
                    self.skolems += 1;
                    let name = format!("{SKOLEM_PREFIX}{}", self.skolems);
                    let term = if deps.is_empty() { Term::Const(name) } else { Term::App(name, deps.clone()) };
                    env.insert(v.clone(), term);
                }
                self.skolemize(body, &env, universals)
            }
            Nnf::True => Nnf::True,
            Nnf::False => Nnf::False,
        }
    }

    fn distribute(&mut self, n: Nnf) -> Vec<Vec<Literal>> {
        match n {
            Nnf::Lit(pos, atom) => vec![vec![Literal::new(pos, atom)]],
            Nnf::True => vec![],
            Nnf::False => vec![vec![]],
            Nnf::And(parts) => parts.into_iter().flat_map(|p| self.distribute(p)).collect(),
            Nnf::Or(parts) => {
                let mut product: Vec<Vec<Literal>> = vec![vec![]];
                for part in parts {
                    let mut sub = self.distribute(part.clone());
                    if sub.is_empty() {
                        // a true disjunct
                        return vec![];
                    }
                    if product.len() * sub.len() > DISTRIBUTION_LIMIT && sub.len() > 1 {
                        sub = vec![vec![self.define(part)]];
                    }
                    let mut next = Vec::with_capacity(product.len() * sub.len());
                    for left in &product {
                        for right in &sub {
                            let mut c = left.clone();
                            c.extend(right.iter().cloned());
                            next.push(c);
                        }
                    }
                    product = next;
                }
                product
            }
            Nnf::Forall(..) | Nnf::Exists(..) => unreachable!("quantifiers removed before distribution"),
        }
    }

    /// Introduces `d(vars) → part` and returns the positive literal `d(vars)`.
    fn define(&mut self, part: Nnf) -> Literal {
        let mut free = BTreeSet::new();
        nnf_free_vars(&part, &HashMap::new(), &mut Vec::new(), &mut free);
        self.definitions += 1;
        let atom = Atom::Pred(
            format!("{DEFINITION_PREFIX}{}", self.definitions),
            free.into_iter().map(Term::Var).collect(),
        );
        let guard = Literal::new(false, atom.clone());
        for mut clause in self.distribute(part) {
            clause.push(guard.clone());
            self.clauses.push(clause);
        }
        Literal::new(true, atom)
    }

    /// Clauses of formulas added from now on form the set of support.
    pub fn mark_support(&mut self) {
        self.support_from = Some(self.clauses.len());
    }

    /// Finished clause set, including equality axioms when needed. Tautologies
    /// are dropped and duplicate literals merged.
    pub fn finish(self) -> Vec<Clause> {
        let (mut background, support) = self.finish_split();
        background.extend(support);
        background
    }

    /// Like [`Clausifier::finish`], but separated into background clauses
    /// (including equality axioms) and the set of support. Ids are shared.
    pub fn finish_split(self) -> (Vec<Clause>, Vec<Clause>) {
        let raw = self.clauses;
        let split = self.support_from.unwrap_or(raw.len());
        let uses_eq = raw.iter().flatten().any(|l| matches!(l.atom, Atom::Eq(..)));
        let mut id = 0;
        let mut make = |lits: &[Literal]| {
            id += 1;
            Clause::new(id, lits.to_vec())
        };
        let mut background: Vec<Clause> = raw[..split].iter().map(|l| make(l)).filter(|c| !c.is_tautology()).collect();
        let support: Vec<Clause> = raw[split..].iter().map(|l| make(l)).filter(|c| !c.is_tautology()).collect();
        if uses_eq {
            background.extend(equality_axioms(&raw).iter().map(|l| make(l)));
        }
        (background, support)
    }
}

fn collect_term_functions(t: &Term, funcs: &mut BTreeMap<String, usize>) {
    if let Term::App(f, args) = t {
        funcs.insert(f.clone(), args.len());
        args.iter().for_each(|a| collect_term_functions(a, funcs));
    }
}

fn equality_axioms(clauses: &[Vec<Literal>]) -> Vec<Vec<Literal>> {
    let mut preds: BTreeMap<String, usize> = BTreeMap::new();
    let mut funcs: BTreeMap<String, usize> = BTreeMap::new();
    for lit in clauses.iter().flatten() {
        if let Atom::Pred(p, args) = &lit.atom {
            preds.insert(p.clone(), args.len());
        }
        for t in lit.atom.args() {
            collect_term_functions(t, &mut funcs);
        }
    }
    let x = |i: usize| Term::Var(format!("E{i}"));
    let eq = |pos: bool, a: Term, b: Term| Literal::new(pos, Atom::Eq(a, b));
    let mut out = vec![
        vec![eq(true, x(1), x(1))],
        vec![eq(false, x(1), x(2)), eq(true, x(2), x(1))],
        vec![eq(false, x(1), x(2)), eq(false, x(2), x(3)), eq(true, x(1), x(3))],
    ];
    let args = |n: usize| (1..=n).map(x).collect::<Vec<_>>();
    let replaced = |n: usize, i: usize| {
        let mut a = args(n);
        a[i] = x(0);
        a
    };
    for (p, &n) in &preds {
        for i in 0..n {
            out.push(vec![
                eq(false, x(i + 1), x(0)),
                Literal::new(false, Atom::Pred(p.clone(), args(n))),
                Literal::new(true, Atom::Pred(p.clone(), replaced(n, i))),
            ]);
        }
    }
    for (f, &n) in &funcs {
        for i in 0..n {
            out.push(vec![
                eq(false, x(i + 1), x(0)),
                eq(true, Term::App(f.clone(), args(n)), Term::App(f.clone(), replaced(n, i))),
            ]);
        }
    }
    out
}

/// Clauses of a single closed formula.
pub fn clausify(f: &Formula) -> Vec<Clause> {
    let mut c = Clausifier::new();
    c.add(f);
    c.finish()
}

/// Clauses of `premises ∪ {¬goal}`.
pub fn clausify_refutation(premises: &[Formula], goal: &Formula) -> Vec<Clause> {
    let mut c = Clausifier::new();
    for p in premises {
        c.add(p);
    }
    c.add(&Formula::not(goal.clone()));
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Term {
        Term::var(n)
    }

    fn p(name: &str, args: &[&str]) -> Formula {
        Formula::pred(name, args.iter().map(|a| v(a)).collect())
    }

    #[test]
    fn congruence_reflexivity_is_one_unit_clause() {
        let f = Formula::forall(["a", "b"], p("equidistant", &["a", "b", "b", "a"]));
        let cs = clausify(&f);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].literals.len(), 1);
        let lit = &cs[0].literals[0];
        assert!(lit.positive);
        match &lit.atom {
            Atom::Pred(name, args) => {
                assert_eq!(name, "equidistant");
                assert_eq!(args[0], args[3]);
                assert_eq!(args[1], args[2]);
                assert!(args.iter().all(|a| matches!(a, Term::Var(_))));
            }
            other => panic!("unexpected atom {other:?}"),
        }
    }

    #[test]
    fn segment_construction_skolemizes_over_four_universals() {
        let f = Formula::forall(
            ["a", "b", "c", "d"],
            Formula::exists(
                ["e"],
                Formula::and(p("equidistant", &["b", "e", "c", "d"]), p("between", &["a", "b", "e"])),
            ),
        );
        let cs = clausify(&f);
        assert_eq!(cs.len(), 2);
        for c in &cs {
            let sk: Vec<&Term> = c.literals[0]
                .atom
                .args()
                .into_iter()
                .filter(|t| matches!(t, Term::App(name, _) if name.starts_with(SKOLEM_PREFIX)))
                .collect();
            assert_eq!(sk.len(), 1);
            match sk[0] {
                Term::App(name, args) => {
                    assert_eq!(name, "__sk1");
                    assert_eq!(args.len(), 4);
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn negated_betweenness_identity_gives_ground_clauses() {
        let f = Formula::not(Formula::forall(
            ["a", "b"],
            Formula::implies(p("between", &["a", "b", "a"]), Formula::eq(v("a"), v("b"))),
        ));
        let cs = clausify(&f);
        let c1 = Term::constant("__sk1");
        let c2 = Term::constant("__sk2");
        let between = Clause::new(0, vec![Literal::new(
            true,
            Atom::Pred("between".into(), vec![c1.clone(), c2.clone(), c1.clone()]),
        )]);
        let diseq = Clause::new(0, vec![Literal::new(false, Atom::Eq(c1, c2))]);
        assert!(cs.iter().any(|c| c.literals == between.literals));
        assert!(cs.iter().any(|c| c.literals == diseq.literals));
        // reflexivity, symmetry, transitivity, 3 congruence clauses for between
        assert_eq!(cs.len(), 2 + 3 + 3);
    }

    #[test]
    fn falsum_and_tautologies() {
        assert_eq!(clausify(&Formula::Falsum).len(), 1);
        assert!(clausify(&Formula::Falsum)[0].is_empty());
        assert!(clausify(&Formula::not(Formula::Falsum)).is_empty());
        let taut = Formula::or(p("p", &[]), Formula::not(p("p", &[])));
        assert!(clausify(&taut).is_empty());
    }

    #[test]
    fn large_products_are_defined_not_distributed() {
        // (a1 ∧ b1) ∨ ... ∨ (a8 ∧ b8) would distribute to 256 clauses.
        let parts = (0..8).map(|i| Formula::and(p(&format!("a{i}"), &[]), p(&format!("b{i}"), &[])));
        let f = Formula::disjunction(parts).unwrap();
        let cs = clausify(&f);
        assert!(cs.len() <= 2 * DISTRIBUTION_LIMIT, "{} clauses", cs.len());
        assert!(cs.iter().any(|c| c
            .literals
            .iter()
            .any(|l| matches!(&l.atom, Atom::Pred(n, _) if n.starts_with(DEFINITION_PREFIX)))));
    }
}
