//! First-order terms and formulas.
//!
//! Bound and free variables are `Term::Var`; the fixed constants of a proof
//! (and Skolem constants) are `Term::Const`. Equality is a logical symbol,
//! not a predicate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Term {
        Term::Const(name.into())
    }

    pub fn app(name: impl Into<String>, args: Vec<Term>) -> Term {
        Term::App(name.into(), args)
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone())
                }
            }
            Term::Const(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Variables of the term in first-occurrence order.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn contains_var(&self, name: &str) -> bool {
        match self {
            Term::Var(v) => v == name,
            Term::Const(_) => false,
            Term::App(_, args) => args.iter().any(|a| a.contains_var(name)),
        }
    }

    fn substitute(&self, map: &BTreeMap<String, Term>) -> Term {
        match self {
            Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Const(_) => self.clone(),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.substitute(map)).collect()),
        }
    }

    fn collect_constants(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(_) => {}
            Term::Const(c) => {
                out.insert(c.clone());
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_constants(out)),
        }
    }

    fn collect_functions(&self, out: &mut BTreeMap<String, usize>) {
        if let Term::App(f, args) = self {
            out.insert(f.clone(), args.len());
            args.iter().for_each(|a| a.collect_functions(out));
        }
    }

    /// Number of symbol occurrences.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Const(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) | Term::Const(v) => f.write_str(v),
            Term::App(name, args) => {
                write!(f, "{name}(")?;
                write_list(f, args)?;
                f.write_str(")")
            }
        }
    }
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    Pred(String, Vec<Term>),
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Forall(Vec<String>, Box<Formula>),
    Exists(Vec<String>, Box<Formula>),
    Falsum,
}

impl Formula {
    pub fn pred(name: impl Into<String>, args: Vec<Term>) -> Formula {
        Formula::Pred(name.into(), args)
    }

    pub fn eq(lhs: Term, rhs: Term) -> Formula {
        Formula::Eq(lhs, rhs)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn implies(l: Formula, r: Formula) -> Formula {
        Formula::Implies(Box::new(l), Box::new(r))
    }

    pub fn iff(l: Formula, r: Formula) -> Formula {
        Formula::Iff(Box::new(l), Box::new(r))
    }

    pub fn forall<S: Into<String>>(vars: impl IntoIterator<Item = S>, body: Formula) -> Formula {
        let vars: Vec<String> = vars.into_iter().map(Into::into).collect();
        if vars.is_empty() {
            body
        } else {
            Formula::Forall(vars, Box::new(body))
        }
    }

    pub fn exists<S: Into<String>>(vars: impl IntoIterator<Item = S>, body: Formula) -> Formula {
        let vars: Vec<String> = vars.into_iter().map(Into::into).collect();
        if vars.is_empty() {
            body
        } else {
            Formula::Exists(vars, Box::new(body))
        }
    }

    /// Left-nested conjunction; `None` for an empty input.
    pub fn conjunction(parts: impl IntoIterator<Item = Formula>) -> Option<Formula> {
        parts.into_iter().reduce(Formula::and)
    }

    /// Left-nested disjunction; `None` for an empty input.
    pub fn disjunction(parts: impl IntoIterator<Item = Formula>) -> Option<Formula> {
        parts.into_iter().reduce(Formula::or)
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Formula::Pred(..) | Formula::Eq(..) | Formula::Falsum)
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut Vec<String>) {
        let push_term_vars = |t: &Term, bound: &Vec<String>, out: &mut Vec<String>| {
            for v in t.vars() {
                if !bound.contains(&v) && !out.contains(&v) {
                    out.push(v);
                }
            }
        };
        match self {
            Formula::Pred(_, args) => args.iter().for_each(|t| push_term_vars(t, bound, out)),
            Formula::Eq(l, r) => {
                push_term_vars(l, bound, out);
                push_term_vars(r, bound, out);
            }
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) | Formula::Iff(l, r) => {
                l.collect_free(bound, out);
                r.collect_free(bound, out);
            }
            Formula::Forall(vs, body) | Formula::Exists(vs, body) => {
                let depth = bound.len();
                bound.extend(vs.iter().cloned());
                body.collect_free(bound, out);
                bound.truncate(depth);
            }
            Formula::Falsum => {}
        }
    }

    /// Free variables in order of first occurrence.
    pub fn free_vars_ordered(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        self.free_vars_ordered().into_iter().collect()
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars_ordered().is_empty()
    }

    fn for_each_term<'a>(&'a self, visit: &mut impl FnMut(&'a Term)) {
        match self {
            Formula::Pred(_, args) => args.iter().for_each(&mut *visit),
            Formula::Eq(l, r) => {
                visit(l);
                visit(r);
            }
            Formula::Not(f) | Formula::Forall(_, f) | Formula::Exists(_, f) => f.for_each_term(visit),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) | Formula::Iff(l, r) => {
                l.for_each_term(visit);
                r.for_each_term(visit);
            }
            Formula::Falsum => {}
        }
    }

    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.for_each_term(&mut |t| t.collect_constants(&mut out));
        out
    }

    /// Function symbols with their arities (constants excluded).
    pub fn functions(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        self.for_each_term(&mut |t| t.collect_functions(&mut out));
        out
    }

    /// Predicate symbols with their arities.
    pub fn predicates(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        self.collect_predicates(&mut out);
        out
    }

    fn collect_predicates(&self, out: &mut BTreeMap<String, usize>) {
        match self {
            Formula::Pred(p, args) => {
                out.insert(p.clone(), args.len());
            }
            Formula::Eq(..) | Formula::Falsum => {}
            Formula::Not(f) | Formula::Forall(_, f) | Formula::Exists(_, f) => f.collect_predicates(out),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) | Formula::Iff(l, r) => {
                l.collect_predicates(out);
                r.collect_predicates(out);
            }
        }
    }

    pub fn uses_equality(&self) -> bool {
        match self {
            Formula::Eq(..) => true,
            Formula::Pred(..) | Formula::Falsum => false,
            Formula::Not(f) | Formula::Forall(_, f) | Formula::Exists(_, f) => f.uses_equality(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) | Formula::Iff(l, r) => {
                l.uses_equality() || r.uses_equality()
            }
        }
    }

    /// Every variable name occurring in the formula, bound or free.
    fn all_var_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Forall(vs, f) | Formula::Exists(vs, f) => {
                out.extend(vs.iter().cloned());
                f.all_var_names(out);
            }
            Formula::Not(f) => f.all_var_names(out),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) | Formula::Iff(l, r) => {
                l.all_var_names(out);
                r.all_var_names(out);
            }
            _ => self.for_each_term(&mut |t| out.extend(t.vars())),
        }
    }

    /// Capture-avoiding substitution of free variables.
    ///
    /// A bound variable that would capture a variable of an inserted term is
    /// renamed to the smallest unused `<name><n>`.
    pub fn substitute(&self, map: &BTreeMap<String, Term>) -> Formula {
        if map.is_empty() {
            return self.clone();
        }
        match self {
            Formula::Pred(p, args) => Formula::Pred(p.clone(), args.iter().map(|a| a.substitute(map)).collect()),
            Formula::Eq(l, r) => Formula::Eq(l.substitute(map), r.substitute(map)),
            Formula::Not(f) => Formula::not(f.substitute(map)),
            Formula::And(l, r) => Formula::and(l.substitute(map), r.substitute(map)),
            Formula::Or(l, r) => Formula::or(l.substitute(map), r.substitute(map)),
            Formula::Implies(l, r) => Formula::implies(l.substitute(map), r.substitute(map)),
            Formula::Iff(l, r) => Formula::iff(l.substitute(map), r.substitute(map)),
            Formula::Forall(vs, body) => {
                let (vs, body) = substitute_binder(vs, body, map);
                Formula::Forall(vs, Box::new(body))
            }
            Formula::Exists(vs, body) => {
                let (vs, body) = substitute_binder(vs, body, map);
                Formula::Exists(vs, Box::new(body))
            }
            Formula::Falsum => Formula::Falsum,
        }
    }

    /// Number of symbol occurrences, used as a size measure.
    pub fn size(&self) -> usize {
        match self {
            Formula::Pred(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
            Formula::Eq(l, r) => 1 + l.size() + r.size(),
            Formula::Not(f) => 1 + f.size(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) | Formula::Iff(l, r) => {
                1 + l.size() + r.size()
            }
            Formula::Forall(vs, f) | Formula::Exists(vs, f) => vs.len() + f.size(),
            Formula::Falsum => 1,
        }
    }

    /// Flattens a left- or right-nested conjunction into its conjuncts.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(l, r) => {
                let mut out = l.conjuncts();
                out.extend(r.conjuncts());
                out
            }
            other => vec![other],
        }
    }
}

fn substitute_binder(vars: &[String], body: &Formula, map: &BTreeMap<String, Term>) -> (Vec<String>, Formula) {
    let free_in_body = body.free_vars();
    let mut inner: BTreeMap<String, Term> = map
        .iter()
        .filter(|(k, _)| !vars.contains(k) && free_in_body.contains(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    if inner.is_empty() {
        return (vars.to_vec(), body.clone());
    }
    let incoming: BTreeSet<String> = inner.values().flat_map(Term::vars).collect();
    let mut avoid = incoming.clone();
    body.all_var_names(&mut avoid);
    avoid.extend(vars.iter().cloned());
    avoid.extend(inner.keys().cloned());
    let mut new_vars = Vec::with_capacity(vars.len());
    for v in vars {
        if incoming.contains(v) {
            let fresh = fresh_name(v, &avoid);
            avoid.insert(fresh.clone());
            inner.insert(v.clone(), Term::Var(fresh.clone()));
            new_vars.push(fresh);
        } else {
            new_vars.push(v.clone());
        }
    }
    (new_vars, body.substitute(&inner))
}

/// Smallest `<base><n>` (n = 0, 1, ...) not in `taken`.
pub fn fresh_name(base: &str, taken: &BTreeSet<String>) -> String {
    (0..)
        .map(|n| format!("{base}{n}"))
        .find(|candidate| !taken.contains(candidate))
        .expect("unbounded counter")
}

/// Strips the outermost block of universal quantifiers, replacing each bound
/// variable by a constant of the same name.
///
/// Nested universal blocks are flattened. Returns the opened body and the
/// constants in binder order; a non-universal formula is returned unchanged.
pub fn fix_constants(f: &Formula) -> (Formula, Vec<String>) {
    fix_constants_avoiding(f, &BTreeSet::new())
}

/// Like [`fix_constants`], additionally avoiding the constant names in `taken`.
pub fn fix_constants_avoiding(f: &Formula, taken: &BTreeSet<String>) -> (Formula, Vec<String>) {
    let mut taken: BTreeSet<String> = taken.iter().cloned().chain(f.constants()).collect();
    let mut current = f.clone();
    let mut fixed = Vec::new();
    while let Formula::Forall(vars, body) = current {
        let mut map = BTreeMap::new();
        for v in &vars {
            let name = if taken.contains(v) { fresh_name(v, &taken) } else { v.clone() };
            taken.insert(name.clone());
            map.insert(v.clone(), Term::Const(name.clone()));
            fixed.push(name);
        }
        current = body.substitute(&map);
    }
    (current, fixed)
}

/// Replaces constants by terms (used when instantiating fixed constants).
pub fn replace_constants(f: &Formula, map: &BTreeMap<String, Term>) -> Formula {
    fn term(t: &Term, map: &BTreeMap<String, Term>) -> Term {
        match t {
            Term::Const(c) => map.get(c).cloned().unwrap_or_else(|| t.clone()),
            Term::Var(_) => t.clone(),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| term(a, map)).collect()),
        }
    }
    match f {
        Formula::Pred(p, args) => Formula::Pred(p.clone(), args.iter().map(|a| term(a, map)).collect()),
        Formula::Eq(l, r) => Formula::Eq(term(l, map), term(r, map)),
        Formula::Not(g) => Formula::not(replace_constants(g, map)),
        Formula::And(l, r) => Formula::and(replace_constants(l, map), replace_constants(r, map)),
        Formula::Or(l, r) => Formula::or(replace_constants(l, map), replace_constants(r, map)),
        Formula::Implies(l, r) => Formula::implies(replace_constants(l, map), replace_constants(r, map)),
        Formula::Iff(l, r) => Formula::iff(replace_constants(l, map), replace_constants(r, map)),
        Formula::Forall(vs, b) => Formula::Forall(vs.clone(), Box::new(replace_constants(b, map))),
        Formula::Exists(vs, b) => Formula::Exists(vs.clone(), Box::new(replace_constants(b, map))),
        Formula::Falsum => Formula::Falsum,
    }
}

// Display precedence: larger binds tighter.
const PREC_IFF: u8 = 1;
const PREC_IMPLIES: u8 = 2;
const PREC_OR: u8 = 3;
const PREC_AND: u8 = 4;
const PREC_UNARY: u8 = 5;

impl Formula {
    fn precedence(&self) -> u8 {
        match self {
            Formula::Iff(..) => PREC_IFF,
            Formula::Implies(..) => PREC_IMPLIES,
            Formula::Or(..) => PREC_OR,
            Formula::And(..) => PREC_AND,
            Formula::Forall(..) | Formula::Exists(..) => 0,
            _ => PREC_UNARY,
        }
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens || matches!(self, Formula::Forall(..) | Formula::Exists(..)) {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }

    fn fmt_binary(
        f: &mut fmt::Formatter<'_>,
        l: &Formula,
        op: &str,
        r: &Formula,
        prec: u8,
        right_assoc: bool,
    ) -> fmt::Result {
        let lp = l.precedence();
        let rp = r.precedence();
        let left_parens = if right_assoc { lp <= prec } else { lp < prec };
        let right_parens = if right_assoc { rp < prec } else { rp <= prec };
        l.fmt_operand(f, left_parens && lp != 0)?;
        write!(f, " {op} ")?;
        r.fmt_operand(f, right_parens && rp != 0)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Pred(p, args) if args.is_empty() => f.write_str(p),
            Formula::Pred(p, args) => {
                write!(f, "{p}(")?;
                write_list(f, args)?;
                f.write_str(")")
            }
            Formula::Eq(l, r) => write!(f, "{l} = {r}"),
            Formula::Not(inner) => match inner.as_ref() {
                Formula::Eq(l, r) => write!(f, "{l} ≠ {r}"),
                g if g.precedence() == PREC_UNARY => write!(f, "¬{g}"),
                g => write!(f, "¬({g})"),
            },
            Formula::And(l, r) => Formula::fmt_binary(f, l, "∧", r, PREC_AND, false),
            Formula::Or(l, r) => Formula::fmt_binary(f, l, "∨", r, PREC_OR, false),
            Formula::Implies(l, r) => Formula::fmt_binary(f, l, "→", r, PREC_IMPLIES, true),
            Formula::Iff(l, r) => Formula::fmt_binary(f, l, "↔", r, PREC_IFF, true),
            Formula::Forall(vs, body) => {
                write!(f, "∀{}. {body}", vs.join(","))
            }
            Formula::Exists(vs, body) => {
                write!(f, "∃{}. {body}", vs.join(","))
            }
            Formula::Falsum => f.write_str("⊥"),
        }
    }
}
