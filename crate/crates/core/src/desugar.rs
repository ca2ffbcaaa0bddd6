//! Translation of the surface AST into first-order declarations and proof trees.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::fol::{fix_constants, Formula, Term};
use crate::lexer::Location;
use crate::notation::{match_atom, parse_notation, NotationError, NotationPattern, NotationScope};
use crate::parser::{RawDocument, RawFormula, RawItem, RawProof, RawStep, RawStepKind, Sentence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DeclKind {
    Axiom,
    Definition,
    Lemma,
}

impl fmt::Display for DeclKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeclKind::Axiom => "axiom",
            DeclKind::Definition => "definition",
            DeclKind::Lemma => "lemma",
        })
    }
}

/// A closed formula usable as a premise by label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Premise {
    pub label: String,
    pub kind: DeclKind,
    pub formula: Formula,
    /// Library the premise was loaded from, if any.
    pub library: Option<String>,
}

/// Everything a document can see before its first line: notations and
/// premises of the included libraries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Scope {
    pub notations: NotationScope,
    pub premises: Vec<Premise>,
}

impl Scope {
    pub fn premise(&self, label: &str) -> Option<&Premise> {
        self.premises.iter().find(|p| p.label == label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub includes: Vec<String>,
    pub notations: Vec<NotationPattern>,
    pub decls: Vec<Decl>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decl {
    pub label: String,
    pub kind: DeclKind,
    pub formula: Formula,
    pub proof: Option<ProofTree>,
    pub loc: Location,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofTree {
    pub steps: Vec<Step>,
    /// Location of the block header (`Proof:`, `Note …:`, `Case …:`).
    pub loc: Location,
    pub end: Location,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub kind: StepKind,
    pub loc: Location,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseBranch {
    pub hypothesis: Formula,
    pub proof: ProofTree,
    pub loc: Location,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepKind {
    Assume(Formula),
    Derive { goal: Formula, since: Option<Formula>, by: Option<Vec<String>>, hence: bool },
    Note { goal: Formula, proof: ProofTree },
    Cases(Vec<CaseBranch>),
    /// `vars` occur free in `body`; every other name in it is a constant.
    Take { vars: Vec<String>, body: Formula, by: Option<Vec<String>> },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DesugarError {
    #[error(transparent)]
    Notation(#[from] NotationError),
    #[error("{loc}: unknown label `{label}`")]
    UnknownLabel { loc: Location, label: String },
    #[error("{loc}: unknown name `{name}`")]
    UnknownName { loc: Location, name: String },
    #[error("{loc}: name `{name}` is already in use")]
    NameInUse { loc: Location, name: String },
    #[error("{loc}: `{name}` is used with {found} arguments but elsewhere with {expected}")]
    ArityMismatch { loc: Location, name: String, expected: usize, found: usize },
    #[error("{loc}: `contradiction` may only be derived, not used inside a formula")]
    MisplacedContradiction { loc: Location },
}

impl DesugarError {
    pub fn location(&self) -> Location {
        match self {
            DesugarError::Notation(e) => e.location(),
            DesugarError::UnknownLabel { loc, .. }
            | DesugarError::UnknownName { loc, .. }
            | DesugarError::NameInUse { loc, .. }
            | DesugarError::ArityMismatch { loc, .. }
            | DesugarError::MisplacedContradiction { loc } => *loc,
        }
    }
}

/// All errors found in one document, in source order.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct DesugarErrors(pub Vec<DesugarError>);

impl fmt::Display for DesugarErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Wraps the free variables of a declaration sentence (except `bound`) in a
/// universal quantifier, in order of first occurrence.
pub fn implicit_quantify(f: &Formula, bound: &BTreeSet<String>) -> Formula {
    let free: Vec<String> = f.free_vars_ordered().into_iter().filter(|v| !bound.contains(v)).collect();
    Formula::forall(free, f.clone())
}

pub fn desugar(raw: &RawDocument, scope: &Scope) -> Result<Document, DesugarErrors> {
    let mut d = Desugarer {
        notations: scope.notations.clone(),
        labels: scope.premises.iter().map(|p| p.label.clone()).collect(),
        symbols: BTreeMap::new(),
        errors: Vec::new(),
    };
    for p in &scope.premises {
        d.record_symbols(&p.formula, Location::default());
    }
    let mut doc = Document { includes: Vec::new(), notations: Vec::new(), decls: Vec::new() };
    for item in &raw.items {
        match item {
            RawItem::Include { name, .. } => doc.includes.push(name.clone()),
            RawItem::Notation { label, pattern, loc } => {
                match parse_notation(label, pattern).and_then(|p| {
                    d.notations.register_in_place(p.clone(), *loc)?;
                    Ok(p)
                }) {
                    Ok(p) => doc.notations.push(p),
                    Err(e) => d.errors.push(e.into()),
                }
            }
            RawItem::Definition { label, sentence, loc } | RawItem::Axiom { label, sentence, loc } => {
                let kind = if matches!(item, RawItem::Axiom { .. }) { DeclKind::Axiom } else { DeclKind::Definition };
                if let Some(f) = d.declaration(sentence) {
                    doc.decls.push(Decl { label: label.clone(), kind, formula: f, proof: None, loc: *loc });
                }
                d.labels.insert(label.clone());
            }
            RawItem::Lemma { label, sentence, proof, loc, .. } => {
                if let Some(f) = d.declaration(sentence) {
                    let proof = proof.as_ref().map(|p| {
                        let (_, fixed) = fix_constants(&f);
                        d.proof(p, &mut fixed.clone())
                    });
                    doc.decls.push(Decl { label: label.clone(), kind: DeclKind::Lemma, formula: f, proof, loc: *loc });
                }
                d.labels.insert(label.clone());
            }
        }
    }
    if d.errors.is_empty() {
        Ok(doc)
    } else {
        d.errors.sort_by_key(|e| e.location());
        Err(DesugarErrors(d.errors))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Symbol {
    Predicate,
    Function,
}

struct Desugarer {
    notations: NotationScope,
    labels: BTreeSet<String>,
    symbols: BTreeMap<(Symbol, String), usize>,
    errors: Vec<DesugarError>,
}

/// How free identifiers of a sentence are read.
enum Names<'a> {
    /// Declaration level: free identifiers become quantified variables.
    Declaration,
    /// Inside a proof: free identifiers must be live constants.
    Proof(&'a [String]),
}

impl Desugarer {
    fn declaration(&mut self, s: &Sentence) -> Option<Formula> {
        let f = self.sentence(s, &Names::Declaration)?;
        if contains_falsum(&f) {
            self.errors.push(DesugarError::MisplacedContradiction { loc: s.loc });
            return None;
        }
        Some(implicit_quantify(&f, &BTreeSet::new()))
    }

    /// A proof sentence that is not allowed to mention `contradiction`.
    fn plain(&mut self, s: &Sentence, live: &[String]) -> Option<Formula> {
        let f = self.sentence(s, &Names::Proof(live))?;
        if contains_falsum(&f) {
            self.errors.push(DesugarError::MisplacedContradiction { loc: s.loc });
            return None;
        }
        Some(f)
    }

    fn sentence(&mut self, s: &Sentence, names: &Names<'_>) -> Option<Formula> {
        let before = self.errors.len();
        let f = self.formula(&s.formula, names, &mut Vec::new());
        if self.errors.len() > before {
            None
        } else {
            Some(f)
        }
    }

    fn formula(&mut self, raw: &RawFormula, names: &Names<'_>, bound: &mut Vec<String>) -> Formula {
        let bin = |this: &mut Self, l: &RawFormula, r: &RawFormula, bound: &mut Vec<String>| {
            (this.formula(l, names, bound), this.formula(r, names, bound))
        };
        match raw {
            RawFormula::Atom(span) => match match_atom(span, &self.notations) {
                Ok(f) => {
                    self.record_symbols(&f, span.loc);
                    match names {
                        Names::Declaration => f,
                        Names::Proof(live) => {
                            let mut map = BTreeMap::new();
                            for v in f.free_vars_ordered() {
                                if bound.contains(&v) {
                                    continue;
                                }
                                if live.contains(&v) {
                                    map.insert(v.clone(), Term::constant(v));
                                } else {
                                    self.errors.push(DesugarError::UnknownName { loc: span.loc, name: v });
                                }
                            }
                            f.substitute(&map)
                        }
                    }
                }
                Err(e) => {
                    self.errors.push(e.into());
                    Formula::Falsum
                }
            },
            RawFormula::Not(g) => Formula::not(self.formula(g, names, bound)),
            RawFormula::And(l, r) => {
                let (l, r) = bin(self, l, r, bound);
                Formula::and(l, r)
            }
            RawFormula::Or(l, r) => {
                let (l, r) = bin(self, l, r, bound);
                Formula::or(l, r)
            }
            RawFormula::Implies(l, r) => {
                let (l, r) = bin(self, l, r, bound);
                Formula::implies(l, r)
            }
            RawFormula::Iff(l, r) => {
                let (l, r) = bin(self, l, r, bound);
                Formula::iff(l, r)
            }
            RawFormula::Forall(vs, g) | RawFormula::Exists(vs, g) => {
                let depth = bound.len();
                bound.extend(vs.iter().cloned());
                let body = self.formula(g, names, bound);
                bound.truncate(depth);
                if matches!(raw, RawFormula::Forall(..)) {
                    Formula::forall(vs.clone(), body)
                } else {
                    Formula::exists(vs.clone(), body)
                }
            }
        }
    }

    fn record_symbols(&mut self, f: &Formula, loc: Location) {
        let entries: Vec<(Symbol, String, usize)> = f
            .predicates()
            .into_iter()
            .map(|(n, a)| (Symbol::Predicate, n, a))
            .chain(f.functions().into_iter().map(|(n, a)| (Symbol::Function, n, a)))
            .collect();
        for (kind, name, arity) in entries {
            match self.symbols.get(&(kind, name.clone())) {
                Some(&expected) if expected != arity => {
                    self.errors.push(DesugarError::ArityMismatch { loc, name, expected, found: arity })
                }
                Some(_) => {}
                None => {
                    self.symbols.insert((kind, name), arity);
                }
            }
        }
    }

    fn labels(&mut self, by: &Option<Vec<String>>, loc: Location) -> Option<Vec<String>> {
        if let Some(labels) = by {
            for l in labels {
                if !self.labels.contains(l) {
                    self.errors.push(DesugarError::UnknownLabel { loc, label: l.clone() });
                }
            }
        }
        by.clone()
    }

    fn proof(&mut self, raw: &RawProof, live: &mut Vec<String>) -> ProofTree {
        let mut steps: Vec<Step> = Vec::new();
        for step in &raw.steps {
            if let Some(s) = self.step(step, live) {
                match (steps.last_mut(), s.kind) {
                    (Some(Step { kind: StepKind::Cases(prev), .. }), StepKind::Cases(mut more)) => prev.append(&mut more),
                    (_, kind) => steps.push(Step { kind, loc: s.loc }),
                }
            }
        }
        ProofTree { steps, loc: raw.loc, end: raw.end }
    }

    fn step(&mut self, raw: &RawStep, live: &mut Vec<String>) -> Option<Step> {
        let kind = match &raw.kind {
            RawStepKind::Assume(s) => StepKind::Assume(self.plain(s, live)?),
            RawStepKind::Then { sentence, since, by } | RawStepKind::Hence { sentence, since, by } => {
                let goal = self.sentence(sentence, &Names::Proof(live));
                if let Some(g) = &goal {
                    if *g != Formula::Falsum && contains_falsum(g) {
                        self.errors.push(DesugarError::MisplacedContradiction { loc: sentence.loc });
                    }
                }
                let since = match since {
                    Some(s) => Some(self.plain(s, live)?),
                    None => None,
                };
                let by = self.labels(by, raw.loc);
                let hence = matches!(raw.kind, RawStepKind::Hence { .. });
                StepKind::Derive { goal: goal?, since, by, hence }
            }
            RawStepKind::Note { goal, proof } => {
                let goal = self.plain(goal, live);
                let proof = self.proof(proof, &mut live.clone());
                StepKind::Note { goal: goal?, proof }
            }
            RawStepKind::Case { hypothesis, proof } => {
                let hypothesis = self.plain(hypothesis, live);
                let proof = self.proof(proof, &mut live.clone());
                StepKind::Cases(vec![CaseBranch { hypothesis: hypothesis?, proof, loc: raw.loc }])
            }
            RawStepKind::Take { vars, sentence, by } => {
                let mut ok = true;
                for v in vars {
                    if live.contains(v) {
                        self.errors.push(DesugarError::NameInUse { loc: raw.loc, name: v.clone() });
                        ok = false;
                    }
                }
                let by = self.labels(by, raw.loc);
                let f = self.sentence(
                    &Sentence { formula: RawFormula::Exists(vars.clone(), Box::new(sentence.formula.clone())), loc: sentence.loc },
                    &Names::Proof(live),
                )?;
                live.extend(vars.iter().cloned());
                if contains_falsum(&f) {
                    self.errors.push(DesugarError::MisplacedContradiction { loc: sentence.loc });
                    return None;
                }
                let Formula::Exists(_, body) = f else { unreachable!("built as an existential") };
                if !ok {
                    return None;
                }
                StepKind::Take { vars: vars.clone(), body: *body, by }
            }
        };
        Some(Step { kind, loc: raw.loc })
    }
}

fn contains_falsum(f: &Formula) -> bool {
    match f {
        Formula::Falsum => true,
        Formula::Pred(..) | Formula::Eq(..) => false,
        Formula::Not(g) | Formula::Forall(_, g) | Formula::Exists(_, g) => contains_falsum(g),
        Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) | Formula::Iff(l, r) => {
            contains_falsum(l) || contains_falsum(r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::tokenize;
    use crate::parser::parse_source;

    fn geometry_scope() -> Scope {
        let mut notations = NotationScope::new();
        for (name, src) in [("between", "a-b-c"), ("equidistant", "a-b ≡ c-d")] {
            let p = parse_notation(name, &tokenize(src).unwrap()).unwrap();
            notations.register_in_place(p, Location::default()).unwrap();
        }
        let premises = ["DefMidpoint", "SegmentConstr"]
            .iter()
            .map(|l| Premise { label: l.to_string(), kind: DeclKind::Axiom, formula: Formula::Falsum, library: None })
            .collect();
        Scope { notations, premises }
    }

    fn run(src: &str) -> Result<Document, DesugarErrors> {
        desugar(&parse_source(src).unwrap(), &geometry_scope())
    }

    #[test]
    fn implicit_quantification_uses_first_occurrence_order() {
        let doc = run("Axiom A: b-a-c implies a = b.").unwrap();
        match &doc.decls[0].formula {
            Formula::Forall(vs, _) => assert_eq!(vs, &["b", "a", "c"]),
            other => panic!("{other}"),
        }
        let once = doc.decls[0].formula.clone();
        assert_eq!(implicit_quantify(&once, &BTreeSet::new()), once);
    }

    #[test]
    fn proof_names_become_constants() {
        let doc = run("Lemma L: for all b,m,c. midpoint(m,b,c) implies b-m-c.\nProof:\nAssume midpoint(m,b,c).\nHence b-m-c by DefMidpoint.\nqed.").unwrap();
        let steps = &doc.decls[0].proof.as_ref().unwrap().steps;
        let c = |n: &str| Term::constant(n);
        assert_eq!(steps[0].kind, StepKind::Assume(Formula::pred("midpoint", vec![c("m"), c("b"), c("c")])));
        assert!(matches!(&steps[1].kind, StepKind::Derive { hence: true, by: Some(l), .. } if l == &["DefMidpoint"]));
    }

    #[test]
    fn unknown_label_and_name() {
        let err = run("Lemma: for all a. p(a).\nProof:\nThen p(a) by NoSuchLemma.\nThen q(z).\nqed.").unwrap_err();
        assert_eq!(err.0.len(), 2);
        assert!(matches!(&err.0[0], DesugarError::UnknownLabel { loc, label } if loc.line == 3 && label == "NoSuchLemma"));
        assert!(matches!(&err.0[1], DesugarError::UnknownName { name, .. } if name == "z"));
    }

    #[test]
    fn forward_references_are_unknown() {
        let err = run("Lemma A: p.\nProof: Then p by B. qed.\nLemma B: p.").unwrap_err();
        assert!(matches!(&err.0[0], DesugarError::UnknownLabel { label, .. } if label == "B"));
    }

    #[test]
    fn consecutive_cases_merge() {
        let doc = run("Lemma: for all a. p(a).\nProof:\nCase q(a): Then p(a). qed.\nCase not q(a): Then p(a). qed.\nHence p(a).\nqed.").unwrap();
        let steps = &doc.decls[0].proof.as_ref().unwrap().steps;
        assert_eq!(steps.len(), 2);
        assert!(matches!(&steps[0].kind, StepKind::Cases(bs) if bs.len() == 2));
    }

    #[test]
    fn take_introduces_constants() {
        let doc = run("Lemma: for all a,b. p(a,b).\nProof:\nTake x such that a-x-b by SegmentConstr.\nThen q(x).\nqed.").unwrap();
        let steps = &doc.decls[0].proof.as_ref().unwrap().steps;
        match &steps[0].kind {
            StepKind::Take { vars, body, .. } => {
                assert_eq!(vars, &["x"]);
                assert_eq!(body, &Formula::pred("between", vec![Term::constant("a"), Term::var("x"), Term::constant("b")]));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            steps[1].kind,
            StepKind::Derive { goal: Formula::pred("q", vec![Term::constant("x")]), since: None, by: None, hence: false }
        );
        let err = run("Lemma: for all a. p(a).\nProof:\nTake a such that q(a).\nqed.").unwrap_err();
        assert!(matches!(&err.0[0], DesugarError::NameInUse { name, .. } if name == "a"));
    }

    #[test]
    fn contradiction_only_as_derived_goal() {
        let doc = run("Lemma: for all a. not p(a).\nProof:\nAssume p(a).\nHence contradiction.\nqed.").unwrap();
        let steps = &doc.decls[0].proof.as_ref().unwrap().steps;
        assert!(matches!(&steps[1].kind, StepKind::Derive { goal: Formula::Falsum, .. }));
        let err = run("Axiom A: p implies contradiction.").unwrap_err();
        assert!(matches!(err.0[0], DesugarError::MisplacedContradiction { .. }));
    }

    #[test]
    fn arity_mismatch() {
        let err = run("Axiom A: for all a,b. p(a) and p(a,b).").unwrap_err();
        assert!(matches!(&err.0[0], DesugarError::ArityMismatch { name, .. } if name == "p"));
    }
}
