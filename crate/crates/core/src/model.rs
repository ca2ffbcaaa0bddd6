//! Finite interpretations: evaluation and bounded countermodel search.
//!
//! The search grounds `premises ∧ ¬goal` over the domain `{0..n-1}`
//! (quantifiers become finite conjunctions and disjunctions, constants and
//! function values are one-hot encoded) and hands the result to the SAT
//! solver. Every model found is re-checked with [`evaluate`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::fol::{Formula, Term};
use crate::sat::{Lit, SatResult, Solver};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table<T> {
    pub arity: usize,
    /// Indexed by the argument tuple read as a base-n number, first argument
    /// most significant.
    pub values: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    pub size: usize,
    pub constants: BTreeMap<String, usize>,
    pub predicates: BTreeMap<String, Table<bool>>,
    pub functions: BTreeMap<String, Table<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("symbol `{0}` is not interpreted by the model")]
    UninterpretedSymbol(String),
    #[error("variable `{0}` is unbound")]
    UnboundVariable(String),
}

fn tuple_index(n: usize, args: &[usize]) -> usize {
    args.iter().fold(0, |acc, &a| acc * n + a)
}

fn tuples(n: usize, arity: usize) -> impl Iterator<Item = Vec<usize>> {
    let count = n.pow(arity as u32);
    (0..count).map(move |mut i| {
        let mut t = vec![0; arity];
        for slot in t.iter_mut().rev() {
            *slot = i % n;
            i /= n;
        }
        t
    })
}

impl Model {
    pub fn new(size: usize) -> Model {
        Model { size, constants: BTreeMap::new(), predicates: BTreeMap::new(), functions: BTreeMap::new() }
    }

    pub fn set_predicate(&mut self, name: &str, arity: usize, holds: impl Fn(&[usize]) -> bool) {
        let values = tuples(self.size, arity).map(|t| holds(&t)).collect();
        self.predicates.insert(name.to_string(), Table { arity, values });
    }

    pub fn set_function(&mut self, name: &str, arity: usize, f: impl Fn(&[usize]) -> usize) {
        let values = tuples(self.size, arity).map(|t| f(&t)).collect();
        self.functions.insert(name.to_string(), Table { arity, values });
    }

    pub fn term_value(&self, t: &Term, env: &[(String, usize)]) -> Result<usize, EvalError> {
        match t {
            Term::Var(v) => env
                .iter()
                .rev()
                .find(|(name, _)| name == v)
                .map(|(_, e)| *e)
                .ok_or_else(|| EvalError::UnboundVariable(v.clone())),
            Term::Const(c) => self.constants.get(c).copied().ok_or_else(|| EvalError::UninterpretedSymbol(c.clone())),
            Term::App(f, args) => {
                let table = self.functions.get(f).ok_or_else(|| EvalError::UninterpretedSymbol(f.clone()))?;
                let vals = args.iter().map(|a| self.term_value(a, env)).collect::<Result<Vec<_>, _>>()?;
                Ok(table.values[tuple_index(self.size, &vals)])
            }
        }
    }

    fn eval(&self, f: &Formula, env: &mut Vec<(String, usize)>) -> Result<bool, EvalError> {
        Ok(match f {
            Formula::Falsum => false,
            Formula::Pred(p, args) => {
                let table = self.predicates.get(p).ok_or_else(|| EvalError::UninterpretedSymbol(p.clone()))?;
                let vals = args.iter().map(|a| self.term_value(a, env)).collect::<Result<Vec<_>, _>>()?;
                table.values[tuple_index(self.size, &vals)]
            }
            Formula::Eq(l, r) => self.term_value(l, env)? == self.term_value(r, env)?,
            Formula::Not(g) => !self.eval(g, env)?,
            Formula::And(l, r) => self.eval(l, env)? && self.eval(r, env)?,
            Formula::Or(l, r) => self.eval(l, env)? || self.eval(r, env)?,
            Formula::Implies(l, r) => !self.eval(l, env)? || self.eval(r, env)?,
            Formula::Iff(l, r) => self.eval(l, env)? == self.eval(r, env)?,
            Formula::Forall(vs, body) => self.quantify(vs, body, env, true)?,
            Formula::Exists(vs, body) => self.quantify(vs, body, env, false)?,
        })
    }

    fn quantify(&self, vs: &[String], body: &Formula, env: &mut Vec<(String, usize)>, universal: bool) -> Result<bool, EvalError> {
        for t in tuples(self.size, vs.len()) {
            let depth = env.len();
            env.extend(vs.iter().cloned().zip(t));
            let v = self.eval(body, env);
            env.truncate(depth);
            if v? != universal {
                return Ok(!universal);
            }
        }
        Ok(universal)
    }

    /// For a goal of the form `∀x̄. body`, the first assignment (in
    /// lexicographic order) under which `body` is false.
    pub fn failing_instance(&self, goal: &Formula) -> Option<Vec<(String, usize)>> {
        let mut vars = Vec::new();
        let mut body = goal;
        while let Formula::Forall(vs, b) = body {
            vars.extend(vs.iter().cloned());
            body = b;
        }
        if vars.is_empty() {
            return None;
        }
        tuples(self.size, vars.len()).find_map(|t| {
            let mut env: Vec<(String, usize)> = vars.iter().cloned().zip(t).collect();
            match self.eval(body, &mut env) {
                Ok(false) => Some(env),
                _ => None,
            }
        })
    }
}

/// Truth value of `f` in `m` with the free variables bound by `env`.
pub fn evaluate(f: &Formula, m: &Model, env: &BTreeMap<String, usize>) -> Result<bool, EvalError> {
    let mut stack: Vec<(String, usize)> = env.iter().map(|(k, v)| (k.clone(), *v)).collect();
    m.eval(f, &mut stack)
}

/// `domain = {0..n-1}`, the constants, then one line per true atom.
impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "domain = {{0..{}}}", self.size - 1)?;
        for (c, v) in &self.constants {
            writeln!(f, "{c} = {v}")?;
        }
        for (name, table) in &self.functions {
            for t in tuples(self.size, table.arity) {
                let args: Vec<String> = t.iter().map(usize::to_string).collect();
                writeln!(f, "{name}({}) = {}", args.join(","), table.values[tuple_index(self.size, &t)])?;
            }
        }
        for (name, table) in &self.predicates {
            for t in tuples(self.size, table.arity) {
                if table.values[tuple_index(self.size, &t)] {
                    if t.is_empty() {
                        writeln!(f, "{name}")?;
                    } else {
                        let args: Vec<String> = t.iter().map(usize::to_string).collect();
                        writeln!(f, "{name}({})", args.join(","))?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Symbols of a formula set, with arities.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub constants: BTreeSet<String>,
    pub predicates: BTreeMap<String, usize>,
    pub functions: BTreeMap<String, usize>,
}

impl Signature {
    pub fn of<'a>(formulas: impl IntoIterator<Item = &'a Formula>) -> Signature {
        let mut sig = Signature::default();
        for f in formulas {
            sig.constants.extend(f.constants());
            sig.predicates.extend(f.predicates());
            sig.functions.extend(f.functions());
        }
        sig
    }

    /// Every interpretation of the signature over `{0..n-1}`. Only usable for
    /// tiny signatures; intended as a brute-force oracle.
    pub fn all_models(&self, n: usize) -> Vec<Model> {
        let mut models = vec![Model::new(n)];
        for c in &self.constants {
            models = models
                .into_iter()
                .flat_map(|m| {
                    (0..n).map(move |v| {
                        let mut m = m.clone();
                        m.constants.insert(c.clone(), v);
                        m
                    })
                })
                .collect();
        }
        for (name, &arity) in &self.functions {
            let cells = n.pow(arity as u32);
            let count = n.pow(cells as u32);
            models = models
                .into_iter()
                .flat_map(|m| {
                    (0..count).map(move |mut code| {
                        let mut m = m.clone();
                        let values = (0..cells)
                            .map(|_| {
                                let v = code % n;
                                code /= n;
                                v
                            })
                            .collect();
                        m.functions.insert(name.clone(), Table { arity, values });
                        m
                    })
                })
                .collect();
        }
        for (name, &arity) in &self.predicates {
            let cells = n.pow(arity as u32);
            models = models
                .into_iter()
                .flat_map(|m| {
                    (0..1u64 << cells).map(move |bits| {
                        let mut m = m.clone();
                        let values = (0..cells).map(|i| (bits >> i) & 1 == 1).collect();
                        m.predicates.insert(name.clone(), Table { arity, values });
                        m
                    })
                })
                .collect();
        }
        models
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FinderLimits {
    pub max_size: usize,
    pub budget: Duration,
}

impl Default for FinderLimits {
    fn default() -> Self {
        FinderLimits { max_size: 3, budget: Duration::from_secs(3) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FinderResult {
    Found(Model),
    /// No model exists up to the size limit.
    NoneUpTo(usize),
    /// Budget exhausted or cancelled before all sizes were exhausted.
    GaveUp,
}

/// Searches for a model of `premises` in which `goal` is false.
pub fn find_countermodel(premises: &[Formula], goal: &Formula, limits: FinderLimits, cancel: Option<&AtomicBool>) -> FinderResult {
    let mut formulas: Vec<Formula> = premises.to_vec();
    formulas.push(Formula::not(goal.clone()));
    let deadline = Instant::now() + limits.budget;
    for n in 1..=limits.max_size {
        match model_of(&formulas, n, deadline, cancel) {
            Search::Found(m) => {
                let env = BTreeMap::new();
                let ok = premises.iter().all(|p| evaluate(p, &m, &env) == Ok(true)) && evaluate(goal, &m, &env) == Ok(false);
                if ok {
                    return FinderResult::Found(m);
                }
                log::error!("model finder produced an unverified model at size {n}");
                return FinderResult::GaveUp;
            }
            Search::None => {}
            Search::Aborted => return FinderResult::GaveUp,
        }
    }
    FinderResult::NoneUpTo(limits.max_size)
}

enum Search {
    Found(Model),
    None,
    Aborted,
}

/// A model of all `formulas` with exactly `n` elements.
fn model_of(formulas: &[Formula], n: usize, deadline: Instant, cancel: Option<&AtomicBool>) -> Search {
    let sig = Signature::of(formulas);
    let mut g = Grounder::new(n, &sig, deadline, cancel);
    for f in formulas {
        let Some(node) = g.ground(f, true, &mut Vec::new()) else { return Search::Aborted };
        if !g.assert(node) {
            return Search::None;
        }
    }
    match g.solver.solve(Some(deadline), cancel) {
        SatResult::Unsat => Search::None,
        SatResult::Unknown => Search::Aborted,
        SatResult::Sat(values) => Search::Found(g.extract(&sig, &values)),
    }
}

/// Ground formula in negation normal form.
#[derive(Clone, Debug)]
enum Node {
    Const(bool),
    Lit(Lit),
    And(Vec<Node>),
    Or(Vec<Node>),
}

fn and(parts: Vec<Node>) -> Node {
    let mut out = Vec::new();
    for p in parts {
        match p {
            Node::Const(true) => {}
            Node::Const(false) => return Node::Const(false),
            Node::And(inner) => out.extend(inner),
            other => out.push(other),
        }
    }
    match out.len() {
        0 => Node::Const(true),
        1 => out.pop().expect("one part"),
        _ => Node::And(out),
    }
}

fn or(parts: Vec<Node>) -> Node {
    let mut out = Vec::new();
    for p in parts {
        match p {
            Node::Const(false) => {}
            Node::Const(true) => return Node::Const(true),
            Node::Or(inner) => out.extend(inner),
            other => out.push(other),
        }
    }
    match out.len() {
        0 => Node::Const(false),
        1 => out.pop().expect("one part"),
        _ => Node::Or(out),
    }
}

struct Grounder<'a> {
    n: usize,
    solver: Solver,
    atoms: HashMap<(String, Vec<usize>), u32>,
    /// One-hot value variables of each constant, indexed by element; `None`
    /// where symmetry breaking forbids the value.
    constants: BTreeMap<String, Vec<Option<u32>>>,
    functions: HashMap<(String, Vec<usize>), Vec<u32>>,
    deadline: Instant,
    cancel: Option<&'a AtomicBool>,
    work: u64,
    aborted: bool,
}

impl<'a> Grounder<'a> {
    fn new(n: usize, sig: &Signature, deadline: Instant, cancel: Option<&'a AtomicBool>) -> Grounder<'a> {
        let mut g = Grounder {
            n,
            solver: Solver::new(),
            atoms: HashMap::new(),
            constants: BTreeMap::new(),
            functions: HashMap::new(),
            deadline,
            cancel,
            work: 0,
            aborted: false,
        };
        // The i-th constant only takes values 0..=i: any model can be
        // renumbered so that this holds.
        for (i, c) in sig.constants.iter().enumerate() {
            let vars: Vec<Option<u32>> = (0..n).map(|e| (e <= i).then(|| g.solver.new_var())).collect();
            g.exactly_one(&vars.iter().flatten().copied().collect::<Vec<_>>());
            g.constants.insert(c.clone(), vars);
        }
        for (f, &arity) in &sig.functions {
            for t in tuples(n, arity) {
                let vars: Vec<u32> = (0..n).map(|_| g.solver.new_var()).collect();
                g.exactly_one(&vars);
                g.functions.insert((f.clone(), t), vars);
            }
        }
        g
    }

    fn exactly_one(&mut self, vars: &[u32]) {
        self.solver.add_clause(&vars.iter().map(|&v| Lit::new(v, true)).collect::<Vec<_>>());
        for i in 0..vars.len() {
            for j in i + 1..vars.len() {
                self.solver.add_clause(&[Lit::new(vars[i], false), Lit::new(vars[j], false)]);
            }
        }
    }

    fn tick(&mut self) -> bool {
        self.work += 1;
        if self.work.is_multiple_of(4096) {
            let late = Instant::now() >= self.deadline;
            if late || self.cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                self.aborted = true;
            }
        }
        !self.aborted
    }

    fn atom(&mut self, p: &str, args: Vec<usize>) -> Lit {
        let key = (p.to_string(), args);
        let v = match self.atoms.get(&key) {
            Some(&v) => v,
            None => {
                let v = self.solver.new_var();
                self.atoms.insert(key, v);
                v
            }
        };
        Lit::new(v, true)
    }

    /// Possible values of a term, each with the condition under which the
    /// term takes it.
    fn term_options(&mut self, t: &Term, env: &[(String, usize)]) -> Vec<(Node, usize)> {
        match t {
            Term::Var(v) => {
                let e = env.iter().rev().find(|(name, _)| name == v).map(|(_, e)| *e).expect("closed formula");
                vec![(Node::Const(true), e)]
            }
            Term::Const(c) => self.constants[c]
                .iter()
                .enumerate()
                .filter_map(|(e, v)| v.map(|v| (Node::Lit(Lit::new(v, true)), e)))
                .collect(),
            Term::App(f, args) => {
                let mut combos: Vec<(Vec<Node>, Vec<usize>)> = vec![(vec![], vec![])];
                for a in args {
                    let opts = self.term_options(a, env);
                    combos = combos
                        .into_iter()
                        .flat_map(|(conds, vals)| {
                            opts.iter().map(move |(c, v)| {
                                let mut conds = conds.clone();
                                conds.push(c.clone());
                                let mut vals = vals.clone();
                                vals.push(*v);
                                (conds, vals)
                            })
                        })
                        .collect();
                }
                let mut out: Vec<(Node, usize)> = Vec::new();
                for (conds, vals) in combos {
                    let vars = self.functions[&(f.clone(), vals)].clone();
                    for (e, var) in vars.into_iter().enumerate() {
                        let mut c = conds.clone();
                        c.push(Node::Lit(Lit::new(var, true)));
                        out.push((and(c), e));
                    }
                }
                out
            }
        }
    }

    fn args_options(&mut self, args: &[Term], env: &[(String, usize)]) -> Vec<(Vec<Node>, Vec<usize>)> {
        let mut combos: Vec<(Vec<Node>, Vec<usize>)> = vec![(vec![], vec![])];
        for a in args {
            let opts = self.term_options(a, env);
            combos = combos
                .into_iter()
                .flat_map(|(conds, vals)| {
                    opts.iter().map(move |(c, v)| {
                        let mut conds = conds.clone();
                        conds.push(c.clone());
                        let mut vals = vals.clone();
                        vals.push(*v);
                        (conds, vals)
                    })
                })
                .collect();
        }
        combos
    }

    /// Grounds `f` (or its negation when `positive` is false). `None` when
    /// the budget ran out.
    fn ground(&mut self, f: &Formula, positive: bool, env: &mut Vec<(String, usize)>) -> Option<Node> {
        if !self.tick() {
            return None;
        }
        Some(match f {
            Formula::Falsum => Node::Const(!positive),
            Formula::Pred(p, args) => {
                let combos = self.args_options(args, env);
                let mut parts = Vec::with_capacity(combos.len());
                for (mut conds, vals) in combos {
                    let l = self.atom(p, vals);
                    conds.push(Node::Lit(if positive { l } else { !l }));
                    parts.push(and(conds));
                }
                or(parts)
            }
            Formula::Eq(l, r) => {
                let lo = self.term_options(l, env);
                let ro = self.term_options(r, env);
                let mut parts = Vec::new();
                for (lc, lv) in &lo {
                    for (rc, rv) in &ro {
                        if (lv == rv) == positive {
                            parts.push(and(vec![lc.clone(), rc.clone()]));
                        }
                    }
                }
                or(parts)
            }
            Formula::Not(g) => self.ground(g, !positive, env)?,
            Formula::And(l, r) | Formula::Or(l, r) => {
                let a = self.ground(l, positive, env)?;
                let b = self.ground(r, positive, env)?;
                if matches!(f, Formula::And(..)) == positive {
                    and(vec![a, b])
                } else {
                    or(vec![a, b])
                }
            }
            Formula::Implies(l, r) => {
                let a = self.ground(l, !positive, env)?;
                let b = self.ground(r, positive, env)?;
                if positive {
                    or(vec![a, b])
                } else {
                    and(vec![a, b])
                }
            }
            Formula::Iff(l, r) => {
                let lp = self.ground(l, true, env)?;
                let ln = self.ground(l, false, env)?;
                let rp = self.ground(r, true, env)?;
                let rn = self.ground(r, false, env)?;
                if positive {
                    or(vec![and(vec![lp, rp]), and(vec![ln, rn])])
                } else {
                    or(vec![and(vec![lp, rn]), and(vec![ln, rp])])
                }
            }
            Formula::Forall(vs, body) | Formula::Exists(vs, body) => {
                let conjunctive = matches!(f, Formula::Forall(..)) == positive;
                let mut parts = Vec::new();
                for t in tuples(self.n, vs.len()) {
                    let depth = env.len();
                    env.extend(vs.iter().cloned().zip(t));
                    let part = self.ground(body, positive, env);
                    env.truncate(depth);
                    let part = part?;
                    match (&part, conjunctive) {
                        (Node::Const(false), true) => return Some(Node::Const(false)),
                        (Node::Const(true), false) => return Some(Node::Const(true)),
                        _ => parts.push(part),
                    }
                }
                if conjunctive {
                    and(parts)
                } else {
                    or(parts)
                }
            }
        })
    }

    /// Literal equivalent (in the implied direction) to `node`.
    fn encode(&mut self, node: Node) -> Option<Lit> {
        match node {
            Node::Const(_) => unreachable!("constants are folded away"),
            Node::Lit(l) => Some(l),
            Node::And(parts) => {
                let x = self.solver.new_var();
                for p in parts {
                    let l = self.encode(p)?;
                    self.solver.add_clause(&[Lit::new(x, false), l]);
                }
                Some(Lit::new(x, true))
            }
            Node::Or(parts) => {
                let x = self.solver.new_var();
                let mut clause = vec![Lit::new(x, false)];
                for p in parts {
                    clause.push(self.encode(p)?);
                }
                self.solver.add_clause(&clause);
                Some(Lit::new(x, true))
            }
        }
    }

    /// Adds `node` as a constraint; false when it is trivially unsatisfiable.
    fn assert(&mut self, node: Node) -> bool {
        match node {
            Node::Const(b) => b,
            Node::Lit(l) => {
                self.solver.add_clause(&[l]);
                true
            }
            Node::And(parts) => parts.into_iter().all(|p| self.assert(p)),
            Node::Or(parts) => {
                let mut clause = Vec::new();
                for p in parts {
                    match self.encode(p) {
                        Some(l) => clause.push(l),
                        None => return false,
                    }
                }
                self.solver.add_clause(&clause);
                true
            }
        }
    }

    fn extract(&self, sig: &Signature, values: &[bool]) -> Model {
        let mut m = Model::new(self.n);
        for (c, vars) in &self.constants {
            let e = vars.iter().position(|v| v.is_some_and(|v| values[v as usize])).expect("exactly one value");
            m.constants.insert(c.clone(), e);
        }
        for (f, &arity) in &sig.functions {
            m.set_function(f, arity, |t| {
                let vars = &self.functions[&(f.clone(), t.to_vec())];
                vars.iter().position(|&v| values[v as usize]).expect("exactly one value")
            });
        }
        for (p, &arity) in &sig.predicates {
            m.set_predicate(p, arity, |t| {
                self.atoms.get(&(p.clone(), t.to_vec())).is_some_and(|&v| values[v as usize])
            });
        }
        m
    }
}
