//! Built-in saturation prover: given-clause binary resolution with factoring
//! and subsumption. Equality is handled through the axioms emitted by the
//! clausifier.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use crate::clausify::{self, Atom, Clausifier};
use crate::fol::{Formula, Term};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProverLimits {
    pub max_clauses: usize,
    pub max_time: Duration,
    pub max_weight: usize,
}

impl Default for ProverLimits {
    fn default() -> Self {
        ProverLimits { max_clauses: 100_000, max_time: Duration::from_secs(5), max_weight: 60 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Limit {
    Clauses,
    Time,
    Weight,
    Cancelled,
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Limit::Clauses => "clause limit",
            Limit::Time => "time limit",
            Limit::Weight => "weight limit",
            Limit::Cancelled => "cancelled",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProofResult {
    /// The empty clause was derived; the payload is the number of clauses in
    /// its derivation, input clauses included.
    Refuted(usize),
    Saturated,
    ResourceOut(Limit),
}

impl ProofResult {
    pub fn is_refuted(&self) -> bool {
        matches!(self, ProofResult::Refuted(_))
    }
}

/// Proves `goal` from `premises` without any search restriction.
pub fn prove(premises: &[Formula], goal: &Formula, limits: ProverLimits) -> ProofResult {
    prove_supported(&[], premises, goal, limits, None)
}

/// Proves `goal` from `background ∪ local`. Inferences are restricted to those
/// involving at least one clause descending from `local` or the negated goal,
/// which stays complete whenever `background` is satisfiable.
pub fn prove_supported(
    background: &[Formula],
    local: &[Formula],
    goal: &Formula,
    limits: ProverLimits,
    cancel: Option<&AtomicBool>,
) -> ProofResult {
    let mut c = Clausifier::new();
    let restricted = !local.is_empty() || *goal != Formula::Falsum;
    let support_all = background.is_empty() || !restricted;
    if support_all {
        c.mark_support();
    }
    for f in background {
        c.add(f);
    }
    if !support_all {
        c.mark_support();
    }
    for f in local {
        c.add(f);
    }
    c.add(&Formula::not(goal.clone()));
    let (background, support) = c.finish_split();
    let start = Instant::now();
    let run = |unit_only: bool, deadline: Instant| {
        let mut p = Prover::new(limits, cancel, deadline);
        p.unit_only = unit_only;
        for cl in &background {
            p.add_input(cl, false);
        }
        for cl in &support {
            p.add_input(cl, true);
        }
        p.run()
    };
    // A unit-resolution pass first: cheap, and complete for Horn problems.
    let first = run(true, start + limits.max_time.mul_f64(UNIT_PASS_SHARE));
    match first {
        ProofResult::Refuted(_) | ProofResult::ResourceOut(Limit::Cancelled) => first,
        _ => run(false, start + limits.max_time),
    }
}

/// Fraction of the time budget given to the unit-resolution pass.
const UNIT_PASS_SHARE: f64 = 0.3;

/// Match attempts allowed per subsumption test; a test that runs out counts
/// as "not subsumed".
const SUBSUMPTION_BUDGET: usize = 200;

type Sym = u32;

const AGE_PICK: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum T {
    Var(u32),
    App(Sym, Vec<T>),
}

impl T {
    fn weight(&self) -> usize {
        match self {
            T::Var(_) => 1,
            T::App(_, args) => 1 + args.iter().map(T::weight).sum::<usize>(),
        }
    }

    fn max_var(&self) -> Option<u32> {
        match self {
            T::Var(v) => Some(*v),
            T::App(_, args) => args.iter().filter_map(T::max_var).max(),
        }
    }

    fn shift(&self, by: u32) -> T {
        match self {
            T::Var(v) => T::Var(v + by),
            T::App(f, args) => T::App(*f, args.iter().map(|a| a.shift(by)).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Lit {
    pred: Sym,
    pos: bool,
    args: Vec<T>,
}

impl Lit {
    fn key(&self) -> (Sym, bool) {
        (self.pred, self.pos)
    }
}

#[derive(Clone, Debug)]
struct Cl {
    lits: Vec<Lit>,
    nvars: u32,
    weight: usize,
    mask: u64,
    /// Hashed set of function and constant symbols.
    syms: u64,
    parents: Vec<usize>,
    deleted: bool,
}

fn key_bit(k: (Sym, bool)) -> u64 {
    1u64 << ((k.0 as u64 * 2 + k.1 as u64) % 64)
}

fn symbol_bits(t: &T) -> u64 {
    match t {
        T::Var(_) => 0,
        T::App(f, args) => args.iter().fold(1u64 << (f % 64), |m, a| m | symbol_bits(a)),
    }
}

/// Cheap necessary conditions for subsumption, kept inline in the indexes.
#[derive(Clone, Copy, Debug)]
struct Sig {
    id: usize,
    len: usize,
    mask: u64,
    syms: u64,
}

impl Sig {
    fn may_subsume(&self, d: &Sig) -> bool {
        self.len <= d.len && self.mask & !d.mask == 0 && self.syms & !d.syms == 0
    }
}

type Subst = Vec<Option<T>>;

fn walk<'a>(t: &'a T, s: &'a Subst) -> &'a T {
    let mut t = t;
    while let T::Var(v) = t {
        match &s[*v as usize] {
            Some(b) => t = b,
            None => break,
        }
    }
    t
}

fn occurs(v: u32, t: &T, s: &Subst) -> bool {
    match walk(t, s) {
        T::Var(w) => *w == v,
        T::App(_, args) => args.iter().any(|a| occurs(v, a, s)),
    }
}

fn unify(a: &T, b: &T, s: &mut Subst) -> bool {
    let a = walk(a, s).clone();
    let b = walk(b, s).clone();
    match (&a, &b) {
        (T::Var(x), T::Var(y)) if x == y => true,
        (T::Var(x), t) | (t, T::Var(x)) => {
            if occurs(*x, t, s) {
                return false;
            }
            s[*x as usize] = Some(t.clone());
            true
        }
        (T::App(f, fa), T::App(g, ga)) => f == g && fa.len() == ga.len() && fa.iter().zip(ga).all(|(x, y)| unify(x, y, s)),
    }
}

fn apply(t: &T, s: &Subst) -> T {
    match walk(t, s) {
        T::Var(v) => T::Var(*v),
        T::App(f, args) => T::App(*f, args.iter().map(|a| apply(a, s)).collect()),
    }
}

/// One-way matching: binds variables of `pattern` only.
fn match_term(pattern: &T, target: &T, s: &mut Subst) -> bool {
    match pattern {
        T::Var(v) => match &s[*v as usize] {
            Some(b) => b == target,
            None => {
                s[*v as usize] = Some(target.clone());
                true
            }
        },
        T::App(f, args) => match target {
            T::App(g, targs) => f == g && args.len() == targs.len() && args.iter().zip(targs).all(|(p, t)| match_term(p, t, s)),
            T::Var(_) => false,
        },
    }
}

/// Does `c` subsume `d` (some instance of `c` is a sub-multiset of `d`)?
fn subsumes(c: &Cl, d: &Cl) -> bool {
    if c.lits.len() > d.lits.len() || c.mask & !d.mask != 0 || c.syms & !d.syms != 0 {
        return false;
    }
    let mut s: Subst = vec![None; c.nvars as usize];
    let mut used = vec![false; d.lits.len()];
    let mut budget = SUBSUMPTION_BUDGET;
    subsume_from(&c.lits, &d.lits, 0, &mut s, &mut used, &mut budget)
}

fn subsume_from(c: &[Lit], d: &[Lit], i: usize, s: &mut Subst, used: &mut [bool], budget: &mut usize) -> bool {
    if i == c.len() {
        return true;
    }
    let lit = &c[i];
    for j in 0..d.len() {
        if used[j] || d[j].key() != lit.key() {
            continue;
        }
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let mut s2 = s.clone();
        if lit.args.iter().zip(&d[j].args).all(|(p, t)| match_term(p, t, &mut s2)) {
            used[j] = true;
            if subsume_from(c, d, i + 1, &mut s2, used, budget) {
                return true;
            }
            used[j] = false;
        }
    }
    false
}

struct Prover<'a> {
    limits: ProverLimits,
    cancel: Option<&'a AtomicBool>,
    symbols: HashMap<String, Sym>,
    eq: Sym,
    clauses: Vec<Cl>,
    /// Processed clauses, by literal key: (clause, literal index).
    active: HashMap<(Sym, bool), Vec<(usize, usize)>>,
    /// Every kept clause, by each key it contains.
    containing: HashMap<(Sym, bool), Vec<Sig>>,
    /// Every kept clause, by the key of its first literal.
    by_first: HashMap<(Sym, bool), Vec<Sig>>,
    queue: BinaryHeap<Reverse<(usize, usize)>>,
    by_age: BinaryHeap<Reverse<usize>>,
    processed: Vec<bool>,
    picks: usize,
    generated: usize,
    kept: usize,
    dropped_heavy: bool,
    deadline: Instant,
    /// Only resolve when one parent is a unit clause.
    unit_only: bool,
}

enum Outcome {
    Kept,
    Discarded,
    Empty(usize),
}

impl<'a> Prover<'a> {
    fn new(limits: ProverLimits, cancel: Option<&'a AtomicBool>, deadline: Instant) -> Prover<'a> {
        let mut symbols = HashMap::new();
        symbols.insert("=".to_string(), 0);
        Prover {
            limits,
            cancel,
            symbols,
            eq: 0,
            clauses: Vec::new(),
            active: HashMap::new(),
            containing: HashMap::new(),
            by_first: HashMap::new(),
            queue: BinaryHeap::new(),
            by_age: BinaryHeap::new(),
            processed: Vec::new(),
            picks: 0,
            generated: 0,
            kept: 0,
            dropped_heavy: false,
            deadline,
            unit_only: false,
        }
    }

    fn sym(&mut self, name: &str) -> Sym {
        let next = self.symbols.len() as Sym;
        *self.symbols.entry(name.to_string()).or_insert(next)
    }

    fn convert_term(&mut self, t: &Term, vars: &mut HashMap<String, u32>) -> T {
        match t {
            Term::Var(v) => {
                let next = vars.len() as u32;
                T::Var(*vars.entry(v.clone()).or_insert(next))
            }
            Term::Const(c) => T::App(self.sym(c), vec![]),
            Term::App(f, args) => {
                let f = self.sym(f);
                T::App(f, args.iter().map(|a| self.convert_term(a, vars)).collect())
            }
        }
    }

    fn add_input(&mut self, c: &clausify::Clause, support: bool) {
        let mut vars = HashMap::new();
        let lits: Vec<Lit> = c
            .literals
            .iter()
            .map(|l| match &l.atom {
                Atom::Pred(p, args) => {
                    let pred = self.sym(p);
                    Lit { pred, pos: l.positive, args: args.iter().map(|a| self.convert_term(a, &mut vars)).collect() }
                }
                Atom::Eq(a, b) => {
                    let args = vec![self.convert_term(a, &mut vars), self.convert_term(b, &mut vars)];
                    Lit { pred: self.eq, pos: l.positive, args }
                }
            })
            .collect();
        let Some(cl) = self.normalize(lits, vec![]) else { return };
        let id = self.clauses.len();
        let empty = cl.lits.is_empty();
        self.store(cl);
        if empty {
            return;
        }
        if support {
            let w = self.clauses[id].weight;
            self.enqueue(w, id);
        } else {
            self.activate(id);
        }
    }

    /// Canonical clause: merged duplicates, sorted literals, variables
    /// numbered by first occurrence. `None` for tautologies.
    fn normalize(&self, mut lits: Vec<Lit>, parents: Vec<usize>) -> Option<Cl> {
        for _ in 0..2 {
            let mut map: HashMap<u32, u32> = HashMap::new();
            fn rename(t: &T, map: &mut HashMap<u32, u32>) -> T {
                match t {
                    T::Var(v) => {
                        let next = map.len() as u32;
                        T::Var(*map.entry(*v).or_insert(next))
                    }
                    T::App(f, args) => T::App(*f, args.iter().map(|a| rename(a, map)).collect()),
                }
            }
            lits = lits
                .iter()
                .map(|l| Lit { pred: l.pred, pos: l.pos, args: l.args.iter().map(|a| rename(a, &mut map)).collect() })
                .collect();
            lits.sort();
            lits.dedup();
        }
        for (i, l) in lits.iter().enumerate() {
            if l.pred == self.eq && l.pos && l.args[0] == l.args[1] {
                return None;
            }
            if lits[i + 1..].iter().any(|m| m.pred == l.pred && m.pos != l.pos && m.args == l.args) {
                return None;
            }
        }
        let nvars = lits.iter().flat_map(|l| l.args.iter().filter_map(T::max_var)).max().map_or(0, |m| m + 1);
        let weight = lits.iter().map(|l| 1 + l.args.iter().map(T::weight).sum::<usize>()).sum();
        let mask = lits.iter().fold(0, |m, l| m | key_bit(l.key()));
        let syms = lits.iter().flat_map(|l| &l.args).fold(0, |m, a| m | symbol_bits(a));
        Some(Cl { lits, nvars, weight, mask, syms, parents, deleted: false })
    }

    fn sig(id: usize, c: &Cl) -> Sig {
        Sig { id, len: c.lits.len(), mask: c.mask, syms: c.syms }
    }

    fn store(&mut self, cl: Cl) {
        let id = self.clauses.len();
        let sig = Self::sig(id, &cl);
        let mut keys: Vec<(Sym, bool)> = cl.lits.iter().map(Lit::key).collect();
        keys.dedup();
        if let Some(&first) = keys.first() {
            self.by_first.entry(first).or_default().push(sig);
        }
        for k in keys {
            self.containing.entry(k).or_default().push(sig);
        }
        self.clauses.push(cl);
        self.kept += 1;
    }

    fn activate(&mut self, id: usize) {
        for (j, l) in self.clauses[id].lits.iter().enumerate() {
            self.active.entry(l.key()).or_default().push((id, j));
        }
    }

    fn forward_subsumed(&self, d: &Cl) -> bool {
        let mut keys: Vec<(Sym, bool)> = d.lits.iter().map(Lit::key).collect();
        keys.dedup();
        let target = Self::sig(usize::MAX, d);
        keys.iter().any(|k| {
            self.by_first.get(k).is_some_and(|sigs| {
                sigs.iter().any(|sig| {
                    sig.may_subsume(&target) && {
                        let c = &self.clauses[sig.id];
                        !c.deleted && subsumes(c, d)
                    }
                })
            })
        })
    }

    fn backward_subsume(&mut self, id: usize) {
        let c = &self.clauses[id];
        let Some(ids) = c.lits.iter().map(|l| self.containing.get(&l.key())).min_by_key(|v| v.map_or(0, Vec::len)).flatten()
        else {
            return;
        };
        let own = Self::sig(id, c);
        let victims: Vec<usize> = ids
            .iter()
            .filter(|sig| sig.id != id && own.may_subsume(sig))
            .map(|sig| sig.id)
            .filter(|&i| !self.clauses[i].deleted && subsumes(c, &self.clauses[i]))
            .collect();
        for i in victims {
            self.clauses[i].deleted = true;
        }
    }

    fn consider(&mut self, lits: Vec<Lit>, parents: Vec<usize>) -> Outcome {
        let Some(cl) = self.normalize(lits, parents) else { return Outcome::Discarded };
        if cl.lits.is_empty() {
            self.store(cl);
            return Outcome::Empty(self.clauses.len() - 1);
        }
        if cl.weight > self.limits.max_weight {
            self.dropped_heavy = true;
            return Outcome::Discarded;
        }
        if self.forward_subsumed(&cl) {
            return Outcome::Discarded;
        }
        let w = cl.weight;
        self.store(cl);
        let id = self.clauses.len() - 1;
        self.backward_subsume(id);
        self.enqueue(w, id);
        Outcome::Kept
    }

    fn enqueue(&mut self, weight: usize, id: usize) {
        self.queue.push(Reverse((weight, id)));
        self.by_age.push(Reverse(id));
    }

    /// Lightest unprocessed clause, except that every `AGE_PICK`-th pick
    /// takes the oldest one.
    fn next_given(&mut self) -> Option<usize> {
        self.picks += 1;
        let oldest_first = self.picks.is_multiple_of(AGE_PICK);
        loop {
            let id = if oldest_first {
                self.by_age.pop().map(|Reverse(id)| id).or_else(|| self.queue.pop().map(|Reverse((_, id))| id))
            } else {
                self.queue.pop().map(|Reverse((_, id))| id).or_else(|| self.by_age.pop().map(|Reverse(id)| id))
            }?;
            if self.processed.len() < self.clauses.len() {
                self.processed.resize(self.clauses.len(), false);
            }
            if !self.clauses[id].deleted && !self.processed[id] {
                self.processed[id] = true;
                return Some(id);
            }
        }
    }

    fn derivation_length(&self, id: usize) -> usize {
        let mut seen = vec![false; self.clauses.len()];
        let mut stack = vec![id];
        let mut n = 0;
        while let Some(i) = stack.pop() {
            if !seen[i] {
                seen[i] = true;
                n += 1;
                stack.extend(&self.clauses[i].parents);
            }
        }
        n
    }

    fn log_stats(&self) {
        log::debug!("given {} generated {} kept {}", self.picks, self.generated, self.kept);
    }

    fn out_of_resources(&self) -> Option<Limit> {
        if self.cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            Some(Limit::Cancelled)
        } else if Instant::now() >= self.deadline {
            Some(Limit::Time)
        } else if self.kept > self.limits.max_clauses {
            Some(Limit::Clauses)
        } else {
            None
        }
    }

    fn run(mut self) -> ProofResult {
        if let Some(i) = self.clauses.iter().position(|c| c.lits.is_empty()) {
            return ProofResult::Refuted(self.derivation_length(i));
        }
        let mut steps = 0usize;
        while let Some(given) = self.next_given() {
            if let Some(limit) = self.out_of_resources() {
                self.log_stats();
                return ProofResult::ResourceOut(limit);
            }
            self.activate(given);
            let g = self.clauses[given].clone();
            let mut new: Vec<(Vec<Lit>, Vec<usize>)> = Vec::new();
            // Factors.
            for i in 0..g.lits.len() {
                for j in i + 1..g.lits.len() {
                    if g.lits[i].key() != g.lits[j].key() {
                        continue;
                    }
                    let mut s: Subst = vec![None; g.nvars as usize];
                    if g.lits[i].args.iter().zip(&g.lits[j].args).all(|(a, b)| unify(a, b, &mut s)) {
                        let lits = g
                            .lits
                            .iter()
                            .enumerate()
                            .filter(|&(k, _)| k != j)
                            .map(|(_, l)| Lit { pred: l.pred, pos: l.pos, args: l.args.iter().map(|a| apply(a, &s)).collect() })
                            .collect();
                        new.push((lits, vec![given]));
                    }
                }
            }
            // Resolvents against every processed clause, the given one included.
            for (i, gl) in g.lits.iter().enumerate() {
                let Some(partners) = self.active.get(&(gl.pred, !gl.pos)) else { continue };
                for &(other, j) in partners {
                    let o = &self.clauses[other];
                    if o.deleted || (self.unit_only && g.lits.len() > 1 && o.lits.len() > 1) {
                        continue;
                    }
                    steps += 1;
                    if steps.is_multiple_of(256) && self.out_of_resources().is_some() {
                        break;
                    }
                    let shift = g.nvars;
                    let mut s: Subst = vec![None; (g.nvars + o.nvars) as usize];
                    let ok = gl.args.iter().zip(&o.lits[j].args).all(|(a, b)| unify(a, &b.shift(shift), &mut s));
                    if !ok {
                        continue;
                    }
                    let mut lits: Vec<Lit> = Vec::with_capacity(g.lits.len() + o.lits.len() - 2);
                    for (k, l) in g.lits.iter().enumerate() {
                        if k != i {
                            lits.push(Lit { pred: l.pred, pos: l.pos, args: l.args.iter().map(|a| apply(a, &s)).collect() });
                        }
                    }
                    for (k, l) in o.lits.iter().enumerate() {
                        if k != j {
                            lits.push(Lit {
                                pred: l.pred,
                                pos: l.pos,
                                args: l.args.iter().map(|a| apply(&a.shift(shift), &s)).collect(),
                            });
                        }
                    }
                    new.push((lits, vec![given, other]));
                }
            }
            self.generated += new.len();
            for (lits, parents) in new {
                if let Outcome::Empty(id) = self.consider(lits, parents) {
                    return ProofResult::Refuted(self.derivation_length(id));
                }
            }
        }
        if let Some(limit) = self.out_of_resources() {
            ProofResult::ResourceOut(limit)
        } else if self.dropped_heavy {
            ProofResult::ResourceOut(Limit::Weight)
        } else {
            ProofResult::Saturated
        }
    }
}

/// All binary resolvents of two clauses after renaming them apart.
pub fn resolve(c1: &clausify::Clause, c2: &clausify::Clause) -> Vec<clausify::Clause> {
    let mut p = Prover::new(ProverLimits::default(), None, Instant::now());
    let mut convert = |c: &clausify::Clause| {
        let mut vars = HashMap::new();
        c.literals
            .iter()
            .map(|l| {
                let (pred, args) = match &l.atom {
                    Atom::Pred(name, args) => (p.sym(name), args.clone()),
                    Atom::Eq(a, b) => (0, vec![a.clone(), b.clone()]),
                };
                Lit { pred, pos: l.positive, args: args.iter().map(|a| p.convert_term(a, &mut vars)).collect() }
            })
            .collect::<Vec<_>>()
    };
    let a = convert(c1);
    let b = convert(c2);
    let names: HashMap<Sym, String> = p.symbols.iter().map(|(k, v)| (*v, k.clone())).collect();
    let na = a.iter().flat_map(|l| l.args.iter().filter_map(T::max_var)).max().map_or(0, |m| m + 1);
    let nb = b.iter().flat_map(|l| l.args.iter().filter_map(T::max_var)).max().map_or(0, |m| m + 1);
    let mut out = Vec::new();
    for (i, la) in a.iter().enumerate() {
        for (j, lb) in b.iter().enumerate() {
            if la.pred != lb.pred || la.pos == lb.pos {
                continue;
            }
            let mut s: Subst = vec![None; (na + nb) as usize];
            if !la.args.iter().zip(&lb.args).all(|(x, y)| unify(x, &y.shift(na), &mut s)) {
                continue;
            }
            let mut lits = Vec::new();
            lits.extend(a.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, l)| back(l, &s, 0, &names)));
            lits.extend(b.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, l)| back(l, &s, na, &names)));
            out.push(clausify::Clause::new(out.len() + 1, lits));
        }
    }
    out
}

fn back(l: &Lit, s: &Subst, shift: u32, names: &HashMap<Sym, String>) -> clausify::Literal {
    fn term(t: &T, names: &HashMap<Sym, String>) -> Term {
        match t {
            T::Var(v) => Term::Var(format!("V{v}")),
            T::App(f, args) if args.is_empty() => Term::Const(names[f].clone()),
            T::App(f, args) => Term::App(names[f].clone(), args.iter().map(|a| term(a, names)).collect()),
        }
    }
    let args: Vec<Term> = l.args.iter().map(|a| term(&apply(&a.shift(shift), s), names)).collect();
    let atom = if l.pred == 0 {
        Atom::Eq(args[0].clone(), args[1].clone())
    } else {
        Atom::Pred(names[&l.pred].clone(), args)
    };
    clausify::Literal::new(l.pos, atom)
}
