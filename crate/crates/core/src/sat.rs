//! A compact CDCL SAT solver (two watched literals, first-UIP learning,
//! activity-based branching, Luby restarts) with deadline and cancellation.

use std::cmp::Ordering as CmpOrdering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: u32, positive: bool) -> Lit {
        Lit(var * 2 + u32::from(!positive))
    }

    pub fn var(self) -> u32 {
        self.0 >> 1
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    Sat(Vec<bool>),
    Unsat,
    /// Deadline reached or cancelled.
    Unknown,
}

#[derive(Clone, Copy, PartialEq)]
struct Activity(f64, u32);

impl Eq for Activity {}

impl PartialOrd for Activity {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}

impl Ord for Activity {
    fn cmp(&self, other: &Self) -> CmpOrdering {
        self.0.total_cmp(&other.0).then_with(|| other.1.cmp(&self.1))
    }
}

#[derive(Default)]
pub struct Solver {
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    units: Vec<Lit>,
    /// 0 unassigned, 1 true, -1 false, per variable.
    values: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    heap: BinaryHeap<Activity>,
    phase: Vec<bool>,
    inconsistent: bool,
}

fn luby(mut i: u64) -> u64 {
    // Smallest k with 2^k - 1 >= i, then recurse into the sequence.
    loop {
        let mut k = 1u32;
        while (1u64 << k) - 1 < i {
            k += 1;
        }
        if (1u64 << k) - 1 == i {
            return 1u64 << (k - 1);
        }
        i -= (1u64 << (k - 1)) - 1;
    }
}

impl Solver {
    pub fn new() -> Solver {
        Solver { var_inc: 1.0, ..Solver::default() }
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len() + self.units.len()
    }

    pub fn new_var(&mut self) -> u32 {
        let v = self.values.len() as u32;
        self.values.push(0);
        self.level.push(0);
        self.reason.push(None);
        self.activity.push(0.0);
        self.phase.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap.push(Activity(0.0, v));
        v
    }

    pub fn add_clause(&mut self, lits: &[Lit]) {
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort();
        c.dedup();
        if c.windows(2).any(|w| w[0] == !w[1]) {
            return;
        }
        match c.len() {
            0 => self.inconsistent = true,
            1 => self.units.push(c[0]),
            _ => {
                let idx = self.clauses.len();
                self.watches[c[0].index()].push(idx);
                self.watches[c[1].index()].push(idx);
                self.clauses.push(c);
            }
        }
    }

    fn value(&self, l: Lit) -> i8 {
        let v = self.values[l.var() as usize];
        if l.is_positive() {
            v
        } else {
            -v
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: Lit, reason: Option<usize>) {
        let v = l.var() as usize;
        self.values[v] = if l.is_positive() { 1 } else { -1 };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Returns the index of a conflicting clause, if any.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let mut watch = std::mem::take(&mut self.watches[false_lit.index()]);
            let mut i = 0;
            let mut conflict = None;
            while i < watch.len() {
                let ci = watch[i];
                let clause = &mut self.clauses[ci];
                if clause[0] == false_lit {
                    clause.swap(0, 1);
                }
                let first = clause[0];
                if self.values[first.var() as usize] != 0 && self.value(first) == 1 {
                    i += 1;
                    continue;
                }
                let clause = &mut self.clauses[ci];
                let mut moved = false;
                for k in 2..clause.len() {
                    let l = clause[k];
                    let val = {
                        let v = self.values[l.var() as usize];
                        if l.is_positive() {
                            v
                        } else {
                            -v
                        }
                    };
                    if val != -1 {
                        clause.swap(1, k);
                        let new_watch = clause[1];
                        self.watches[new_watch.index()].push(ci);
                        watch.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                if self.value(first) == -1 {
                    conflict = Some(ci);
                    break;
                }
                self.enqueue(first, Some(ci));
                i += 1;
            }
            let rest = std::mem::take(&mut self.watches[false_lit.index()]);
            watch.extend(rest);
            self.watches[false_lit.index()] = watch;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn bump(&mut self, v: u32) {
        let a = &mut self.activity[v as usize];
        *a += self.var_inc;
        if *a > 1e100 {
            for x in &mut self.activity {
                *x *= 1e-100;
            }
            self.var_inc *= 1e-100;
            self.heap = (0..self.values.len() as u32)
                .map(|v| Activity(self.activity[v as usize], v))
                .collect();
        } else {
            self.heap.push(Activity(*a, v));
        }
    }

    fn analyze(&mut self, conflict: usize) -> (Vec<Lit>, u32) {
        let mut seen = vec![false; self.values.len()];
        let mut learnt = vec![Lit(0)];
        let mut counter = 0;
        let mut clause_idx = conflict;
        let mut skip_first = false;
        let mut idx = self.trail.len();
        let current = self.decision_level();
        let p = loop {
            let lits: Vec<Lit> = self.clauses[clause_idx].clone();
            for &q in lits.iter().skip(usize::from(skip_first)) {
                let v = q.var() as usize;
                if !seen[v] && self.level[v] > 0 {
                    seen[v] = true;
                    self.bump(q.var());
                    if self.level[v] == current {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if seen[self.trail[idx].var() as usize] {
                    break;
                }
            }
            let p = self.trail[idx];
            seen[p.var() as usize] = false;
            counter -= 1;
            if counter == 0 {
                break p;
            }
            clause_idx = self.reason[p.var() as usize].expect("implied literal has a reason");
            skip_first = true;
        };
        learnt[0] = !p;
        let mut back = 0;
        if learnt.len() > 1 {
            let (best, lvl) = learnt
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, l)| (i, self.level[l.var() as usize]))
                .max_by_key(|&(_, lvl)| lvl)
                .expect("nonempty");
            learnt.swap(1, best);
            back = lvl;
        }
        self.var_inc *= 1.0 / 0.95;
        (learnt, back)
    }

    fn backtrack(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level as usize];
        for i in (lim..self.trail.len()).rev() {
            let v = self.trail[i].var() as usize;
            self.phase[v] = self.values[v] == 1;
            self.values[v] = 0;
            self.reason[v] = None;
            self.heap.push(Activity(self.activity[v], v as u32));
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level as usize);
        self.qhead = lim;
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(Activity(act, v)) = self.heap.pop() {
            let vi = v as usize;
            if self.values[vi] == 0 && act == self.activity[vi] {
                return Some(Lit::new(v, self.phase[vi]));
            }
        }
        // Stale heap entries can hide unassigned variables.
        (0..self.values.len()).find(|&v| self.values[v] == 0).map(|v| Lit::new(v as u32, self.phase[v]))
    }

    pub fn solve(&mut self, deadline: Option<Instant>, cancel: Option<&AtomicBool>) -> SatResult {
        if self.inconsistent {
            return SatResult::Unsat;
        }
        for l in self.units.clone() {
            match self.value(l) {
                1 => {}
                -1 => return SatResult::Unsat,
                _ => self.enqueue(l, None),
            }
        }
        if self.propagate().is_some() {
            return SatResult::Unsat;
        }
        let mut conflicts: u64 = 0;
        let mut restart_no = 1;
        let mut restart_budget = luby(restart_no) * 100;
        let mut steps: u64 = 0;
        loop {
            steps += 1;
            if steps.is_multiple_of(512) {
                let timed_out = deadline.is_some_and(|d| Instant::now() >= d);
                if timed_out || cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                    self.backtrack(0);
                    return SatResult::Unknown;
                }
            }
            if let Some(conflict) = self.propagate() {
                conflicts += 1;
                if self.decision_level() == 0 {
                    return SatResult::Unsat;
                }
                let (learnt, back) = self.analyze(conflict);
                self.backtrack(back);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let idx = self.clauses.len();
                    self.watches[learnt[0].index()].push(idx);
                    self.watches[learnt[1].index()].push(idx);
                    let first = learnt[0];
                    self.clauses.push(learnt);
                    self.enqueue(first, Some(idx));
                }
                if conflicts >= restart_budget {
                    conflicts = 0;
                    restart_no += 1;
                    restart_budget = luby(restart_no) * 100;
                    self.backtrack(0);
                }
            } else {
                match self.pick_branch() {
                    None => {
                        let model = self.values.iter().map(|&v| v == 1).collect();
                        self.backtrack(0);
                        return SatResult::Sat(model);
                    }
                    Some(l) => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, None);
                    }
                }
            }
        }
    }
}
