//! Proof obligations derived from statement sequences.

use std::collections::{BTreeMap, BTreeSet};

use crate::desugar::{Decl, Premise};
use crate::fol::Formula;
use crate::lexer::Location;
use crate::sequence::{ProofKind, Role, Statement};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Obligation {
    /// `<lemma>/<line>/<k>`.
    pub id: String,
    pub lemma: String,
    pub statement: String,
    pub role: Role,
    /// Ambient premises first, then goals of local statements.
    pub premises: Vec<(String, Formula)>,
    /// Number of local premises at the end of `premises`.
    pub locals: usize,
    pub goal: Formula,
    pub origin: Location,
    pub restriction: Option<Vec<String>>,
}

impl Obligation {
    pub fn restriction_used(&self) -> bool {
        self.restriction.is_some()
    }

    pub fn premise_formulas(&self) -> Vec<Formula> {
        self.premises.iter().map(|(_, f)| f.clone()).collect()
    }

    pub fn premise_labels(&self) -> Vec<String> {
        self.premises.iter().map(|(l, _)| l.clone()).collect()
    }

    /// Ambient and local premise formulas.
    pub fn split_premises(&self) -> (Vec<Formula>, Vec<Formula>) {
        let split = self.premises.len() - self.locals;
        let formulas = self.premise_formulas();
        (formulas[..split].to_vec(), formulas[split..].to_vec())
    }
}

/// Emits one obligation per `ByContext` statement of `seq`.
///
/// Unrestricted obligations see every ambient premise; a `by` list narrows
/// the ambient part to the named premises. Goals of local statements in
/// context are always included.
pub fn derive_obligations(lemma: &str, seq: &Statement, ambient: &[Premise]) -> Vec<Obligation> {
    let goals: BTreeMap<&str, &Formula> = seq.walk().into_iter().map(|s| (s.id.as_str(), &s.goal)).collect();
    let mut out = Vec::new();
    let mut per_line: BTreeMap<u32, usize> = BTreeMap::new();
    visit(seq, &mut |s| {
        let ProofKind::ByContext { restriction } = &s.proof else { return };
        let mut premises: Vec<(String, Formula)> = match restriction {
            None => ambient.iter().map(|p| (p.label.clone(), p.formula.clone())).collect(),
            Some(labels) => {
                let wanted: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
                ambient
                    .iter()
                    .filter(|p| wanted.contains(p.label.as_str()))
                    .map(|p| (p.label.clone(), p.formula.clone()))
                    .collect()
            }
        };
        premises.extend(s.context.iter().map(|id| (id.clone(), goals[id.as_str()].clone())));
        let locals = s.context.len();
        let k = per_line.entry(s.origin.line).or_insert(0);
        *k += 1;
        out.push(Obligation {
            id: format!("{lemma}/{}/{k}", s.origin.line),
            lemma: lemma.to_string(),
            statement: s.id.clone(),
            role: s.role,
            premises,
            locals,
            goal: s.goal.clone(),
            origin: s.origin,
            restriction: restriction.clone(),
        });
    });
    out
}

/// Preorder, except that the main check of a `since` step precedes the check
/// of its `since` clause.
fn visit<'a>(s: &'a Statement, f: &mut impl FnMut(&'a Statement)) {
    f(s);
    let children = s.children();
    if s.role == Role::SinceWrapper {
        children.iter().rev().for_each(|c| visit(c, f));
    } else {
        children.iter().for_each(|c| visit(c, f));
    }
}

/// Premises visible to the declaration at `index`: everything included plus
/// the earlier declarations of the same document.
pub fn ambient_for(scope: &[Premise], decls: &[Decl], index: usize) -> Vec<Premise> {
    let mut out = scope.to_vec();
    out.extend(decls[..index].iter().map(|d| Premise {
        label: d.label.clone(),
        kind: d.kind,
        formula: d.formula.clone(),
        library: None,
    }));
    out
}
