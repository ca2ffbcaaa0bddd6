//! Statement sequences: the tree of goals, proof kinds and context edges that
//! a proof compiles to.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::desugar::{CaseBranch, Decl, ProofTree, Step, StepKind};
use crate::fol::{fix_constants, Formula, Term};
use crate::lexer::Location;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProofKind {
    Assumed,
    ByContext { restriction: Option<Vec<String>> },
    Subsequence(Vec<Statement>),
}

/// What produced a statement; used for reporting and obligation naming.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Lemma,
    Fixed,
    Assumption,
    /// The remainder of a block after an `Assume`.
    Continuation,
    /// A derivation with a `since` clause, holding the two checks below.
    SinceWrapper,
    Since,
    Derived,
    Note,
    CaseCompleteness,
    Case,
    CaseHypothesis,
    TakeExists,
    TakeWitness,
    /// A block goal that no `Hence` established.
    Discharge,
    /// A lemma stated without proof.
    Unproved,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Lemma => "lemma",
            Role::Fixed => "fixed",
            Role::Assumption => "assumption",
            Role::Continuation => "continuation",
            Role::SinceWrapper => "since-wrapper",
            Role::Since => "since",
            Role::Derived => "derived",
            Role::Note => "note",
            Role::CaseCompleteness => "case-completeness",
            Role::Case => "case",
            Role::CaseHypothesis => "case-hypothesis",
            Role::TakeExists => "take-exists",
            Role::TakeWitness => "take-witness",
            Role::Discharge => "discharge",
            Role::Unproved => "unproved-lemma",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub id: String,
    pub goal: Formula,
    pub proof: ProofKind,
    /// Ids of earlier statements whose goals may be used.
    pub context: Vec<String>,
    pub origin: Location,
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("{loc}: cannot assume `{assumed}` while proving `{goal}`; expected the premise of an implication or the body of a negation")]
    AssumeMismatch { loc: Location, assumed: String, goal: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SequenceOptions {
    /// Check that the cases of a case distinction are exhaustive.
    pub case_completeness: bool,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        SequenceOptions { case_completeness: true }
    }
}

struct Ids {
    prefix: String,
    next: usize,
}

impl Ids {
    fn root() -> Ids {
        Ids { prefix: "S".into(), next: 0 }
    }

    fn child(parent: &str) -> Ids {
        Ids { prefix: format!("{parent}."), next: 1 }
    }

    fn fresh(&mut self) -> String {
        let id = if self.next == 0 { self.prefix.clone() } else { format!("{}{}", self.prefix, self.next) };
        self.next += 1;
        id
    }
}

/// Builds the statement tree of a lemma: `S` holds the closed statement, `S1`
/// the statement over fixed constants, and the proof unfolds below.
pub fn build_sequence(lemma: &Decl, opts: SequenceOptions) -> Result<Statement, StructureError> {
    let mut ids = Ids::root();
    let root_id = ids.fresh();
    let Some(proof) = &lemma.proof else {
        return Ok(Statement {
            id: root_id,
            goal: lemma.formula.clone(),
            proof: ProofKind::ByContext { restriction: None },
            context: vec![],
            origin: lemma.loc,
            role: Role::Unproved,
        });
    };
    let (fixed, _) = fix_constants(&lemma.formula);
    let fixed_id = ids.fresh();
    let builder = Builder { opts };
    let children = builder.block(&fixed, &proof.steps, Vec::new(), &mut ids, proof.loc)?;
    let s1 = Statement {
        id: fixed_id,
        goal: fixed,
        proof: ProofKind::Subsequence(children),
        context: vec![],
        origin: lemma.loc,
        role: Role::Fixed,
    };
    Ok(Statement {
        id: root_id,
        goal: lemma.formula.clone(),
        proof: ProofKind::Subsequence(vec![s1]),
        context: vec![],
        origin: lemma.loc,
        role: Role::Lemma,
    })
}

struct Builder {
    opts: SequenceOptions,
}

fn by_context(restriction: Option<Vec<String>>) -> ProofKind {
    ProofKind::ByContext { restriction }
}

impl Builder {
    fn block(
        &self,
        goal: &Formula,
        steps: &[Step],
        mut ctx: Vec<String>,
        ids: &mut Ids,
        header: Location,
    ) -> Result<Vec<Statement>, StructureError> {
        let mut out = Vec::new();
        let mut discharged = false;
        for (i, step) in steps.iter().enumerate() {
            match &step.kind {
                StepKind::Assume(phi) => {
                    let rest_goal = match goal {
                        Formula::Implies(a, c) if **a == *phi => (**c).clone(),
                        Formula::Not(a) if **a == *phi => Formula::Falsum,
                        _ => {
                            return Err(StructureError::AssumeMismatch {
                                loc: step.loc,
                                assumed: phi.to_string(),
                                goal: goal.to_string(),
                            })
                        }
                    };
                    let a_id = ids.fresh();
                    out.push(Statement {
                        id: a_id.clone(),
                        goal: phi.clone(),
                        proof: ProofKind::Assumed,
                        context: ctx.clone(),
                        origin: step.loc,
                        role: Role::Assumption,
                    });
                    ctx.push(a_id);
                    let w_id = ids.fresh();
                    let children = self.block(&rest_goal, &steps[i + 1..], ctx.clone(), ids, header)?;
                    out.push(Statement {
                        id: w_id,
                        goal: rest_goal,
                        proof: ProofKind::Subsequence(children),
                        context: ctx,
                        origin: steps.get(i + 1).map(|s| s.loc).unwrap_or(step.loc),
                        role: Role::Continuation,
                    });
                    return Ok(out);
                }
                StepKind::Derive { goal: g, since, by, hence } => {
                    let id = ids.fresh();
                    let stmt = match since {
                        Some(s) => {
                            let s_id = ids.fresh();
                            let m_id = ids.fresh();
                            let since_stmt = Statement {
                                id: s_id.clone(),
                                goal: s.clone(),
                                proof: by_context(None),
                                context: ctx.clone(),
                                origin: step.loc,
                                role: Role::Since,
                            };
                            let mut main_ctx = ctx.clone();
                            main_ctx.push(s_id);
                            let main = Statement {
                                id: m_id,
                                goal: g.clone(),
                                proof: by_context(by.clone()),
                                context: main_ctx,
                                origin: step.loc,
                                role: Role::Derived,
                            };
                            Statement {
                                id: id.clone(),
                                goal: g.clone(),
                                proof: ProofKind::Subsequence(vec![since_stmt, main]),
                                context: ctx.clone(),
                                origin: step.loc,
                                role: Role::SinceWrapper,
                            }
                        }
                        None => Statement {
                            id: id.clone(),
                            goal: g.clone(),
                            proof: by_context(by.clone()),
                            context: ctx.clone(),
                            origin: step.loc,
                            role: Role::Derived,
                        },
                    };
                    out.push(stmt);
                    ctx.push(id);
                    if *hence && g == goal {
                        discharged = true;
                    }
                }
                StepKind::Note { goal: g, proof } => {
                    let id = ids.fresh();
                    let children = self.sub_block(g, proof, ctx.clone(), &id)?;
                    out.push(Statement {
                        id: id.clone(),
                        goal: g.clone(),
                        proof: ProofKind::Subsequence(children),
                        context: ctx.clone(),
                        origin: step.loc,
                        role: Role::Note,
                    });
                    ctx.push(id);
                }
                StepKind::Cases(branches) => {
                    let k_id = ids.fresh();
                    let disjunction = Formula::disjunction(branches.iter().map(|b| b.hypothesis.clone()))
                        .expect("at least one case");
                    out.push(Statement {
                        id: k_id.clone(),
                        goal: disjunction,
                        proof: if self.opts.case_completeness { by_context(None) } else { ProofKind::Assumed },
                        context: ctx.clone(),
                        origin: step.loc,
                        role: Role::CaseCompleteness,
                    });
                    let mut new_ids = vec![k_id];
                    for branch in branches {
                        let c_id = ids.fresh();
                        out.push(self.case(goal, branch, ctx.clone(), &c_id)?);
                        new_ids.push(c_id);
                    }
                    ctx.extend(new_ids);
                }
                StepKind::Take { vars, body, by } => {
                    let e_id = ids.fresh();
                    out.push(Statement {
                        id: e_id.clone(),
                        goal: Formula::exists(vars.clone(), body.clone()),
                        proof: by_context(by.clone()),
                        context: ctx.clone(),
                        origin: step.loc,
                        role: Role::TakeExists,
                    });
                    ctx.push(e_id);
                    let map: BTreeMap<String, Term> = vars.iter().map(|v| (v.clone(), Term::constant(v.clone()))).collect();
                    let w_id = ids.fresh();
                    out.push(Statement {
                        id: w_id.clone(),
                        goal: body.substitute(&map),
                        proof: ProofKind::Assumed,
                        context: ctx.clone(),
                        origin: step.loc,
                        role: Role::TakeWitness,
                    });
                    ctx.push(w_id);
                }
            }
        }
        if !discharged {
            out.push(Statement {
                id: ids.fresh(),
                goal: goal.clone(),
                proof: by_context(None),
                context: ctx,
                origin: header,
                role: Role::Discharge,
            });
        }
        Ok(out)
    }

    fn sub_block(&self, goal: &Formula, proof: &ProofTree, ctx: Vec<String>, id: &str) -> Result<Vec<Statement>, StructureError> {
        self.block(goal, &proof.steps, ctx, &mut Ids::child(id), proof.loc)
    }

    fn case(&self, goal: &Formula, branch: &CaseBranch, ctx: Vec<String>, id: &str) -> Result<Statement, StructureError> {
        let mut ids = Ids::child(id);
        let h_id = ids.fresh();
        let hyp = Statement {
            id: h_id.clone(),
            goal: branch.hypothesis.clone(),
            proof: ProofKind::Assumed,
            context: ctx.clone(),
            origin: branch.loc,
            role: Role::CaseHypothesis,
        };
        let mut inner_ctx = ctx.clone();
        inner_ctx.push(h_id);
        let w_id = ids.fresh();
        let children = self.block(goal, &branch.proof.steps, inner_ctx.clone(), &mut ids, branch.proof.loc)?;
        let body = Statement {
            id: w_id,
            goal: goal.clone(),
            proof: ProofKind::Subsequence(children),
            context: inner_ctx,
            origin: branch.loc,
            role: Role::Continuation,
        };
        Ok(Statement {
            id: id.to_string(),
            goal: Formula::implies(branch.hypothesis.clone(), goal.clone()),
            proof: ProofKind::Subsequence(vec![hyp, body]),
            context: ctx,
            origin: branch.loc,
            role: Role::Case,
        })
    }
}

impl Statement {
    pub fn children(&self) -> &[Statement] {
        match &self.proof {
            ProofKind::Subsequence(c) => c,
            _ => &[],
        }
    }

    /// Preorder traversal.
    pub fn walk(&self) -> Vec<&Statement> {
        let mut out = vec![self];
        for c in self.children() {
            out.extend(c.walk());
        }
        out
    }

    pub fn find(&self, id: &str) -> Option<&Statement> {
        self.walk().into_iter().find(|s| s.id == id)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.proof {
            ProofKind::Assumed => "Assumed",
            ProofKind::ByContext { .. } => "ByContext",
            ProofKind::Subsequence(_) => "Subsequence",
        }
    }

    fn dump(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        write!(f, "{}{} [{}", "  ".repeat(depth), self.id, self.kind_name())?;
        if let ProofKind::ByContext { restriction: Some(labels) } = &self.proof {
            write!(f, " by {}", labels.join(", "))?;
        }
        write!(f, "] {}", self.goal)?;
        if !self.context.is_empty() {
            write!(f, " <- {}", self.context.join(", "))?;
        }
        writeln!(f)?;
        for c in self.children() {
            c.dump(f, depth + 1)?;
        }
        Ok(())
    }
}

/// Indented `id [kind] goal <- context` tree.
impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.dump(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::desugar::{desugar, Scope};
    use crate::parser::parse_source;

    fn lemma(src: &str) -> Decl {
        let doc = desugar(&parse_source(src).unwrap(), &Scope::default()).unwrap();
        doc.decls.into_iter().last().unwrap()
    }

    fn ids_and_kinds(s: &Statement) -> Vec<(String, &'static str)> {
        s.walk().into_iter().map(|s| (s.id.clone(), s.kind_name())).collect()
    }

    #[test]
    fn trivial_implication() {
        let s = build_sequence(&lemma("Lemma: for all a. p(a) implies p(a).\nProof: Assume p(a). Hence p(a). qed."), SequenceOptions::default()).unwrap();
        assert_eq!(
            ids_and_kinds(&s),
            [
                ("S".into(), "Subsequence"),
                ("S1".into(), "Subsequence"),
                ("S2".into(), "Assumed"),
                ("S3".into(), "Subsequence"),
                ("S4".into(), "ByContext"),
            ]
        );
        assert_eq!(s.find("S4").unwrap().context, ["S2"]);
    }

    #[test]
    fn negation_by_contradiction() {
        let s = build_sequence(
            &lemma("Lemma: for all a,b. not a = b.\nProof: Assume a = b. Then p(a). Hence contradiction. qed."),
            SequenceOptions::default(),
        )
        .unwrap();
        let s3 = s.find("S3").unwrap();
        assert_eq!(s3.goal, Formula::Falsum);
        assert_eq!(s.find("S5").unwrap().goal, Formula::Falsum);
        assert!(s.walk().iter().all(|st| st.role != Role::Discharge));
    }

    #[test]
    fn assume_mismatch() {
        let err = build_sequence(&lemma("Lemma: for all a. p(a) implies q(a).\nProof: Assume q(a). qed."), SequenceOptions::default())
            .unwrap_err();
        assert!(matches!(err, StructureError::AssumeMismatch { .. }));
    }

    #[test]
    fn missing_hence_adds_discharge() {
        let s = build_sequence(&lemma("Lemma: for all a. p(a) implies q(a).\nProof: Assume p(a). qed."), SequenceOptions::default()).unwrap();
        let d = s.walk().into_iter().find(|st| st.role == Role::Discharge).unwrap();
        assert_eq!(d.goal, Formula::pred("q", vec![Term::constant("a")]));
        assert_eq!(d.context, ["S2"]);
    }

    #[test]
    fn cases_and_take() {
        let s = build_sequence(
            &lemma("Lemma: for all a. r(a).\nProof:\nCase p(a): Then r(a). qed.\nCase not p(a): Take x such that q(x,a). Hence r(a). qed.\nHence r(a).\nqed."),
            SequenceOptions::default(),
        )
        .unwrap();
        let k = s.find("S2").unwrap();
        assert_eq!(k.role, Role::CaseCompleteness);
        assert!(matches!(k.goal, Formula::Or(..)));
        let last = s.find("S5").unwrap();
        assert_eq!(last.context, ["S2", "S3", "S4"]);
        let exists = s.find("S4.3").unwrap();
        assert_eq!(exists.role, Role::TakeExists);
        assert_eq!(exists.context, ["S4.1"]);
        let witness = s.find("S4.4").unwrap();
        assert_eq!(witness.goal, Formula::pred("q", vec![Term::constant("x"), Term::constant("a")]));
        let no_check = build_sequence(
            &lemma("Lemma: for all a. r(a).\nProof:\nCase p(a): Then r(a). qed.\nHence r(a).\nqed."),
            SequenceOptions { case_completeness: false },
        )
        .unwrap();
        assert_eq!(no_check.find("S2").unwrap().proof, ProofKind::Assumed);
    }
}
