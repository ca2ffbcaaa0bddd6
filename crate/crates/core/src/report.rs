//! The verification report: per-obligation verdicts, per-line status and
//! totals. Its JSON form is shared by the command line and the service.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::backend::{UnknownReason, Verdict};
use crate::desugar::DeclKind;
use crate::model::Model;
use crate::obligation::Obligation;
use crate::pipeline::Assumed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Verified,
    Unknown,
    Pending,
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Verified => "verified",
            Status::Unknown => "unknown",
            Status::Pending => "pending",
            Status::Failed => "failed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Proved,
    Disproved,
    Unknown,
    Pending,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LineReport {
    pub line: u32,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountermodelView {
    pub size: usize,
    pub constants: BTreeMap<String, usize>,
    /// Every argument tuple with its value.
    pub functions: BTreeMap<String, Vec<(Vec<usize>, usize)>>,
    /// The argument tuples on which each predicate holds.
    pub predicates: BTreeMap<String, Vec<Vec<usize>>>,
    pub text: String,
}

impl CountermodelView {
    pub fn of(m: &Model) -> CountermodelView {
        let tuple = |mut i: usize, arity: usize| {
            let mut t = vec![0; arity];
            for slot in t.iter_mut().rev() {
                *slot = i % m.size;
                i /= m.size;
            }
            t
        };
        let functions = m
            .functions
            .iter()
            .map(|(name, table)| (name.clone(), table.values.iter().enumerate().map(|(i, &v)| (tuple(i, table.arity), v)).collect()))
            .collect();
        let predicates = m
            .predicates
            .iter()
            .map(|(name, table)| {
                let holds = table.values.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| tuple(i, table.arity)).collect();
                (name.clone(), holds)
            })
            .collect();
        CountermodelView { size: m.size, constants: m.constants.clone(), functions, predicates, text: m.to_string() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ObligationReport {
    pub id: String,
    pub lemma: String,
    pub line: u32,
    pub column: u32,
    pub role: &'static str,
    /// The goal in first-order notation.
    pub goal: String,
    pub premises: Vec<String>,
    pub restricted: bool,
    pub verdict: VerdictKind,
    pub backend: Option<String>,
    pub ms: Option<u64>,
    pub reason: Option<UnknownReason>,
    pub details: Option<String>,
    pub countermodel: Option<CountermodelView>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AssumedReport {
    pub label: String,
    pub kind: DeclKind,
    pub line: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub obligations: usize,
    pub proved: usize,
    pub failed: usize,
    pub unknown: usize,
    pub pending: usize,
    pub wall_ms: u64,
    /// Proofs found per backend.
    pub by_backend: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub status: Status,
    pub lines: Vec<LineReport>,
    pub obligations: Vec<ObligationReport>,
    pub assumed: Vec<AssumedReport>,
    pub stats: Stats,
}

impl VerificationReport {
    /// The report of a document without lemmas or declarations.
    pub fn empty() -> VerificationReport {
        assemble_report(&[], &[], &[], 0)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Obligations of one source line.
    pub fn at_line(&self, line: u32) -> Vec<&ObligationReport> {
        self.obligations.iter().filter(|o| o.line == line).collect()
    }
}

fn obligation_report(ob: &Obligation, verdict: Option<&Verdict>) -> ObligationReport {
    let mut r = ObligationReport {
        id: ob.id.clone(),
        lemma: ob.lemma.clone(),
        line: ob.origin.line,
        column: ob.origin.column,
        role: ob.role.as_str(),
        goal: ob.goal.to_string(),
        premises: ob.premise_labels(),
        restricted: ob.restriction_used(),
        verdict: VerdictKind::Pending,
        backend: None,
        ms: None,
        reason: None,
        details: None,
        countermodel: None,
    };
    match verdict {
        None => {}
        Some(Verdict::Proved { backend, ms }) => {
            r.verdict = VerdictKind::Proved;
            r.backend = Some(backend.clone());
            r.ms = Some(*ms);
        }
        Some(Verdict::Disproved { model, backend }) => {
            r.verdict = VerdictKind::Disproved;
            r.backend = Some(backend.clone());
            r.countermodel = Some(CountermodelView::of(model));
        }
        Some(Verdict::Unknown { reason, details }) => {
            r.verdict = VerdictKind::Unknown;
            r.reason = Some(*reason);
            r.details = Some(details.clone());
        }
    }
    r
}

fn status_of(v: VerdictKind) -> Status {
    match v {
        VerdictKind::Proved => Status::Verified,
        VerdictKind::Disproved => Status::Failed,
        VerdictKind::Unknown => Status::Unknown,
        VerdictKind::Pending => Status::Pending,
    }
}

/// Aggregates verdicts; `verdicts[i]` belongs to `obligations[i]` and `None`
/// marks an obligation still being checked. A line is verified exactly when
/// all of its obligations are proved; otherwise it takes the worst status
/// among them (failed, then pending, then unknown).
pub fn assemble_report(assumed: &[Assumed], obligations: &[Obligation], verdicts: &[Option<Verdict>], wall_ms: u64) -> VerificationReport {
    assert_eq!(obligations.len(), verdicts.len(), "one verdict slot per obligation");
    let reports: Vec<ObligationReport> = obligations.iter().zip(verdicts).map(|(o, v)| obligation_report(o, v.as_ref())).collect();
    let mut lines: BTreeMap<u32, Status> = BTreeMap::new();
    let mut stats = Stats { obligations: reports.len(), wall_ms, ..Stats::default() };
    for r in &reports {
        let s = status_of(r.verdict);
        let slot = lines.entry(r.line).or_insert(Status::Verified);
        *slot = (*slot).max(s);
        match r.verdict {
            VerdictKind::Proved => {
                stats.proved += 1;
                *stats.by_backend.entry(r.backend.clone().unwrap_or_default()).or_insert(0) += 1;
            }
            VerdictKind::Disproved => stats.failed += 1,
            VerdictKind::Unknown => stats.unknown += 1,
            VerdictKind::Pending => stats.pending += 1,
        }
    }
    let status = lines.values().copied().max().unwrap_or(Status::Verified);
    VerificationReport {
        status,
        lines: lines.into_iter().map(|(line, status)| LineReport { line, status }).collect(),
        obligations: reports,
        assumed: assumed.iter().map(|a| AssumedReport { label: a.label.clone(), kind: a.kind, line: a.line }).collect(),
        stats,
    }
}
