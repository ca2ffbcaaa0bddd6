//! Acceptance checks, one line of output per criterion. Runs without the
//! libtest harness so the lines always show up.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use natproof::backend::{default_backends, dispatch, BackendKind, DispatchOptions, Verdict, DEFAULT_TIMEOUT};
use natproof::corpus::{self, Expectation};
use natproof::desugar::{DeclKind, StepKind};
use natproof::fol::{Formula, Term};
use natproof::library::LibraryStore;
use natproof::model::{evaluate, find_countermodel, FinderLimits, FinderResult};
use natproof::obligation::Obligation;
use natproof::pipeline::{prepare, Prepared};
use natproof::resolution::{prove, ProverLimits};
use natproof::sequence::SequenceOptions;
use natproof::tptp::{decode_var, encode_var, parse_fof, split_problem, to_tptp};
use natproof_service::{app, AppState, ServiceConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tower::ServiceExt;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn midpoint() -> Prepared {
    prepare(corpus::example("Midpoint Extension").unwrap().text, &LibraryStore::default(), SequenceOptions::default()).unwrap()
}

fn c(n: &str) -> Term {
    Term::constant(n)
}

fn v(n: &str) -> Term {
    Term::var(n)
}

fn between(a: Term, b: Term, c: Term) -> Formula {
    Formula::pred("between", vec![a, b, c])
}

fn equidistant(a: Term, b: Term, c: Term, d: Term) -> Formula {
    Formula::pred("equidistant", vec![a, b, c, d])
}

fn conj(parts: Vec<Formula>) -> Formula {
    Formula::conjunction(parts).unwrap()
}

fn desugaring_golden() -> Check {
    let start = Instant::now();
    let p = midpoint();
    let decl = p.document.decls.iter().find(|d| d.label == "MidpointExtension").ok_or("lemma missing")?;
    let hyp = |t: fn(&str) -> Term| {
        conj(vec![
            Formula::pred("midpoint", vec![t("m"), t("b"), t("c")]),
            between(t("a"), t("b"), t("c")),
            between(t("b"), t("c"), t("d")),
            equidistant(t("a"), t("b"), t("c"), t("d")),
            Formula::not(Formula::eq(t("b"), t("c"))),
        ])
    };
    let lemma = Formula::forall(["a", "b", "c", "d", "m"], Formula::implies(hyp(v), Formula::pred("midpoint", vec![v("m"), v("a"), v("d")])));
    ensure!(decl.formula == lemma, "lemma: {}", decl.formula);
    let steps = &decl.proof.as_ref().ok_or("no proof")?.steps;
    ensure!(steps.len() == 4, "expected 4 top-level steps, got {}", steps.len());
    ensure!(steps[0].kind == StepKind::Assume(hyp(c)), "assume: {:?}", steps[0].kind);
    let since = StepKind::Derive {
        goal: equidistant(c("a"), c("m"), c("m"), c("d")),
        since: Some(conj(vec![equidistant(c("b"), c("m"), c("m"), c("c")), equidistant(c("a"), c("b"), c("c"), c("d"))])),
        by: None,
        hence: false,
    };
    ensure!(steps[1].kind == since, "since pair: {:?}", steps[1].kind);
    let StepKind::Note { goal, proof } = &steps[2].kind else { return Err(format!("note: {:?}", steps[2].kind)) };
    ensure!(*goal == between(c("a"), c("m"), c("d")), "note goal: {goal}");
    let inner = [
        StepKind::Derive { goal: between(c("b"), c("m"), c("c")), since: None, by: Some(vec!["DefMidpoint".into()]), hence: false },
        StepKind::Derive {
            goal: between(c("a"), c("b"), c("m")),
            since: Some(conj(vec![between(c("a"), c("b"), c("c")), between(c("b"), c("m"), c("c"))])),
            by: None,
            hence: false,
        },
        StepKind::Derive {
            goal: between(c("m"), c("c"), c("d")),
            since: Some(conj(vec![between(c("b"), c("m"), c("c")), between(c("b"), c("c"), c("d"))])),
            by: None,
            hence: false,
        },
    ];
    let got: Vec<&StepKind> = proof.steps.iter().map(|s| &s.kind).collect();
    ensure!(got == inner.iter().collect::<Vec<_>>(), "note derivations: {got:?}");
    let hence = StepKind::Derive { goal: Formula::pred("midpoint", vec![c("m"), c("a"), c("d")]), since: None, by: None, hence: true };
    ensure!(steps[3].kind == hence, "hence: {:?}", steps[3].kind);
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(1), "took {t:?}");
    Ok(format!("5 checks exact, {} ms", t.as_millis()))
}

fn sequence_shape() -> Check {
    let p = midpoint();
    let seq = &p.sequences.iter().find(|(l, _)| l == "MidpointExtension").ok_or("no sequence")?.1;
    let top: Vec<_> = seq.walk().into_iter().filter(|s| !s.id.contains('.')).collect();
    let ids: Vec<&str> = top.iter().map(|s| s.id.as_str()).collect();
    ensure!(ids == ["S", "S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8"], "statements: {ids:?}");
    let kind = |id: &str| seq.find(id).map(|s| s.kind_name()).unwrap_or("missing");
    for (id, k) in [("S2", "Assumed"), ("S5", "ByContext"), ("S6", "ByContext"), ("S8", "ByContext"), ("S7", "Subsequence")] {
        ensure!(kind(id) == k, "{id} is {}, expected {k}", kind(id));
    }
    let ctx = |id: &str| seq.find(id).map(|s| s.context.clone()).unwrap_or_default();
    ensure!(ctx("S8") == ["S2", "S4", "S7"], "S8 context {:?}", ctx("S8"));
    ensure!(ctx("S6") == ["S2", "S5"], "S6 context {:?}", ctx("S6"));
    Ok("9 statements, kinds and contexts exact".into())
}

fn obligation_counts() -> Check {
    let p = midpoint();
    let at = |line: u32| -> Vec<&Obligation> { p.obligations.iter().filter(|o| o.origin.line == line).collect() };
    ensure!(at(5).len() == 2, "line 5 has {} obligations", at(5).len());
    let eight = at(8);
    ensure!(eight.len() == 1, "line 8 has {} obligations", eight.len());
    let ob = eight[0];
    ensure!(ob.restriction.as_deref() == Some(&["DefMidpoint".to_string()][..]), "restriction {:?}", ob.restriction);
    let (ambient, _) = ob.premises.split_at(ob.premises.len() - ob.locals);
    let ambient: Vec<&str> = ambient.iter().map(|(l, _)| l.as_str()).collect();
    ensure!(ambient == ["DefMidpoint"], "ambient premises {ambient:?}");
    let locals: Vec<&str> = ob.premises[ob.premises.len() - ob.locals..].iter().map(|(l, _)| l.as_str()).collect();
    ensure!(locals == ["S2", "S4"], "local premises {locals:?}");
    Ok(format!("line 5: 2, line 8: 1 restricted to DefMidpoint + {}", locals.join(",")))
}

const LIBRARY_GOLDEN: &[(&str, DeclKind, &str)] = &[
    ("CongrRefl", DeclKind::Axiom, "∀a,b. equidistant(a,b,b,a)"),
    ("CongrIdent", DeclKind::Axiom, "∀a,b,c. equidistant(a,b,c,c) → a = b"),
    ("CongrTrans", DeclKind::Axiom, "∀a,b,p,q,r,s. equidistant(a,b,p,q) ∧ equidistant(a,b,r,s) → equidistant(p,q,r,s)"),
    ("SegmentConstr", DeclKind::Axiom, "∀a,b,c,d. ∃e. equidistant(b,e,c,d) ∧ between(a,b,e)"),
    (
        "FiveSegment",
        DeclKind::Axiom,
        "∀a,b,c,d,a',b',c',d'. between(a,b,c) ∧ between(a',b',c') ∧ equidistant(a,b,a',b') ∧ equidistant(b,c,b',c') ∧ equidistant(a,d,a',d') ∧ equidistant(b,d,b',d') ∧ a ≠ b → equidistant(c,d,c',d')",
    ),
    ("BetwIdent", DeclKind::Axiom, "∀a,b. between(a,b,a) → a = b"),
    ("Pasch", DeclKind::Axiom, "∀a,b,c,p,q. between(a,p,c) ∧ between(b,q,c) → (∃x. between(p,x,b) ∧ between(q,x,a))"),
    ("LowerDim", DeclKind::Axiom, "∃a,b,c. ¬between(a,b,c) ∧ ¬between(b,c,a) ∧ ¬between(c,a,b)"),
    ("Euclid", DeclKind::Axiom, "∀a,b,c,d,t. ∃x,y. between(a,d,t) ∧ between(b,d,c) ∧ a ≠ d → between(a,b,x) ∧ between(a,c,y) ∧ between(x,t,y)"),
    ("DefCol", DeclKind::Definition, "∀a,b,c. col(a,b,c) ↔ between(a,b,c) ∨ between(b,c,a) ∨ between(c,a,b)"),
    ("DefMidpoint", DeclKind::Definition, "∀a,b,m. midpoint(m,a,b) ↔ between(a,m,b) ∧ equidistant(a,m,m,b)"),
    (
        "DefCoplanar",
        DeclKind::Definition,
        "∀a,b,c,d. coplanar(a,b,c,d) ↔ (∃x. col(a,b,x) ∧ col(c,d,x) ∨ col(a,c,x) ∧ col(b,d,x) ∨ col(a,d,x) ∧ col(b,c,x))",
    ),
    ("DefParallelStrict", DeclKind::Definition, "∀a,b,c,d. parstr(a,b,c,d) ↔ a ≠ b ∧ c ≠ d ∧ coplanar(a,b,c,d) ∧ ¬(∃x. col(x,a,b) ∧ col(x,c,d))"),
    ("DefParallel", DeclKind::Definition, "∀a,b,c,d. parallel(a,b,c,d) ↔ parstr(a,b,c,d) ∨ a ≠ b ∧ c ≠ d ∧ col(a,c,d) ∧ col(b,c,d)"),
];

fn library_golden() -> Check {
    let lib = LibraryStore::default().load("geometry").map_err(|e| e.to_string())?;
    let names: Vec<&str> = lib.notations.iter().map(|n| n.name.as_str()).collect();
    ensure!(names == ["between", "equidistant", "parstr", "parallel"], "notations {names:?}");
    ensure!(lib.count(DeclKind::Axiom) == 9, "{} axioms", lib.count(DeclKind::Axiom));
    ensure!(lib.count(DeclKind::Definition) == 5, "{} definitions", lib.count(DeclKind::Definition));
    ensure!(lib.premises.len() == LIBRARY_GOLDEN.len(), "{} premises", lib.premises.len());
    for (p, (label, kind, text)) in lib.premises.iter().zip(LIBRARY_GOLDEN) {
        ensure!(p.label == *label && p.kind == *kind, "expected {label}, found {}", p.label);
        ensure!(p.formula.to_string() == *text, "{label}: {}", p.formula);
    }
    let refl = Formula::forall(["a", "b"], equidistant(v("a"), v("b"), v("b"), v("a")));
    ensure!(lib.premises[0].formula == refl, "CongrRefl structure");
    Ok("4 notations, 9 axioms, 5 definitions match".into())
}

/// Random closed formulas over p/1, q/2, r/0, a, b, f/1 and equality.
struct Gen {
    rng: StdRng,
}

impl Gen {
    fn term(&mut self, bound: &[String]) -> Term {
        let base = if !bound.is_empty() && self.rng.random_bool(0.7) {
            Term::var(bound[self.rng.random_range(0..bound.len())].clone())
        } else {
            Term::constant(["a", "b"][self.rng.random_range(0..2)])
        };
        if self.rng.random_bool(0.15) {
            Term::app("f", vec![base])
        } else {
            base
        }
    }

    fn formula(&mut self, depth: u32, bound: &mut Vec<String>) -> Formula {
        let choice = if depth == 0 { self.rng.random_range(0..4) } else { self.rng.random_range(0..11) };
        match choice {
            0 => Formula::pred("p", vec![self.term(bound)]),
            1 => Formula::pred("q", vec![self.term(bound), self.term(bound)]),
            2 => Formula::pred("r", vec![]),
            3 => Formula::eq(self.term(bound), self.term(bound)),
            4 => Formula::not(self.formula(depth - 1, bound)),
            5 => Formula::and(self.formula(depth - 1, bound), self.formula(depth - 1, bound)),
            6 => Formula::or(self.formula(depth - 1, bound), self.formula(depth - 1, bound)),
            7 => Formula::implies(self.formula(depth - 1, bound), self.formula(depth - 1, bound)),
            8 => Formula::iff(self.formula(depth - 1, bound), self.formula(depth - 1, bound)),
            q => {
                let var = ["x", "y", "z"][self.rng.random_range(0..3)].to_string();
                bound.push(var.clone());
                let body = self.formula(depth - 1, bound);
                bound.pop();
                if q == 9 {
                    Formula::forall([var], body)
                } else {
                    Formula::exists([var], body)
                }
            }
        }
    }

    fn obligation(&mut self) -> (Vec<Formula>, Formula) {
        let n = self.rng.random_range(0..=3);
        let premises = (0..n).map(|_| self.formula(3, &mut Vec::new())).collect();
        (premises, self.formula(3, &mut Vec::new()))
    }
}

fn soundness_suite() -> Check {
    let start = Instant::now();
    let mut gen = Gen { rng: StdRng::seed_from_u64(0x5eed) };
    let limits = ProverLimits { max_clauses: 20_000, max_time: Duration::from_millis(100), max_weight: 40 };
    let finder = FinderLimits { max_size: 3, budget: Duration::from_secs(2) };
    let (mut refuted, mut models, mut violations, mut inconclusive) = (0, 0, Vec::new(), 0);
    for i in 0..500 {
        let (premises, goal) = gen.obligation();
        let proof = prove(&premises, &goal, limits);
        match find_countermodel(&premises, &goal, finder, None) {
            FinderResult::Found(m) => {
                models += 1;
                let env = BTreeMap::new();
                let falsifies = premises.iter().all(|p| evaluate(p, &m, &env) == Ok(true)) && evaluate(&goal, &m, &env) == Ok(false);
                if !falsifies {
                    violations.push(format!("#{i}: model does not falsify"));
                }
                if proof.is_refuted() {
                    violations.push(format!("#{i}: refuted yet countermodel of size {}", m.size));
                }
            }
            FinderResult::NoneUpTo(_) => {}
            FinderResult::GaveUp => inconclusive += 1,
        }
        if proof.is_refuted() {
            refuted += 1;
        }
    }
    let t = start.elapsed();
    ensure!(violations.is_empty(), "{} violations: {}", violations.len(), violations.join("; "));
    ensure!(t < Duration::from_secs(60), "took {t:?}");
    ensure!(refuted > 0 && models > 0, "degenerate sample: {refuted} refuted, {models} countermodels");
    Ok(format!("500 obligations, {refuted} refuted, {models} countermodels, {inconclusive} finder timeouts, 0 violations, {:.1} s", t.as_secs_f64()))
}

fn countermodel() -> Check {
    let start = Instant::now();
    let goal = Formula::forall(["a", "b", "c"], Formula::implies(between(v("a"), v("b"), v("c")), between(v("c"), v("b"), v("a"))));
    let ob = Obligation {
        id: "Sym/1/1".into(),
        lemma: "Sym".into(),
        statement: "S".into(),
        role: natproof::sequence::Role::Derived,
        premises: Vec::new(),
        locals: 0,
        goal: goal.clone(),
        origin: Default::default(),
        restriction: None,
    };
    let Verdict::Disproved { model, backend } = dispatch(&ob, &default_backends(DEFAULT_TIMEOUT), &DispatchOptions::default()) else {
        return Err("not disproved".into());
    };
    ensure!(model.size == 2, "domain size {}", model.size);
    ensure!(evaluate(&goal, &model, &BTreeMap::new()) == Ok(false), "model does not falsify the goal");
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(1), "took {t:?}");
    Ok(format!("domain-2 model from {backend}, verified, {} ms", t.as_millis()))
}

fn end_to_end_corpus() -> Check {
    let store = LibraryStore::default();
    let backends = default_backends(DEFAULT_TIMEOUT);
    let builtin: Vec<_> = backends.iter().filter(|b| b.kind == BackendKind::BuiltinResolution).cloned().collect();
    let mut summary = Vec::new();
    for ex in corpus::examples() {
        let p = prepare(ex.text, &store, SequenceOptions::default()).map_err(|e| format!("{}: {e}", ex.entry.name))?;
        if ex.entry.name == "Line Extension" {
            ensure!(p.scope.premise("Bsymmetry").is_some(), "Bsymmetry helper not in scope");
            ensure!(ex.entry.requires_external.is_empty(), "Line Extension must not need external provers");
        }
        let (mut proved, mut tagged, mut disproved) = (0, 0, 0);
        for ob in &p.obligations {
            if ex.entry.requires_external.contains(&ob.id) {
                tagged += 1;
                let found = find_countermodel(&ob.premise_formulas(), &ob.goal, FinderLimits::default(), None);
                ensure!(!matches!(found, FinderResult::Found(_)), "{}: tagged obligation has a countermodel", ob.id);
                continue;
            }
            match dispatch(ob, &backends, &DispatchOptions::default()) {
                Verdict::Proved { backend, .. } => {
                    ensure!(builtin.iter().any(|b| b.name == backend), "{} proved by {backend}", ob.id);
                    proved += 1;
                }
                Verdict::Disproved { .. } => disproved += 1,
                Verdict::Unknown { details, .. } => return Err(format!("{} untagged and unproved: {details}", ob.id)),
            }
        }
        match ex.entry.expect {
            Expectation::Verified => ensure!(disproved == 0, "{}: {disproved} obligations disproved", ex.entry.name),
            Expectation::Failed => ensure!(disproved > 0, "{}: expected a countermodel", ex.entry.name),
        }
        summary.push(format!("{} {proved} proved {tagged} tagged {disproved} disproved", ex.entry.name));
    }
    Ok(summary.join(", "))
}

fn tptp_well_formed() -> Check {
    let store = LibraryStore::default();
    let mut files = 0;
    for ex in corpus::examples() {
        let p = prepare(ex.text, &store, SequenceOptions::default()).map_err(|e| e.to_string())?;
        for ob in &p.obligations {
            let text = to_tptp(ob);
            let parsed = parse_fof(&text).map_err(|e| format!("{}: {e}", ob.id))?;
            let (axioms, goal) = split_problem(&parsed);
            ensure!(goal.as_ref() == Some(&ob.goal), "{}: conjecture differs", ob.id);
            let mut expected: Vec<&Formula> = ob.premises.iter().map(|(_, f)| f).collect();
            let mut got: Vec<&Formula> = axioms.values().collect();
            expected.sort_by_key(|f| f.to_string());
            got.sort_by_key(|f| f.to_string());
            ensure!(expected == got, "{}: axioms differ", ob.id);
            files += 1;
        }
    }
    for name in ["a'", "b''", "x'1", "a_b'"] {
        ensure!(decode_var(&encode_var(name)).as_deref() == Some(name), "{name} does not round-trip");
    }
    ensure!(encode_var("a'") == "A_prime", "a' encodes as {}", encode_var("a'"));
    Ok(format!("{files} problems parse and round-trip"))
}

fn cli(args: &[&str]) -> (Option<i32>, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_natproof")).args(args).output().expect("run natproof");
    (out.status.code(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn service_report(text: &str) -> Result<String, String> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let app = app(AppState::new(ServiceConfig::default()));
        let body = serde_json::json!({ "text": text, "options": { "deterministic": true } }).to_string();
        let req = Request::post("/api/verify").header("content-type", "application/json").body(Body::from(body)).unwrap();
        let resp = app.clone().oneshot(req).await.map_err(|e| e.to_string())?;
        ensure!(resp.status() == StatusCode::ACCEPTED, "submit returned {}", resp.status());
        let v: serde_json::Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
        let id = v["id"].as_str().ok_or("no job id")?.to_string();
        for _ in 0..6000 {
            let req = Request::get(format!("/api/jobs/{id}/report")).body(Body::empty()).unwrap();
            let resp = app.clone().oneshot(req).await.map_err(|e| e.to_string())?;
            if resp.status() == StatusCode::OK {
                let bytes = resp.into_body().collect().await.unwrap().to_bytes();
                return Ok(String::from_utf8_lossy(&bytes).into_owned());
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        Err("job did not finish".into())
    })
}

fn cli_contract() -> Check {
    let dir = env!("CARGO_MANIFEST_DIR").to_string() + "/../core/corpus";
    let verified = format!("{dir}/line_extension.elfe");
    let broken = format!("{dir}/broken.elfe");
    let (code, _) = cli(&[&verified]);
    ensure!(code == Some(0), "verified fixture exited {code:?}");
    let (code, out) = cli(&[&broken]);
    ensure!(code == Some(1), "broken fixture exited {code:?}");
    ensure!(out.contains("countermodel"), "no countermodel block");
    let (code, _) = cli(&[&format!("{dir}/no_such_file.elfe")]);
    ensure!(code == Some(3), "missing file exited {code:?}");
    for file in [&verified, &broken] {
        let (_, json) = cli(&["--json", "--deterministic", file]);
        let text = std::fs::read_to_string(file).map_err(|e| e.to_string())?;
        let served = service_report(&text)?;
        ensure!(json == served, "{file}: CLI and service reports differ");
    }
    Ok("exit codes 0/1/3; --json equals the service report byte for byte".into())
}

fn main() {
    let checks: [Criterion; 9] = [
        ("desugaring golden", desugaring_golden),
        ("statement-sequence shape", sequence_shape),
        ("obligation counts", obligation_counts),
        ("geometry library", library_golden),
        ("soundness suite", soundness_suite),
        ("countermodel", countermodel),
        ("end-to-end corpus", end_to_end_corpus),
        ("TPTP well-formedness", tptp_well_formed),
        ("CLI contract", cli_contract),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
