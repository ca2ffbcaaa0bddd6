//! Running the configured backends on an obligation and combining their
//! answers into a verdict.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{evaluate, find_countermodel, FinderLimits, FinderResult, Model};
use crate::obligation::Obligation;
use crate::resolution::{prove_supported, Limit, ProofResult, ProverLimits};
use crate::tptp::{parse_szs, to_tptp, SzsStatus};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    ExternalTptp,
    BuiltinResolution,
    BuiltinModelFinder,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackendConfig {
    pub name: String,
    pub kind: BackendKind,
    /// Argument template for external provers. `{file}` is replaced by the
    /// problem path and `{timeout}` by the timeout in whole seconds.
    pub command: Option<String>,
    pub timeout: Duration,
    pub enabled: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("no backend is enabled")]
    NoneEnabled,
    #[error("backend `{0}` has a zero timeout")]
    ZeroTimeout(String),
    #[error("external backend `{0}` has no command template")]
    MissingCommand(String),
    #[error("unknown backend `{0}`; known: builtin, modelfinder, eprover, vampire or a `name=command {{file}}` definition")]
    Unknown(String),
}

impl BackendConfig {
    pub fn builtin_resolution(timeout: Duration) -> BackendConfig {
        BackendConfig { name: "builtin".into(), kind: BackendKind::BuiltinResolution, command: None, timeout, enabled: true }
    }

    pub fn builtin_model_finder(timeout: Duration) -> BackendConfig {
        BackendConfig { name: "modelfinder".into(), kind: BackendKind::BuiltinModelFinder, command: None, timeout, enabled: true }
    }

    pub fn external(name: &str, command: &str, timeout: Duration) -> BackendConfig {
        BackendConfig { name: name.into(), kind: BackendKind::ExternalTptp, command: Some(command.into()), timeout, enabled: true }
    }

    /// A backend by name: a builtin, a known external prover, or an ad hoc
    /// external prover written `name=command template`.
    pub fn named(text: &str, timeout: Duration) -> Result<BackendConfig, ConfigError> {
        if let Some((name, command)) = text.split_once('=') {
            return Ok(BackendConfig::external(name.trim(), command.trim(), timeout));
        }
        match text {
            "builtin" => Ok(BackendConfig::builtin_resolution(timeout)),
            "modelfinder" => Ok(BackendConfig::builtin_model_finder(timeout)),
            "eprover" => Ok(BackendConfig::external("eprover", "eprover --auto --cpu-limit={timeout} {file}", timeout)),
            "vampire" => Ok(BackendConfig::external("vampire", "vampire --mode casc -t {timeout} {file}", timeout)),
            other => Err(ConfigError::Unknown(other.into())),
        }
    }

    pub fn validate(cfg: &[BackendConfig]) -> Result<(), ConfigError> {
        if !cfg.iter().any(|b| b.enabled) {
            return Err(ConfigError::NoneEnabled);
        }
        for b in cfg {
            if b.timeout.is_zero() {
                return Err(ConfigError::ZeroTimeout(b.name.clone()));
            }
            if b.kind == BackendKind::ExternalTptp && b.command.is_none() {
                return Err(ConfigError::MissingCommand(b.name.clone()));
            }
        }
        Ok(())
    }
}

/// The built-in prover and model finder.
pub fn default_backends(timeout: Duration) -> Vec<BackendConfig> {
    vec![BackendConfig::builtin_resolution(timeout), BackendConfig::builtin_model_finder(timeout)]
}

/// Why no verdict was reached, weakest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownReason {
    Error,
    Timeout,
    Saturated,
}

impl UnknownReason {
    pub fn as_str(self) -> &'static str {
        match self {
            UnknownReason::Error => "error",
            UnknownReason::Timeout => "timeout",
            UnknownReason::Saturated => "saturated",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Proved { backend: String, ms: u64 },
    Disproved { model: Model, backend: String },
    Unknown { reason: UnknownReason, details: String },
}

impl Verdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, Verdict::Proved { .. })
    }

    pub fn is_disproved(&self) -> bool {
        matches!(self, Verdict::Disproved { .. })
    }
}

/// Where problem files for external provers go.
#[derive(Clone, Debug, Default)]
pub struct DispatchOptions {
    /// Keep problem files in this directory instead of a temporary one.
    pub tptp_dir: Option<PathBuf>,
}

/// File name of an obligation's TPTP problem.
pub fn tptp_file_name(ob: &Obligation) -> String {
    let stem: String = ob.id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '.' }).collect();
    format!("{stem}.p")
}

enum Outcome {
    Proved(u64),
    Disproved(Model),
    /// A backend ended without a verdict; `None` means it had nothing to
    /// contribute to the reason.
    Open(Option<UnknownReason>, String),
}

/// Races the enabled backends on `ob`. The first proof or confirmed
/// countermodel wins and the others are cancelled; otherwise the strongest
/// reason among the finished backends is reported.
pub fn dispatch(ob: &Obligation, cfg: &[BackendConfig], opts: &DispatchOptions) -> Verdict {
    let enabled: Vec<&BackendConfig> = cfg.iter().filter(|b| b.enabled).collect();
    if enabled.is_empty() {
        return Verdict::Unknown { reason: UnknownReason::Error, details: "no backend is enabled".into() };
    }
    let start = Instant::now();
    let cancel = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel();
    let mut verdict = None;
    let mut reasons: Vec<(UnknownReason, String)> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    thread::scope(|s| {
        for b in &enabled {
            let tx = tx.clone();
            let cancel = &cancel;
            s.spawn(move || {
                let outcome = run_backend(ob, b, opts, cancel, start);
                let _ = tx.send((b.name.clone(), outcome));
            });
        }
        drop(tx);
        for (name, outcome) in rx {
            if verdict.is_some() {
                continue;
            }
            match outcome {
                Outcome::Proved(ms) => {
                    verdict = Some(Verdict::Proved { backend: name, ms });
                    cancel.store(true, Ordering::Relaxed);
                }
                Outcome::Disproved(model) => {
                    if confirms(ob, &model) {
                        verdict = Some(Verdict::Disproved { model, backend: name });
                        cancel.store(true, Ordering::Relaxed);
                    } else {
                        log::error!("{name} returned a model that does not falsify {}", ob.id);
                        reasons.push((UnknownReason::Error, format!("{name}: unconfirmed countermodel")));
                    }
                }
                Outcome::Open(Some(reason), details) => reasons.push((reason, format!("{name}: {details}"))),
                Outcome::Open(None, details) => notes.push(format!("{name}: {details}")),
            }
        }
    });
    verdict.unwrap_or_else(|| {
        let reason = reasons.iter().map(|r| r.0).max().unwrap_or(UnknownReason::Error);
        let details: Vec<String> = reasons.into_iter().map(|r| r.1).chain(notes).collect();
        Verdict::Unknown { reason, details: details.join("; ") }
    })
}

/// True when every premise holds in `model` and the goal does not.
pub fn confirms(ob: &Obligation, model: &Model) -> bool {
    let env = Default::default();
    ob.premises.iter().all(|(_, f)| evaluate(f, model, &env) == Ok(true)) && evaluate(&ob.goal, model, &env) == Ok(false)
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn finder_limits(timeout: Duration) -> FinderLimits {
    let d = FinderLimits::default();
    FinderLimits { budget: d.budget.min(timeout), ..d }
}

fn run_backend(ob: &Obligation, b: &BackendConfig, opts: &DispatchOptions, cancel: &AtomicBool, start: Instant) -> Outcome {
    match b.kind {
        BackendKind::BuiltinResolution => {
            let (background, local) = ob.split_premises();
            let limits = ProverLimits { max_time: b.timeout, ..ProverLimits::default() };
            match prove_supported(&background, &local, &ob.goal, limits, Some(cancel)) {
                ProofResult::Refuted(_) => Outcome::Proved(elapsed_ms(start)),
                ProofResult::Saturated => Outcome::Open(Some(UnknownReason::Saturated), "search space exhausted".into()),
                ProofResult::ResourceOut(Limit::Cancelled) => Outcome::Open(None, "cancelled".into()),
                ProofResult::ResourceOut(limit) => Outcome::Open(Some(UnknownReason::Timeout), limit.to_string()),
            }
        }
        BackendKind::BuiltinModelFinder => {
            let limits = finder_limits(b.timeout);
            match find_countermodel(&ob.premise_formulas(), &ob.goal, limits, Some(cancel)) {
                FinderResult::Found(m) => Outcome::Disproved(m),
                FinderResult::NoneUpTo(n) => Outcome::Open(None, format!("no countermodel up to size {n}")),
                FinderResult::GaveUp => Outcome::Open(None, "gave up".into()),
            }
        }
        BackendKind::ExternalTptp => run_external(ob, b, opts, cancel, start),
    }
}

#[derive(Debug, Error)]
enum ExternalError {
    #[error("cannot write problem file: {0}")]
    Write(std::io::Error),
    #[error("empty command template")]
    EmptyCommand,
    #[error("cannot start `{program}`: {source}")]
    Spawn { program: String, source: std::io::Error },
    #[error("waiting for the prover failed: {0}")]
    Wait(std::io::Error),
}

enum Exit {
    Finished(String),
    TimedOut,
    Cancelled,
}

fn run_external(ob: &Obligation, b: &BackendConfig, opts: &DispatchOptions, cancel: &AtomicBool, start: Instant) -> Outcome {
    let tmp;
    let dir: &Path = match &opts.tptp_dir {
        Some(d) => d,
        None => match tempfile::tempdir() {
            Ok(t) => {
                tmp = t;
                tmp.path()
            }
            Err(e) => return Outcome::Open(Some(UnknownReason::Error), ExternalError::Write(e).to_string()),
        },
    };
    let file = dir.join(tptp_file_name(ob));
    let result = fs::write(&file, to_tptp(ob)).map_err(ExternalError::Write).and_then(|()| spawn_and_wait(b, &file, cancel));
    match result {
        Err(e) => Outcome::Open(Some(UnknownReason::Error), e.to_string()),
        Ok(Exit::Cancelled) => Outcome::Open(None, "cancelled".into()),
        Ok(Exit::TimedOut) => Outcome::Open(Some(UnknownReason::Timeout), format!("no answer within {} s", b.timeout.as_secs_f64())),
        Ok(Exit::Finished(out)) => match parse_szs(&out) {
            SzsStatus::Theorem => Outcome::Proved(elapsed_ms(start)),
            SzsStatus::CounterSatisfiable => {
                // External provers report no model; look for a checkable one.
                match find_countermodel(&ob.premise_formulas(), &ob.goal, finder_limits(b.timeout), Some(cancel)) {
                    FinderResult::Found(m) => Outcome::Disproved(m),
                    _ => Outcome::Open(Some(UnknownReason::Saturated), "countersatisfiable, no finite countermodel found".into()),
                }
            }
            SzsStatus::Timeout => Outcome::Open(Some(UnknownReason::Timeout), "prover timeout".into()),
            SzsStatus::Unknown => Outcome::Open(Some(UnknownReason::Error), "no SZS status in prover output".into()),
        },
    }
}

fn command_line(template: &str, file: &Path, timeout: Duration) -> Vec<String> {
    let secs = timeout.as_secs().max(1).to_string();
    let path = file.display().to_string();
    template.split_whitespace().map(|a| a.replace("{file}", &path).replace("{timeout}", &secs)).collect()
}

fn spawn_and_wait(b: &BackendConfig, file: &Path, cancel: &AtomicBool) -> Result<Exit, ExternalError> {
    let argv = command_line(b.command.as_deref().unwrap_or(""), file, b.timeout);
    let (program, args) = argv.split_first().ok_or(ExternalError::EmptyCommand)?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|source| ExternalError::Spawn { program: program.clone(), source })?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = thread::spawn(move || {
        let mut out = String::new();
        let _ = stdout.read_to_string(&mut out);
        out
    });
    let deadline = Instant::now() + b.timeout;
    let exit = loop {
        match child.try_wait() {
            Ok(Some(_)) => break None,
            Ok(None) => {}
            Err(e) => {
                kill(&mut child);
                return Err(ExternalError::Wait(e));
            }
        }
        if cancel.load(Ordering::Relaxed) {
            kill(&mut child);
            break Some(Exit::Cancelled);
        }
        if Instant::now() >= deadline {
            kill(&mut child);
            break Some(Exit::TimedOut);
        }
        thread::sleep(Duration::from_millis(5));
    };
    let out = reader.join().unwrap_or_default();
    Ok(exit.unwrap_or(Exit::Finished(out)))
}

fn kill(child: &mut Child) {
    let _ = child.kill();
    let _ = child.wait();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::{Formula, Term};
    use crate::lexer::Location;
    use crate::sequence::Role;

    fn ob(premises: Vec<Formula>, goal: Formula) -> Obligation {
        Obligation {
            id: "T/1/1".into(),
            lemma: "T".into(),
            statement: "S".into(),
            role: Role::Derived,
            locals: premises.len(),
            premises: premises.into_iter().enumerate().map(|(i, f)| (format!("P{i}"), f)).collect(),
            goal,
            origin: Location { line: 1, column: 1 },
            restriction: None,
        }
    }

    fn between(a: &str, b: &str, c: &str) -> Formula {
        Formula::pred("between", vec![Term::var(a), Term::var(b), Term::var(c)])
    }

    #[test]
    fn trivial_obligation_is_proved() {
        let p = Formula::pred("p", vec![]);
        let v = dispatch(&ob(vec![p.clone()], p), &default_backends(DEFAULT_TIMEOUT), &DispatchOptions::default());
        match v {
            Verdict::Proved { backend, ms } => {
                assert_eq!(backend, "builtin");
                assert!(ms < 50);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn between_symmetry_is_disproved() {
        let o = ob(vec![], Formula::forall(["a", "b", "c"], Formula::implies(between("a", "b", "c"), between("c", "b", "a"))));
        match dispatch(&o, &default_backends(DEFAULT_TIMEOUT), &DispatchOptions::default()) {
            Verdict::Disproved { model, backend } => {
                assert_eq!(backend, "modelfinder");
                assert_eq!(model.size, 2);
                assert!(confirms(&o, &model));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_external_binary_is_an_error() {
        let p = Formula::pred("p", vec![]);
        let cfg = [BackendConfig::external("ghost", "/nonexistent/prover {file}", Duration::from_secs(1))];
        match dispatch(&ob(vec![], p), &cfg, &DispatchOptions::default()) {
            Verdict::Unknown { reason, details } => {
                assert_eq!(reason, UnknownReason::Error);
                assert!(details.contains("ghost"), "{details}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn external_theorem_line_proves() {
        let dir = tempfile::tempdir().unwrap();
        let o = ob(vec![], Formula::pred("p", vec![]));
        let cfg = [BackendConfig::external("echo", "echo % SZS status Theorem for {file}", Duration::from_secs(5))];
        let v = dispatch(&o, &cfg, &DispatchOptions { tptp_dir: Some(dir.path().to_path_buf()) });
        assert!(v.is_proved(), "{v:?}");
        let written = fs::read_to_string(dir.path().join(tptp_file_name(&o))).unwrap();
        assert!(written.contains("fof(goal, conjecture, p)."));
    }

    /// A prover that never answers.
    fn sleeper(dir: &Path) -> String {
        use std::os::unix::fs::PermissionsExt;
        let path = dir.join("sleepy.sh");
        fs::write(&path, "#!/bin/sh\nexec sleep 30\n").unwrap();
        fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
        format!("{} {{file}}", path.display())
    }

    #[test]
    fn slow_external_is_killed() {
        let dir = tempfile::tempdir().unwrap();
        let o = ob(vec![], Formula::pred("p", vec![]));
        let cfg = [BackendConfig::external("sleepy", &sleeper(dir.path()), Duration::from_millis(200))];
        let t = Instant::now();
        let v = dispatch(&o, &cfg, &DispatchOptions::default());
        assert!(t.elapsed() < Duration::from_secs(5));
        assert!(matches!(v, Verdict::Unknown { reason: UnknownReason::Timeout, .. }), "{v:?}");
    }

    #[test]
    fn winner_cancels_slow_external() {
        let dir = tempfile::tempdir().unwrap();
        let p = Formula::pred("p", vec![]);
        let mut cfg = default_backends(DEFAULT_TIMEOUT);
        cfg.push(BackendConfig::external("sleepy", &sleeper(dir.path()), Duration::from_secs(60)));
        let t = Instant::now();
        let v = dispatch(&ob(vec![p.clone()], p), &cfg, &DispatchOptions::default());
        assert!(v.is_proved());
        assert!(t.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn reasons_are_ranked() {
        assert!(UnknownReason::Saturated > UnknownReason::Timeout);
        assert!(UnknownReason::Timeout > UnknownReason::Error);
    }

    #[test]
    fn named_backends() {
        assert_eq!(BackendConfig::named("builtin", DEFAULT_TIMEOUT).unwrap().kind, BackendKind::BuiltinResolution);
        let custom = BackendConfig::named("mine=prove --in {file}", DEFAULT_TIMEOUT).unwrap();
        assert_eq!(custom.name, "mine");
        assert_eq!(custom.command.as_deref(), Some("prove --in {file}"));
        assert!(BackendConfig::named("nope", DEFAULT_TIMEOUT).is_err());
        assert_eq!(BackendConfig::validate(&[]), Err(ConfigError::NoneEnabled));
    }
}
