//! `natproof`: verify a controlled-English proof document from the terminal.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use clap::Parser;
use natproof::backend::{default_backends, BackendConfig, Verdict, DEFAULT_TIMEOUT};
use natproof::library::{with_document_dir, LibraryStore};
use natproof::report::{Status, VerificationReport};
use natproof::verify::{verify_text, Event, VerifyError, VerifyOptions};

const EXIT_VERIFIED: u8 = 0;
const EXIT_FAILED: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "natproof", version, about = "Check a proof written in controlled English")]
struct Args {
    /// Document to verify.
    file: PathBuf,
    /// Library directory, searched before the bundled libraries.
    #[arg(long = "lib", value_name = "DIR")]
    libs: Vec<PathBuf>,
    /// Extra backend: builtin, modelfinder, eprover, vampire, or `name=command {file}`.
    #[arg(long = "backend", value_name = "NAME")]
    backends: Vec<String>,
    /// Per-obligation timeout in seconds.
    #[arg(long, value_name = "SECONDS", default_value_t = DEFAULT_TIMEOUT.as_secs_f64())]
    timeout: f64,
    /// Obligations checked in parallel.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Do not check that case distinctions are exhaustive.
    #[arg(long)]
    no_case_completeness: bool,
    /// Single worker, built-in backends only, timings reported as zero.
    #[arg(long)]
    deterministic: bool,
    /// Keep one TPTP problem per obligation in DIR.
    #[arg(long, value_name = "DIR", num_args = 0..=1, default_missing_value = "tptp")]
    keep_tptp: Option<PathBuf>,
    /// Print the report as JSON instead of the progress log.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    env_logger::init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_VERIFIED });
        }
    };
    ExitCode::from(run(&args))
}

fn options(args: &Args) -> Result<VerifyOptions, String> {
    if !(args.timeout.is_finite() && args.timeout > 0.0) {
        return Err(format!("timeout must be positive, got {}", args.timeout));
    }
    let timeout = Duration::from_secs_f64(args.timeout);
    let mut backends = default_backends(timeout);
    for requested in &args.backends {
        let b = BackendConfig::named(requested, timeout).map_err(|e| e.to_string())?;
        if !backends.iter().any(|x| x.name == b.name) {
            backends.push(b);
        }
    }
    let mut opts = VerifyOptions {
        backends,
        case_completeness: !args.no_case_completeness,
        deterministic: args.deterministic,
        keep_tptp: args.keep_tptp.clone(),
        ..VerifyOptions::default()
    };
    if let Some(j) = args.jobs {
        opts.jobs = j.max(1);
    }
    Ok(opts)
}

fn run(args: &Args) -> u8 {
    let opts = match options(args) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let text = match std::fs::read_to_string(&args.file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.file.display());
            return EXIT_USAGE;
        }
    };
    let store = LibraryStore::new(with_document_dir(&args.libs, &args.file));
    let done = AtomicUsize::new(0);
    let on_event = |e: Event<'_>| {
        if !args.json {
            print_event(&e, &done);
        }
    };
    let report = match verify_text(&text, &store, &opts, &on_event) {
        Ok(r) => r,
        Err(e) => {
            match &e {
                VerifyError::Prepare(p) => match p.location() {
                    Some(loc) => eprintln!("{}:{loc}: {e}", args.file.display()),
                    None => eprintln!("{}: {e}", args.file.display()),
                },
                _ => eprintln!("error: {e}"),
            }
            return EXIT_USAGE;
        }
    };
    if args.json {
        print!("{}", report.to_json());
    } else {
        print_summary(&report);
        if let Some(dir) = &args.keep_tptp {
            eprintln!("TPTP problems kept in {}", dir.display());
        }
    }
    match report.status {
        Status::Verified => EXIT_VERIFIED,
        Status::Failed => EXIT_FAILED,
        Status::Unknown | Status::Pending => EXIT_UNKNOWN,
    }
}

fn print_event(e: &Event<'_>, done: &AtomicUsize) {
    match e {
        Event::Prepared { assumed, obligations } => {
            for a in *assumed {
                println!("ASSUMED {} ({}, line {})", a.label, a.kind, a.line);
            }
            println!("{} obligations", obligations.len());
        }
        Event::Checked { obligation: ob, verdict, .. } => {
            done.fetch_add(1, Ordering::Relaxed);
            let head = format!("CHECK {} (line {}) ...", ob.id, ob.origin.line);
            match verdict {
                Verdict::Proved { backend, ms } => println!("{head} PROVED by {backend} ({ms} ms)"),
                Verdict::Disproved { model, backend } => {
                    println!("{head} FAILED");
                    println!("  goal: {}", ob.goal);
                    println!("  premises:");
                    for (label, f) in &ob.premises {
                        println!("    {label}: {f}");
                    }
                    println!("  countermodel (found by {backend}):");
                    for line in model.to_string().lines() {
                        println!("    {line}");
                    }
                }
                Verdict::Unknown { reason, details } => {
                    println!("{head} UNKNOWN ({})", reason.as_str());
                    println!("  goal: {}", ob.goal);
                    println!("  premises: {}", ob.premise_labels().join(", "));
                    println!("  {details}");
                }
            }
        }
    }
}

fn print_summary(r: &VerificationReport) {
    let s = &r.stats;
    let count = |st: Status| r.lines.iter().filter(|l| l.status == st).count();
    println!();
    println!("Summary");
    println!("  obligations: {} (proved {}, failed {}, unknown {})", s.obligations, s.proved, s.failed, s.unknown);
    println!("  lines: {} verified, {} failed, {} unknown", count(Status::Verified), count(Status::Failed), count(Status::Unknown));
    println!("  wall time: {} ms", s.wall_ms);
    if !s.by_backend.is_empty() {
        let per: Vec<String> = s.by_backend.iter().map(|(b, n)| format!("{b} {n}")).collect();
        println!("  proofs by backend: {}", per.join(", "));
    }
    println!("Result: {}", r.status.as_str().to_uppercase());
}
