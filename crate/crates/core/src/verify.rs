//! The whole pipeline on one document: prepare obligations, check them on a
//! worker pool and assemble the report.

use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::backend::{default_backends, dispatch, tptp_file_name, BackendConfig, BackendKind, ConfigError, DispatchOptions, Verdict, DEFAULT_TIMEOUT};
use crate::library::LibraryStore;
use crate::obligation::Obligation;
use crate::pipeline::{prepare_with, Assumed, PrepareError, Prepared};
use crate::report::{assemble_report, VerificationReport};
use crate::sequence::SequenceOptions;
use crate::tptp::to_tptp;

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub backends: Vec<BackendConfig>,
    /// Obligations checked at the same time.
    pub jobs: usize,
    pub case_completeness: bool,
    /// One worker, built-in backends only, and all timings reported as zero.
    pub deterministic: bool,
    /// Directory that receives one TPTP file per obligation.
    pub keep_tptp: Option<PathBuf>,
    /// Libraries included in addition to the document's own.
    pub libraries: Vec<String>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            backends: default_backends(DEFAULT_TIMEOUT),
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            case_completeness: true,
            deterministic: false,
            keep_tptp: None,
            libraries: Vec::new(),
        }
    }
}

impl VerifyOptions {
    pub fn effective_backends(&self) -> Vec<BackendConfig> {
        self.backends.iter().filter(|b| !self.deterministic || b.kind != BackendKind::ExternalTptp).cloned().collect()
    }

    pub fn effective_jobs(&self) -> usize {
        if self.deterministic {
            1
        } else {
            self.jobs.max(1)
        }
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Prepare(#[from] PrepareError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write TPTP files to {path}: {source}")]
    Tptp { path: PathBuf, source: std::io::Error },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Progress notifications, delivered one at a time.
#[derive(Debug)]
pub enum Event<'a> {
    Prepared { assumed: &'a [Assumed], obligations: &'a [Obligation] },
    Checked { index: usize, obligation: &'a Obligation, verdict: &'a Verdict },
}

/// Verifies `text`; `on_event` sees the prepared obligations and then each
/// verdict as it arrives.
pub fn verify_text(text: &str, store: &LibraryStore, opts: &VerifyOptions, on_event: &(dyn Fn(Event<'_>) + Sync)) -> Result<VerificationReport, VerifyError> {
    let start = Instant::now();
    let backends = opts.effective_backends();
    BackendConfig::validate(&backends)?;
    let prepared: Prepared = prepare_with(text, store, SequenceOptions { case_completeness: opts.case_completeness }, &opts.libraries)?;
    let obligations = &prepared.obligations;
    if let Some(dir) = &opts.keep_tptp {
        let io = |source| VerifyError::Tptp { path: dir.clone(), source };
        fs::create_dir_all(dir).map_err(io)?;
        for ob in obligations {
            fs::write(dir.join(tptp_file_name(ob)), to_tptp(ob)).map_err(io)?;
        }
    }
    on_event(Event::Prepared { assumed: &prepared.assumed, obligations });
    let dopts = DispatchOptions { tptp_dir: opts.keep_tptp.clone() };
    let reporter = Mutex::new(());
    let check = |(index, ob): (usize, &Obligation)| {
        let mut verdict = dispatch(ob, &backends, &dopts);
        if opts.deterministic {
            if let Verdict::Proved { ms, .. } = &mut verdict {
                *ms = 0;
            }
        }
        let _serial = reporter.lock().unwrap_or_else(|e| e.into_inner());
        on_event(Event::Checked { index, obligation: ob, verdict: &verdict });
        Some(verdict)
    };
    let verdicts: Vec<Option<Verdict>> = if opts.effective_jobs() == 1 {
        obligations.iter().enumerate().map(check).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.effective_jobs()).build()?;
        pool.install(|| obligations.par_iter().enumerate().map(check).collect())
    };
    let wall_ms = if opts.deterministic { 0 } else { start.elapsed().as_millis() as u64 };
    Ok(assemble_report(&prepared.assumed, obligations, &verdicts, wall_ms))
}
