//! HTTP interface to the verifier: submit a document, poll the job for
//! per-line and per-obligation results, and list examples and libraries.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use natproof::backend::{default_backends, BackendConfig, Verdict};
use natproof::corpus;
use natproof::library::LibraryStore;
use natproof::obligation::Obligation;
use natproof::pipeline::Assumed;
use natproof::report::{assemble_report, LineReport, ObligationReport, Stats, Status, VerificationReport};
use natproof::verify::{verify_text, Event, VerifyError, VerifyOptions};
use serde::{Deserialize, Serialize};
use serde_json::json;
use uuid::Uuid;

pub const DEFAULT_MAX_BODY: usize = 256 * 1024;
pub const DEFAULT_JOB_TTL: Duration = Duration::from_secs(3600);

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub lib_dirs: Vec<PathBuf>,
    pub timeout: Duration,
    pub max_body: usize,
    /// Finished jobs are forgotten this long after submission.
    pub job_ttl: Duration,
    /// Obligations checked in parallel within one job.
    pub jobs: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            lib_dirs: Vec::new(),
            timeout: natproof::backend::DEFAULT_TIMEOUT,
            max_body: DEFAULT_MAX_BODY,
            job_ttl: DEFAULT_JOB_TTL,
            jobs: VerifyOptions::default().jobs,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct JobError {
    pub message: String,
    pub line: Option<u32>,
    pub column: Option<u32>,
}

struct Job {
    created: Instant,
    state: JobState,
    assumed: Vec<Assumed>,
    obligations: Vec<Obligation>,
    verdicts: Vec<Option<Verdict>>,
    report: Option<VerificationReport>,
    error: Option<JobError>,
}

/// What `GET /api/jobs/{id}` returns.
#[derive(Debug, Serialize)]
pub struct JobView {
    pub id: String,
    pub state: JobState,
    /// Overall status; `error` when the document could not be processed.
    pub status: String,
    pub lines: Vec<LineReport>,
    pub obligations: Vec<ObligationReport>,
    pub stats: Stats,
    pub error: Option<JobError>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct RequestOptions {
    pub timeout_s: Option<f64>,
    pub deterministic: bool,
    pub case_completeness: Option<bool>,
    /// Extra backends by name, as on the command line.
    pub backends: Vec<String>,
}

#[derive(Debug, Deserialize)]
pub struct VerifyRequest {
    pub text: String,
    #[serde(default)]
    pub libraries: Vec<String>,
    #[serde(default)]
    pub options: RequestOptions,
}

#[derive(Clone)]
pub struct AppState {
    config: Arc<ServiceConfig>,
    store: Arc<LibraryStore>,
    jobs: Arc<Mutex<HashMap<Uuid, Job>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> AppState {
        let store = LibraryStore::new(config.lib_dirs.clone());
        AppState { config: Arc::new(config), store: Arc::new(store), jobs: Arc::default() }
    }

    fn purge(&self) {
        let ttl = self.config.job_ttl;
        self.jobs.lock().expect("job store").retain(|_, j| j.created.elapsed() < ttl);
    }
}

pub fn app(state: AppState) -> Router {
    let max_body = state.config.max_body;
    Router::new()
        .route("/api/verify", post(submit))
        .route("/api/jobs/{id}", get(job))
        .route("/api/jobs/{id}/report", get(job_report))
        .route("/api/examples", get(examples))
        .route("/api/examples/{name}", get(example))
        .route("/api/libraries", get(libraries))
        .route("/api/libraries/{name}", get(library))
        .layer(DefaultBodyLimit::max(max_body))
        .with_state(state)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn options(cfg: &ServiceConfig, req: &RequestOptions) -> Result<VerifyOptions, String> {
    let timeout = match req.timeout_s {
        Some(t) if t.is_finite() && t > 0.0 => Duration::from_secs_f64(t),
        Some(t) => return Err(format!("timeout_s must be positive, got {t}")),
        None => cfg.timeout,
    };
    let mut backends = default_backends(timeout);
    for requested in &req.backends {
        let b = BackendConfig::named(requested, timeout).map_err(|e| e.to_string())?;
        if !backends.iter().any(|x| x.name == b.name) {
            backends.push(b);
        }
    }
    Ok(VerifyOptions {
        backends,
        jobs: cfg.jobs,
        case_completeness: req.case_completeness.unwrap_or(true),
        deterministic: req.deterministic,
        keep_tptp: None,
        libraries: Vec::new(),
    })
}

async fn submit(State(state): State<AppState>, body: Bytes) -> Response {
    state.purge();
    let req: VerifyRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    let mut opts = match options(&state.config, &req.options) {
        Ok(o) => o,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    opts.libraries = req.libraries;
    let id = Uuid::new_v4();
    let job = Job {
        created: Instant::now(),
        state: JobState::Queued,
        assumed: Vec::new(),
        obligations: Vec::new(),
        verdicts: Vec::new(),
        report: None,
        error: None,
    };
    state.jobs.lock().expect("job store").insert(id, job);
    let worker = state.clone();
    tokio::task::spawn_blocking(move || run_job(&worker, id, &req.text, &opts));
    (StatusCode::ACCEPTED, Json(json!({ "id": id.to_string() }))).into_response()
}

fn run_job(state: &AppState, id: Uuid, text: &str, opts: &VerifyOptions) {
    let update = |f: &mut dyn FnMut(&mut Job)| {
        if let Some(job) = state.jobs.lock().expect("job store").get_mut(&id) {
            f(job);
        }
    };
    update(&mut |j| j.state = JobState::Running);
    let on_event = |e: Event<'_>| match e {
        Event::Prepared { assumed, obligations } => update(&mut |j| {
            j.assumed = assumed.to_vec();
            j.obligations = obligations.to_vec();
            j.verdicts = vec![None; obligations.len()];
        }),
        Event::Checked { index, verdict, .. } => update(&mut |j| j.verdicts[index] = Some(verdict.clone())),
    };
    let result = verify_text(text, &state.store, opts, &on_event);
    update(&mut |j| {
        j.state = JobState::Done;
        match &result {
            Ok(r) => j.report = Some(r.clone()),
            Err(e) => {
                let loc = match e {
                    VerifyError::Prepare(p) => p.location(),
                    _ => None,
                };
                j.error = Some(JobError { message: e.to_string(), line: loc.map(|l| l.line), column: loc.map(|l| l.column) });
            }
        }
    });
}

fn parse_id(id: &str) -> Option<Uuid> {
    Uuid::parse_str(id).ok()
}

async fn job(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    state.purge();
    let jobs = state.jobs.lock().expect("job store");
    let Some(job) = parse_id(&id).and_then(|u| jobs.get(&u)) else {
        return error(StatusCode::NOT_FOUND, format!("unknown job `{id}`"));
    };
    let report = match &job.report {
        Some(r) => r.clone(),
        None => assemble_report(&job.assumed, &job.obligations, &job.verdicts, 0),
    };
    let status = if job.error.is_some() {
        "error"
    } else if job.state == JobState::Done {
        report.status.as_str()
    } else {
        Status::Pending.as_str()
    };
    let view = JobView {
        id,
        state: job.state,
        status: status.to_string(),
        lines: report.lines,
        obligations: report.obligations,
        stats: report.stats,
        error: job.error.clone(),
    };
    Json(view).into_response()
}

/// The finished report, byte for byte as the command line prints it.
async fn job_report(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    state.purge();
    let jobs = state.jobs.lock().expect("job store");
    let Some(job) = parse_id(&id).and_then(|u| jobs.get(&u)) else {
        return error(StatusCode::NOT_FOUND, format!("unknown job `{id}`"));
    };
    match (&job.report, &job.error) {
        (Some(r), _) => ([(header::CONTENT_TYPE, "application/json")], r.to_json()).into_response(),
        (None, Some(e)) => (StatusCode::UNPROCESSABLE_ENTITY, Json(e.clone())).into_response(),
        (None, None) => error(StatusCode::CONFLICT, "job has not finished"),
    }
}

async fn examples() -> Response {
    let list: Vec<_> = corpus::examples().into_iter().map(|e| json!({ "name": e.entry.name, "file": e.entry.file })).collect();
    Json(list).into_response()
}

async fn example(Path(name): Path<String>) -> Response {
    match corpus::example(&name) {
        Some(e) => Json(json!({ "name": e.entry.name, "file": e.entry.file, "text": e.text })).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown example `{name}`")),
    }
}

async fn libraries(State(state): State<AppState>) -> Response {
    Json(state.store.available()).into_response()
}

async fn library(State(state): State<AppState>, Path(name): Path<String>) -> Response {
    match state.store.source(&name) {
        Ok((text, source, _)) => Json(json!({ "name": name, "source": source, "text": text })).into_response(),
        Err(e) => error(StatusCode::NOT_FOUND, e.to_string()),
    }
}
