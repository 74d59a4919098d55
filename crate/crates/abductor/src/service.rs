//! HTTP session service for the add-a-fact loop.
//!
//! Each session holds the base task plus facts added since creation. Every
//! mutation recompiles and re-solves; the response carries the change in the
//! optimal abduced set.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use abductor_core::extract::{GraphJson, SolutionJson};
use abductor_core::generalize::{GeneralizeError, GeneralizeOptions, GeneralizedSolution, DEFAULT_MAX_ITERS};
use abductor_core::{Atom, TaskSpec};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;

use crate::analysis::run_generalize;
use crate::pipeline::{compile_task, load, parse_fact, run_program, AppError, Overrides, Solved};
use crate::solver::SolverConfig;

pub const DEFAULT_PORT: u16 = 7878;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub detail: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into(), detail: None }
    }

    fn not_found(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}"))
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        let status = match e {
            AppError::Validation(_) => StatusCode::BAD_REQUEST,
            AppError::VariantMismatch(_) => StatusCode::UNPROCESSABLE_ENTITY,
            AppError::Solver(_) => StatusCode::BAD_GATEWAY,
            AppError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(d) = self.detail {
            body["partial"] = d;
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct HistoryEntry {
    pub action: String,
    pub atom: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub cost: Option<usize>,
}

/// What a snapshot stores: enough to rebuild the session.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SessionRecord {
    id: String,
    rules: String,
    task: String,
    dynamic_facts: Vec<String>,
    history: Vec<HistoryEntry>,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub struct Bundle {
    pub solution: SolutionJson,
    pub all_optimal: Vec<Vec<String>>,
    pub graph: GraphJson,
    pub encoding_digest: String,
}

impl Bundle {
    fn new(s: &Solved) -> Self {
        let solution = s.json();
        Bundle {
            all_optimal: solution.all_optimal.clone(),
            graph: solution.graph.clone(),
            solution,
            encoding_digest: s.digest(),
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct Diff {
    pub entered: Vec<String>,
    pub left: Vec<String>,
}

impl Diff {
    fn between(before: &Bundle, after: &Bundle) -> Self {
        let b: BTreeSet<&String> = before.solution.abduced.iter().collect();
        let a: BTreeSet<&String> = after.solution.abduced.iter().collect();
        Diff {
            entered: a.difference(&b).map(|s| (*s).clone()).collect(),
            left: b.difference(&a).map(|s| (*s).clone()).collect(),
        }
    }
}

struct Session {
    record: SessionRecord,
    base: TaskSpec,
    last: Option<(Bundle, Solved)>,
}

impl Session {
    fn dynamic_atoms(&self) -> Vec<Atom> {
        self.record.dynamic_facts.iter().filter_map(|f| parse_fact(f).ok()).collect()
    }

    fn task(&self) -> TaskSpec {
        let mut t = self.base.clone();
        t.user_facts.extend(self.dynamic_atoms());
        t
    }
}

pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    cfg: SolverConfig,
    state_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(cfg: SolverConfig, state_dir: Option<PathBuf>) -> Self {
        AppState { sessions: RwLock::new(HashMap::new()), cfg, state_dir }
    }

    /// Loads every snapshot in the state directory; unreadable ones are
    /// reported and skipped.
    pub fn restore(&self) -> std::io::Result<usize> {
        let Some(dir) = &self.state_dir else { return Ok(0) };
        std::fs::create_dir_all(dir)?;
        let mut n = 0;
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            match read_snapshot(&path) {
                Ok(s) => {
                    let id = s.record.id.clone();
                    self.sessions.write().expect("session map").insert(id, Arc::new(Mutex::new(s)));
                    n += 1;
                }
                Err(e) => eprintln!("skipping snapshot {}: {e}", path.display()),
            }
        }
        Ok(n)
    }

    fn get(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions.read().expect("session map").get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }

    fn persist(&self, s: &Session) -> ApiResult<()> {
        let Some(dir) = &self.state_dir else { return Ok(()) };
        let text = serde_json::to_string_pretty(&s.record).expect("plain data serializes");
        std::fs::write(dir.join(format!("{}.json", s.record.id)), text)
            .map_err(|e| ApiError::from(AppError::Io(e.to_string())))
    }
}

fn read_snapshot(path: &Path) -> Result<Session, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let record: SessionRecord = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let base = load("rules.lp", &record.rules, "task.json", &record.task, &Overrides::default())
        .map_err(|e| e.to_string())?
        .task;
    Ok(Session { record, base, last: None })
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

async fn solve_blocking(task: TaskSpec, cfg: SolverConfig) -> ApiResult<Solved> {
    tokio::task::spawn_blocking(move || run_program(compile_task(&task, true)?, &cfg))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

/// The cached bundle, solving first when there is none.
async fn ensure_solved<'a>(s: &'a mut Session, cfg: &SolverConfig) -> ApiResult<&'a (Bundle, Solved)> {
    if s.last.is_none() {
        let solved = solve_blocking(s.task(), cfg.clone()).await?;
        s.last = Some((Bundle::new(&solved), solved));
    }
    Ok(s.last.as_ref().expect("just solved"))
}

#[derive(Deserialize)]
struct CreateRequest {
    rules: String,
    /// Task file contents, either as a JSON string or inline.
    task: Value,
}

async fn create(State(st): State<Arc<AppState>>, Json(req): Json<CreateRequest>) -> ApiResult<impl IntoResponse> {
    let task_text = match req.task {
        Value::String(s) => s,
        other => other.to_string(),
    };
    let loaded = load("rules.lp", &req.rules, "task.json", &task_text, &Overrides::default())?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let record =
        SessionRecord { id: id.clone(), rules: req.rules, task: task_text, dynamic_facts: Vec::new(), history: Vec::new() };
    let session = Session { record, base: loaded.task, last: None };
    st.persist(&session)?;
    st.sessions.write().expect("session map").insert(id.clone(), Arc::new(Mutex::new(session)));
    let warnings: Vec<String> = loaded.warnings.iter().map(ToString::to_string).collect();
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "warnings": warnings }))))
}

async fn summary(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let s = st.get(&id)?;
    let s = s.lock().await;
    let t = &s.base;
    Ok(Json(json!({
        "id": s.record.id,
        "rules": s.record.rules,
        "task": {
            "query": t.query.to_string(),
            "depth": t.depth,
            "variant": t.variant.as_str(),
            "maxAbLvl": t.max_ab_lvl(),
            "block": t.blocklist.iter().map(|b| b.atom.to_string()).collect::<Vec<_>>(),
        },
        "baseFacts": t.user_facts.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "dynamicFacts": s.record.dynamic_facts,
        "history": s.record.history,
        "lastResult": s.last.as_ref().map(|(b, _)| b),
    })))
}

async fn encoding(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let s = st.get(&id)?;
    let s = s.lock().await;
    let p = compile_task(&s.task(), true)?;
    Ok(Json(json!({ "text": p.text, "variant": p.variant.as_str(), "maxAbLvl": p.max_ab_lvl })))
}

async fn solve(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Bundle>> {
    let s = st.get(&id)?;
    let mut s = s.lock().await;
    Ok(Json(ensure_solved(&mut s, &st.cfg).await?.0.clone()))
}

#[derive(Deserialize)]
struct FactRequest {
    atom: String,
}

#[derive(Serialize)]
struct MutationResponse {
    #[serde(flatten)]
    bundle: Bundle,
    diff: Diff,
}

async fn mutate(st: &AppState, id: &str, atom_text: &str, add: bool) -> ApiResult<Json<MutationResponse>> {
    let atom = parse_fact(atom_text)?;
    let rendered = atom.to_string();
    let s = st.get(id)?;
    let mut s = s.lock().await;
    if add {
        if s.base.user_facts.contains(&atom) {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("{rendered} is already a task fact")));
        }
        if s.record.dynamic_facts.contains(&rendered) {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("{rendered} was already added")));
        }
    } else if !s.record.dynamic_facts.contains(&rendered) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("{rendered} is not an added fact")));
    }
    let before = ensure_solved(&mut s, &st.cfg).await?.0.clone();

    let mut task = s.task();
    if add {
        task.user_facts.push(atom);
    } else {
        task.user_facts.retain(|f| *f != atom);
    }
    // Nothing changes unless the solve succeeds.
    let solved = solve_blocking(task, st.cfg.clone()).await?;
    let after = Bundle::new(&solved);
    if add {
        s.record.dynamic_facts.push(rendered.clone());
    } else {
        s.record.dynamic_facts.retain(|f| *f != rendered);
    }
    let action = if add { "add_fact" } else { "remove_fact" };
    let cost = solved.status().has_models().then_some(after.solution.cost);
    s.record.history.push(HistoryEntry { action: action.into(), atom: rendered, timestamp: now(), cost });
    s.last = Some((after.clone(), solved));
    st.persist(&s)?;
    let diff = Diff::between(&before, &after);
    Ok(Json(MutationResponse { bundle: after, diff }))
}

async fn add_fact(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<FactRequest>,
) -> ApiResult<Json<MutationResponse>> {
    mutate(&st, &id, &req.atom, true).await
}

async fn remove_fact(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<FactRequest>,
) -> ApiResult<Json<MutationResponse>> {
    mutate(&st, &id, &req.atom, false).await
}

#[derive(Deserialize)]
struct GraphQuery {
    format: Option<String>,
}

async fn graph(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<GraphQuery>,
) -> ApiResult<Response> {
    let s = st.get(&id)?;
    let mut s = s.lock().await;
    let (_, solved) = ensure_solved(&mut s, &st.cfg).await?;
    match q.format.as_deref().unwrap_or("json") {
        "json" => Ok(Json(GraphJson::from(&solved.graph)).into_response()),
        "dot" => Ok(([(header::CONTENT_TYPE, "text/vnd.graphviz")], solved.graph.to_dot()).into_response()),
        other => Err(ApiError::new(StatusCode::BAD_REQUEST, format!("unknown graph format {other}"))),
    }
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase")]
struct GeneralizeRequest {
    max_iters: Option<usize>,
    pick: Option<String>,
}

fn generalize_error(e: GeneralizeError<AppError>) -> ApiError {
    match e {
        GeneralizeError::Solve(e) => e.into(),
        GeneralizeError::CapReached(_, ref partial) => {
            let detail = serde_json::to_value(partial).ok();
            ApiError { status: StatusCode::UNPROCESSABLE_ENTITY, message: e.to_string(), detail }
        }
        other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, other.to_string()),
    }
}

/// Runs the loop on the current facts without changing the session; replay
/// the trace through the fact endpoints to follow it.
async fn generalize(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Option<Json<GeneralizeRequest>>,
) -> ApiResult<Json<GeneralizedSolution>> {
    let req = body.map(|b| b.0).unwrap_or_default();
    let pick = req.pick.as_deref().map(parse_fact).transpose()?;
    let opts = GeneralizeOptions { max_iters: req.max_iters.unwrap_or(DEFAULT_MAX_ITERS), pick };
    let s = st.get(&id)?;
    let s = s.lock().await;
    let task = s.task();
    let cfg = st.cfg.clone();
    let out = tokio::task::spawn_blocking(move || run_generalize(&task, &opts, &cfg))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    out.map(Json).map_err(generalize_error)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(summary))
        .route("/sessions/{id}/encoding", get(encoding))
        .route("/sessions/{id}/solve", post(solve))
        .route("/sessions/{id}/facts", post(add_fact).delete(remove_fact))
        .route("/sessions/{id}/graph", get(graph))
        .route("/sessions/{id}/generalize", post(generalize))
        .with_state(state)
}

pub async fn serve(port: u16, state_dir: Option<PathBuf>, cfg: SolverConfig) -> std::io::Result<()> {
    let state = Arc::new(AppState::new(cfg, state_dir));
    let restored = state.restore()?;
    if restored > 0 {
        eprintln!("restored {restored} session(s)");
    }
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
