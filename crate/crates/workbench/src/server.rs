//! HTTP service: nets are uploaded once, sessions against them are driven
//! by an observer. Sessions persist as JSON snapshots that rebuild the full
//! state by replaying the trace.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cnu_core::{Belief, Mbn, MbnJson, Net, NetJson, Observation, UpdateStrategy};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::error::{WbError, WbResult};
use crate::gen::obn_mass_of;
use crate::session::{Session, TraceEntry};

/// A net with the prior that sessions on it start from. Without a prior
/// every place is a fair coin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetBundle {
    pub net: NetJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<MbnJson>,
}

impl NetBundle {
    pub fn load(&self) -> WbResult<(Net, Mbn<f64>)> {
        let net = Net::from_json(&self.net)?;
        let prior = match &self.prior {
            Some(p) => Mbn::from_json(p)?,
            None => Mbn::independent(&vec![0.5; net.place_count()])?,
        };
        if prior.outputs().len() != net.place_count() {
            return Err(cnu_core::Error::TypeMismatch(format!(
                "prior has {} outputs but the net has {} places",
                prior.outputs().len(),
                net.place_count()
            ))
            .into());
        }
        Belief::new(prior.clone(), UpdateStrategy::Eager)?;
        if obn_mass_of(&prior, net.initial_marking())? <= 0.0 {
            return Err(cnu_core::Error::InvalidMbn("the initial marking has zero prior mass".into()).into());
        }
        Ok((net, prior))
    }
}

/// Everything needed to rebuild a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub net_id: String,
    pub bundle: NetBundle,
    #[serde(default)]
    pub observer: Option<String>,
    pub strategy: UpdateStrategy,
    pub seed: u64,
    pub trace: Vec<TraceEntry>,
}

impl SessionSnapshot {
    /// Replays the trace against a fresh session, checking that every
    /// recorded outcome recurs.
    pub fn restore(&self) -> WbResult<Session<Belief<f64>>> {
        let (net, prior) = self.bundle.load()?;
        let mut session = Session::new(net, Belief::new(prior, self.strategy)?, self.observer.clone(), self.seed);
        for entry in &self.trace {
            let report = session.fire(&entry.transition)?;
            if report.outcome != entry.outcome {
                return Err(WbError::BadRequest(format!(
                    "snapshot replay diverged at `{}`: recorded {:?}, got {:?}",
                    entry.transition, entry.outcome, report.outcome
                )));
            }
        }
        Ok(session)
    }
}

struct LiveSession {
    net_id: String,
    bundle: NetBundle,
    strategy: UpdateStrategy,
    seed: u64,
    session: Session<Belief<f64>>,
}

impl LiveSession {
    fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            net_id: self.net_id.clone(),
            bundle: self.bundle.clone(),
            observer: self.session.observer().map(str::to_string),
            strategy: self.strategy,
            seed: self.seed,
            trace: self.session.trace().to_vec(),
        }
    }
}

#[derive(Default)]
pub struct AppState {
    nets: RwLock<BTreeMap<String, NetBundle>>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<LiveSession>>>>,
    counter: AtomicU64,
    state_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new() -> Self {
        AppState::default()
    }

    /// State persisted under `dir`; existing snapshots are loaded.
    pub fn with_state_dir(dir: impl Into<PathBuf>) -> WbResult<Self> {
        let dir = dir.into();
        let state = AppState { state_dir: Some(dir.clone()), ..AppState::default() };
        let mut highest = 0;
        for (id, bundle) in read_dir_json::<NetBundle>(&dir.join("nets"))? {
            bundle.load()?;
            highest = highest.max(id_number(&id));
            state.nets.write().insert(id, bundle);
        }
        for (id, snap) in read_dir_json::<SessionSnapshot>(&dir.join("sessions"))? {
            let session = snap.restore()?;
            highest = highest.max(id_number(&id));
            let live = LiveSession { net_id: snap.net_id, bundle: snap.bundle, strategy: snap.strategy, seed: snap.seed, session };
            state.sessions.write().insert(id, Arc::new(Mutex::new(live)));
        }
        state.counter.store(highest, Ordering::SeqCst);
        Ok(state)
    }

    fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}-{}", self.counter.fetch_add(1, Ordering::SeqCst) + 1)
    }

    fn persist<T: Serialize>(&self, kind: &str, id: &str, value: &T) -> WbResult<()> {
        let Some(dir) = &self.state_dir else { return Ok(()) };
        let dir = dir.join(kind);
        let io = |e: std::io::Error| WbError::BadRequest(format!("cannot persist state: {e}"));
        std::fs::create_dir_all(&dir).map_err(io)?;
        std::fs::write(dir.join(format!("{id}.json")), serde_json::to_vec_pretty(value)?).map_err(io)
    }

    fn session(&self, id: &str) -> WbResult<Arc<Mutex<LiveSession>>> {
        self.sessions.read().get(id).cloned().ok_or_else(|| WbError::UnknownSession(id.to_string()))
    }
}

fn id_number(id: &str) -> u64 {
    id.rsplit('-').next().and_then(|n| n.parse().ok()).unwrap_or(0)
}

fn read_dir_json<T: for<'de> Deserialize<'de>>(dir: &Path) -> WbResult<Vec<(String, T)>> {
    let io = |e: std::io::Error| WbError::BadRequest(format!("cannot read state: {e}"));
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            out.push((id, serde_json::from_slice(&std::fs::read(&path).map_err(io)?)?));
        }
    }
    Ok(out)
}

/// Error body `{code, message}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

pub struct ApiError(pub WbError);

impl From<WbError> for ApiError {
    fn from(e: WbError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0.code() {
            "UnknownNet" | "UnknownSession" | "UnknownTransition" | "UnknownPlace" => StatusCode::NOT_FOUND,
            "Forbidden" => StatusCode::FORBIDDEN,
            "ImpossibleObservation" | "NoFireableBelief" => StatusCode::CONFLICT,
            _ => StatusCode::BAD_REQUEST,
        };
        (status, Json(ErrorBody { code: self.0.code().to_string(), message: self.0.to_string() })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> WbResult<T> {
    Ok(serde_json::from_slice(body)?)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NetCreated {
    pub net_id: String,
    pub places: Vec<String>,
    pub transitions: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NewSession {
    pub net_id: String,
    #[serde(default)]
    pub observer: Option<String>,
    #[serde(default = "default_strategy")]
    pub strategy: UpdateStrategy,
    #[serde(default)]
    pub seed: u64,
}

fn default_strategy() -> UpdateStrategy {
    UpdateStrategy::Eager
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TransitionInfo {
    pub name: String,
    pub pre: Vec<String>,
    pub post: Vec<String>,
    pub permitted: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub net_id: String,
    pub observer: Option<String>,
    pub strategy: UpdateStrategy,
    pub places: Vec<String>,
    pub transitions: Vec<TransitionInfo>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PlaceMarginal {
    pub place: String,
    pub p1: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BeliefView {
    pub marginals: Vec<PlaceMarginal>,
    pub is_obn: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WhatIf {
    pub transition: String,
    pub p_success: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FireRequest {
    pub transition: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FireResponse {
    pub outcome: Observation,
    #[serde(rename = "p_B")]
    pub p_b: f64,
    pub marginals: Vec<PlaceMarginal>,
}

fn named(net: &Net, values: Vec<f64>) -> Vec<PlaceMarginal> {
    net.places().iter().zip(values).map(|(place, p1)| PlaceMarginal { place: place.clone(), p1 }).collect()
}

async fn create_net(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<NetCreated> {
    let bundle: NetBundle = parse(&body)?;
    let (net, _) = bundle.load()?;
    let id = app.fresh_id("net");
    app.persist("nets", &id, &bundle)?;
    app.nets.write().insert(id.clone(), bundle);
    Ok(Json(NetCreated {
        net_id: id,
        places: net.places().to_vec(),
        transitions: net.transitions().iter().map(|t| t.name.clone()).collect(),
    }))
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<SessionCreated> {
    let req: NewSession = parse(&body)?;
    let bundle = app.nets.read().get(&req.net_id).cloned().ok_or_else(|| WbError::UnknownNet(req.net_id.clone()))?;
    let (net, prior) = bundle.load()?;
    if let Some(o) = &req.observer {
        if !net.observers().is_empty() && !net.observers().contains_key(o) {
            return Err(WbError::BadRequest(format!("unknown observer `{o}`")).into());
        }
    }
    let strategy = req.strategy.validate().map_err(WbError::from)?;
    let session = Session::new(net, Belief::new(prior, strategy).map_err(WbError::from)?, req.observer, req.seed);
    let live = LiveSession { net_id: req.net_id, bundle, strategy, seed: req.seed, session };
    let id = app.fresh_id("s");
    app.persist("sessions", &id, &live.snapshot())?;
    app.sessions.write().insert(id.clone(), Arc::new(Mutex::new(live)));
    Ok(Json(SessionCreated { session_id: id }))
}

async fn session_info(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<SessionInfo> {
    let live = app.session(&id)?;
    let live = live.lock();
    let net = live.session.net();
    let names = |set: &std::collections::BTreeSet<usize>| set.iter().map(|&p| net.places()[p].clone()).collect();
    Ok(Json(SessionInfo {
        session_id: id,
        net_id: live.net_id.clone(),
        observer: live.session.observer().map(str::to_string),
        strategy: live.strategy,
        places: net.places().to_vec(),
        transitions: net
            .transitions()
            .iter()
            .map(|t| TransitionInfo {
                name: t.name.clone(),
                pre: names(&t.pre),
                post: names(&t.post),
                permitted: net.permits(live.session.observer(), &t.name),
            })
            .collect(),
    }))
}

async fn belief(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<BeliefView> {
    let live = app.session(&id)?;
    let mut live = live.lock();
    let marginals = live.session.marginals()?;
    let is_obn = live.session.belief().mbn().is_obn().holds();
    Ok(Json(BeliefView { marginals: named(live.session.net(), marginals), is_obn }))
}

async fn whatif(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Vec<WhatIf>> {
    let live = app.session(&id)?;
    let mut live = live.lock();
    let all = live.session.whatif_all()?;
    Ok(Json(all.into_iter().map(|(transition, p_success)| WhatIf { transition, p_success }).collect()))
}

async fn fire(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<FireResponse> {
    let req: FireRequest = parse(&body)?;
    let live = app.session(&id)?;
    let mut live = live.lock();
    let report = live.session.fire(&req.transition)?;
    app.persist("sessions", &id, &live.snapshot())?;
    Ok(Json(FireResponse { outcome: report.outcome, p_b: report.p_b, marginals: named(live.session.net(), report.marginals) }))
}

async fn trace(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Vec<TraceEntry>> {
    let live = app.session(&id)?;
    let live = live.lock();
    Ok(Json(live.session.trace().to_vec()))
}

async fn snapshot(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<SessionSnapshot> {
    let live = app.session(&id)?;
    let live = live.lock();
    Ok(Json(live.snapshot()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/nets", post(create_net))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/belief", get(belief))
        .route("/sessions/{id}/whatif", get(whatif))
        .route("/sessions/{id}/fire", post(fire))
        .route("/sessions/{id}/trace", get(trace))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .with_state(state)
}

pub async fn serve(port: u16, state: AppState) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await?;
    Ok(())
}
