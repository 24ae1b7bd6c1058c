//! HTTP service: solve jobs, seeded simulation and live board/wait advice.
//!
//! Networks and solved tables are immutable and shared; each session sits
//! behind its own lock, so events of one session are applied in order.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sota_core::network::ExpandedGraph;
use sota_core::policy::{extract_policy, simulate, Policy, SimulationReport};
use sota_core::solver::{solve, Decision, HeuristicConfig, Mode, Solution, SolveConfig, SolveStats};
use tokio::sync::Semaphore;

use crate::source::LoadedNetwork;

pub const API_SCHEMA: &str = "sota-api/1";
/// Largest trajectory count one simulate request may ask for.
pub const MAX_SIMULATIONS: u64 = 10_000_000;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind: kind.into(),
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not-found", message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, "inconsistent-event", message)
    }

    fn exhausted(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "budget-exhausted", message)
    }

    fn invalid(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-parameter", message)
    }
}

impl From<sota_core::Error> for ApiError {
    fn from(e: sota_core::Error) -> Self {
        let status = match e {
            sota_core::Error::Io { .. } | sota_core::Error::Json(_) | sota_core::Error::PolicyGap { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.kind(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "kind": self.kind, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// A budget given as ticks or as a duration string such as `"22.5m"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Budget {
    Ticks(usize),
    Text(String),
}

/// Trip selection shared by the request bodies.
#[derive(Clone, Debug, Deserialize)]
pub struct TripRequest {
    pub network: String,
    #[serde(default)]
    pub origin: Option<String>,
    #[serde(default)]
    pub destination: Option<String>,
    /// Defaults to the grid horizon.
    #[serde(default)]
    pub budget: Option<Budget>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub heuristics: Option<HeuristicConfig>,
}

fn default_mode() -> Mode {
    Mode::Plain
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct TableKey {
    network: String,
    origin: usize,
    destination: usize,
    budget: usize,
    mode: Mode,
    heuristics: String,
}

/// A solved table and the policy read from it.
pub struct Table {
    pub solution: Solution,
    pub policy: Policy,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done { result: Value },
    Failed { error: Value },
}

pub struct AppState {
    networks: BTreeMap<String, LoadedNetwork>,
    tables: Mutex<HashMap<TableKey, Arc<Table>>>,
    jobs: Mutex<BTreeMap<u64, JobStatus>>,
    next_job: AtomicU64,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<Session>>>>,
    next_session: AtomicU64,
    pool: Arc<Semaphore>,
    log: Option<Mutex<std::fs::File>>,
}

impl AppState {
    pub fn new(networks: Vec<LoadedNetwork>, workers: usize, log: Option<PathBuf>) -> anyhow::Result<Self> {
        let log = match log {
            Some(p) => Some(Mutex::new(
                std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&p)
                    .map_err(|e| anyhow::anyhow!("opening session log {}: {e}", p.display()))?,
            )),
            None => None,
        };
        Ok(AppState {
            networks: networks.into_iter().map(|n| (n.id.clone(), n)).collect(),
            tables: Mutex::new(HashMap::new()),
            jobs: Mutex::new(BTreeMap::new()),
            next_job: AtomicU64::new(1),
            sessions: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
            pool: Arc::new(Semaphore::new(workers.max(1))),
            log,
        })
    }

    fn network(&self, id: &str) -> ApiResult<&LoadedNetwork> {
        self.networks
            .get(id)
            .ok_or_else(|| ApiError::not_found(format!("unknown network `{id}`")))
    }

    fn append_log(&self, record: &Value) {
        if let Some(file) = &self.log {
            let mut f = file.lock().expect("log lock");
            // A failed log write must not fail the request it records.
            let _ = writeln!(f, "{record}");
        }
    }

    /// Resolves a trip request into the graph, budget and solver config.
    fn resolve(&self, req: &TripRequest) -> ApiResult<(Arc<ExpandedGraph>, TableKey, SolveConfig)> {
        let net = self.network(&req.network)?;
        let (o, d) = match (&req.origin, &req.destination, &net.default_od) {
            (Some(o), Some(d), _) => (o.clone(), d.clone()),
            (None, None, Some((o, d))) => (o.clone(), d.clone()),
            _ => {
                return Err(ApiError::invalid(
                    "origin and destination are required for this network",
                ))
            }
        };
        let graph = ExpandedGraph::build_by_id(Arc::clone(&net.network), &o, &d)?;
        let grid = net.grid();
        let budget = match &req.budget {
            None => grid.budget_ticks,
            Some(Budget::Ticks(t)) => *t,
            Some(Budget::Text(s)) => grid.parse_ticks(s)?,
        };
        if budget > grid.budget_ticks {
            return Err(sota_core::Error::BudgetExceedsGrid {
                budget,
                horizon: grid.budget_ticks,
            }
            .into());
        }
        let mut cfg = SolveConfig::new(budget, req.mode);
        if let Some(h) = req.heuristics {
            h.validate()?;
            cfg.heuristics = h;
        }
        let key = TableKey {
            network: req.network.clone(),
            origin: graph.origin,
            destination: graph.destination,
            budget,
            mode: req.mode,
            heuristics: serde_json::to_string(&cfg.heuristics).unwrap_or_default(),
        };
        Ok((Arc::new(graph), key, cfg))
    }

    fn cached(&self, key: &TableKey) -> Option<Arc<Table>> {
        self.tables.lock().expect("table lock").get(key).cloned()
    }

    /// Solves on the blocking pool, at most `workers` at a time.
    async fn table(&self, graph: Arc<ExpandedGraph>, key: TableKey, cfg: SolveConfig) -> ApiResult<Arc<Table>> {
        if let Some(t) = self.cached(&key) {
            return Ok(t);
        }
        let _permit = self.pool.acquire().await.expect("semaphore is never closed");
        if let Some(t) = self.cached(&key) {
            return Ok(t);
        }
        let table = tokio::task::spawn_blocking(move || -> sota_core::Result<Table> {
            let solution = solve(&graph, &cfg)?;
            let policy = extract_policy(&solution);
            Ok(Table { solution, policy })
        })
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
        let table = Arc::new(table);
        self.tables.lock().expect("table lock").insert(key, Arc::clone(&table));
        Ok(table)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/networks", get(list_networks))
        .route("/solve", post(start_solve))
        .route("/jobs/{id}", get(job_status))
        .route("/simulate", post(run_simulation))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_state))
        .route("/sessions/{id}/events", post(post_event))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

async fn list_networks(State(state): State<Arc<AppState>>) -> Json<Value> {
    let networks: Vec<Value> = state
        .networks
        .values()
        .map(|n| {
            json!({
                "id": n.id,
                "stations": n.network.stations.len(),
                "lines": n.network.lines.len(),
                "delta_seconds": n.grid().delta_seconds,
                "horizon_ticks": n.grid().budget_ticks,
                "default_od": n.default_od,
            })
        })
        .collect();
    Json(json!({ "schema": API_SCHEMA, "networks": networks }))
}

#[derive(Serialize)]
struct SolveResult<'a> {
    network: &'a str,
    origin: &'a str,
    destination: &'a str,
    mode: Mode,
    budget_ticks: usize,
    budget_minutes: f64,
    root_utility: f64,
    stats: &'a SolveStats,
}

async fn start_solve(
    State(state): State<Arc<AppState>>,
    Json(req): Json<TripRequest>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let (graph, key, cfg) = state.resolve(&req)?;
    let id = state.next_job.fetch_add(1, Ordering::Relaxed);
    state.jobs.lock().expect("job lock").insert(id, JobStatus::Queued);
    let worker = Arc::clone(&state);
    tokio::spawn(async move {
        worker.jobs.lock().expect("job lock").insert(id, JobStatus::Running);
        let status = match worker.table(Arc::clone(&graph), key.clone(), cfg).await {
            Ok(table) => {
                let grid = graph.network.grid;
                let result = SolveResult {
                    network: &key.network,
                    origin: graph.station_id(graph.origin),
                    destination: graph.station_id(graph.destination),
                    mode: key.mode,
                    budget_ticks: key.budget,
                    budget_minutes: grid.minutes(key.budget),
                    root_utility: table.solution.root_utility(),
                    stats: table.solution.stats(),
                };
                JobStatus::Done {
                    result: serde_json::to_value(result).unwrap_or(Value::Null),
                }
            }
            Err(e) => JobStatus::Failed {
                error: json!({ "kind": e.kind, "message": e.message }),
            },
        };
        worker.jobs.lock().expect("job lock").insert(id, status);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": id, "status": "queued" }))))
}

async fn job_status(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<Value>> {
    let jobs = state.jobs.lock().expect("job lock");
    let status = jobs
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("unknown job {id}")))?;
    let mut body = serde_json::to_value(status).unwrap_or(Value::Null);
    body["job_id"] = json!(id);
    Ok(Json(body))
}

#[derive(Deserialize)]
struct SimulateRequest {
    #[serde(flatten)]
    trip: TripRequest,
    n: u64,
    #[serde(default)]
    seed: u64,
}

async fn run_simulation(
    State(state): State<Arc<AppState>>,
    Json(req): Json<SimulateRequest>,
) -> ApiResult<Json<SimulationReport>> {
    if req.n == 0 || req.n > MAX_SIMULATIONS {
        return Err(ApiError::invalid(format!("n must lie in 1..={MAX_SIMULATIONS}")));
    }
    let (graph, key, cfg) = state.resolve(&req.trip)?;
    let table = state.table(graph, key, cfg).await?;
    let report = tokio::task::spawn_blocking(move || simulate(&table.policy, req.n, req.seed))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(report))
}

/// Where the passenger is in the trip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Waiting at a station for the remaining lines.
    Waiting,
    /// A line has just arrived; board it or keep waiting.
    Deciding,
    Riding,
    Arrived,
    Failed,
}

/// Passenger-declared events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Event {
    /// `line` arrives `tick` ticks after the passenger reached the station.
    LineArrived {
        line: String,
        tick: usize,
    },
    Boarded {
        line: String,
    },
    /// Off at `station`; `ticks` is the ride time since boarding.
    Alighted {
        station: String,
        #[serde(default)]
        ticks: Option<usize>,
    },
    TickAdvance {
        n: usize,
    },
}

#[derive(Clone, Copy, Debug)]
struct Riding {
    /// Global line index.
    line: usize,
    from: usize,
    /// Remaining budget at boarding.
    t_board: usize,
    elapsed: usize,
}

pub struct Session {
    id: String,
    network: String,
    table: Arc<Table>,
    budget: usize,
    status: Status,
    station: usize,
    /// Remaining budget on reaching the current station.
    t_entry: usize,
    r: usize,
    /// Local candidate lines still awaited.
    remaining: u32,
    /// Local line that arrived last and may be boarded.
    pending: Option<usize>,
    riding: Option<Riding>,
    events: Vec<Event>,
    note: Option<String>,
}

#[derive(Serialize)]
struct Advice {
    decision: Decision,
    line: String,
    u_board: f64,
    u_wait: Option<f64>,
}

impl Session {
    fn graph(&self) -> &Arc<ExpandedGraph> {
        self.table.solution.graph()
    }

    fn t(&self) -> usize {
        match self.riding {
            Some(r) => r.t_board - r.elapsed,
            None => self.t_entry - self.r,
        }
    }

    fn line_ids(&self, station: usize, set: u32) -> Vec<String> {
        (0..32)
            .filter(|k| set & (1 << k) != 0)
            .filter_map(|k| self.graph().line_id(station, k).map(str::to_string))
            .collect()
    }

    fn state_json(&self) -> Value {
        let g = self.graph();
        json!({
            "status": self.status,
            "station": g.station_id(self.station),
            "t": self.t(),
            "r": self.r,
            "remaining": self.line_ids(self.station, self.remaining),
            "pending": self.pending.and_then(|k| g.line_id(self.station, k)),
            "riding": self.riding.map(|r| g.network.lines[r.line].id.clone()),
            "note": self.note,
        })
    }

    /// Enters `station` with `t` ticks left, minus `except` (a global line).
    fn enter(&mut self, station: usize, t: usize, except: Option<usize>) {
        let g = Arc::clone(self.graph());
        self.station = station;
        self.t_entry = t;
        self.r = 0;
        self.pending = None;
        self.riding = None;
        if station == g.destination {
            self.status = Status::Arrived;
            self.remaining = 0;
            return;
        }
        match g.station(station) {
            Some(sn) => {
                let skip = except.and_then(|i| sn.local(i)).map_or(0, |k| 1 << k);
                self.remaining = sn.full_set() & !skip;
                self.status = Status::Waiting;
                self.check_hope();
            }
            None => {
                self.remaining = 0;
                self.status = Status::Failed;
                self.note = Some("no line from here reaches the destination".into());
            }
        }
    }

    /// Fails the trip when no awaited line can still arrive in time.
    fn check_hope(&mut self) {
        let g = Arc::clone(self.graph());
        let Some(sn) = g.station(self.station) else { return };
        let hope = (0..sn.m()).filter(|k| self.remaining & (1 << k) != 0).any(|k| {
            let w = &sn.lines[k].waiting;
            (self.r + 1..=self.t_entry).any(|x| w.at(x) > 0.0)
        });
        if !hope {
            self.status = Status::Failed;
            self.note = Some("no awaited line can arrive within the budget".into());
        }
    }

    fn advice(&self, line: usize, rest: u32, t: usize, r: usize) -> ApiResult<Advice> {
        let decision = self.table.policy.decide(self.station, line, rest, t, r)?;
        let choice = self.table.solution.arrival(self.station, line, rest, t, r)?;
        Ok(Advice {
            decision,
            line: self.graph().line_id(self.station, line).unwrap_or_default().to_string(),
            u_board: choice.u_board,
            u_wait: if rest == 0 { Some(0.0) } else { choice.u_wait },
        })
    }

    fn global_line(&self, id: &str) -> ApiResult<usize> {
        self.graph()
            .network
            .line_index(id)
            .ok_or_else(|| ApiError::conflict(format!("unknown line `{id}`")))
    }

    fn apply(&mut self, event: &Event) -> ApiResult<Option<Advice>> {
        if matches!(self.status, Status::Arrived | Status::Failed) {
            return Err(ApiError::conflict("the trip is over"));
        }
        let g = Arc::clone(self.graph());
        match event {
            Event::LineArrived { line, tick } => {
                if self.status == Status::Riding {
                    return Err(ApiError::conflict("the passenger is on board"));
                }
                let global = self.global_line(line)?;
                let local = g
                    .station(self.station)
                    .and_then(|sn| sn.local(global))
                    .ok_or_else(|| ApiError::conflict(format!("line `{line}` is not a candidate here")))?;
                if self.remaining & (1 << local) == 0 {
                    return Err(ApiError::conflict(format!(
                        "line `{line}` already arrived at this station"
                    )));
                }
                if *tick < self.r {
                    return Err(ApiError::conflict(format!(
                        "tick {tick} is before the current wait of {}",
                        self.r
                    )));
                }
                if *tick > self.t_entry {
                    return Err(ApiError::exhausted(format!(
                        "tick {tick} is past the {} ticks left on arrival",
                        self.t_entry
                    )));
                }
                self.r = *tick;
                self.remaining &= !(1 << local);
                self.pending = Some(local);
                self.status = Status::Deciding;
                self.advice(local, self.remaining, self.t(), self.r).map(Some)
            }
            Event::Boarded { line } => {
                let global = self.global_line(line)?;
                let local = g.station(self.station).and_then(|sn| sn.local(global));
                if self.pending.is_none() || self.pending != local {
                    return Err(ApiError::conflict(format!("line `{line}` is not at the platform")));
                }
                self.riding = Some(Riding {
                    line: global,
                    from: self.station,
                    t_board: self.t(),
                    elapsed: 0,
                });
                self.pending = None;
                self.status = Status::Riding;
                Ok(None)
            }
            Event::TickAdvance { n } => {
                if let Some(mut ride) = self.riding {
                    if ride.elapsed + n > ride.t_board {
                        return Err(ApiError::exhausted("the budget runs out on board"));
                    }
                    ride.elapsed += n;
                    self.riding = Some(ride);
                    return Ok(None);
                }
                if self.r + n > self.t_entry {
                    return Err(ApiError::exhausted(format!("only {} ticks are left", self.t())));
                }
                self.r += n;
                self.pending = None;
                self.status = Status::Waiting;
                self.check_hope();
                Ok(None)
            }
            Event::Alighted { station, ticks } => {
                let Some(ride) = self.riding else {
                    return Err(ApiError::conflict("the passenger is not on board"));
                };
                let to = g
                    .network
                    .station_index(station)
                    .map_err(|e| ApiError::conflict(e.to_string()))?;
                let line = &g.network.lines[ride.line];
                let (Some(a), Some(b)) = (line.position(ride.from), line.position(to)) else {
                    return Err(ApiError::conflict(format!(
                        "line `{}` does not stop at `{station}`",
                        line.id
                    )));
                };
                if b <= a {
                    return Err(ApiError::conflict(format!(
                        "`{station}` is not downstream on line `{}`",
                        line.id
                    )));
                }
                let ride_ticks = ticks.unwrap_or(ride.elapsed).max(1);
                if ride_ticks < ride.elapsed {
                    return Err(ApiError::conflict(
                        "ride time is shorter than the time already advanced",
                    ));
                }
                if ride_ticks > ride.t_board {
                    return Err(ApiError::exhausted("the budget ran out before alighting"));
                }
                let t = ride.t_board - ride_ticks;
                // What the policy says about staying on past this stop.
                let stay = match g.station(to).and_then(|sn| sn.local(ride.line).map(|k| (sn, k))) {
                    Some((sn, k)) if to != g.destination => {
                        let rest = sn.full_set() & !(1 << k);
                        let decision = self.table.policy.decide(to, k, rest, t, 0)?;
                        let choice = self.table.solution.arrival(to, k, rest, t, 0)?;
                        Some(Advice {
                            decision,
                            line: line.id.clone(),
                            u_board: choice.u_board,
                            u_wait: if rest == 0 { Some(0.0) } else { choice.u_wait },
                        })
                    }
                    _ => None,
                };
                self.enter(to, t, Some(ride.line));
                Ok(stay)
            }
        }
    }
}

#[derive(Deserialize)]
struct SessionRequest {
    #[serde(flatten)]
    trip: TripRequest,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(req): Json<SessionRequest>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let (graph, key, cfg) = state.resolve(&req.trip)?;
    let budget = key.budget;
    let table = state.table(graph, key, cfg).await?;
    let id = format!("s{}", state.next_session.fetch_add(1, Ordering::Relaxed));
    let origin = table.solution.graph().origin;
    let mut session = Session {
        id: id.clone(),
        network: req.trip.network.clone(),
        table,
        budget,
        status: Status::Waiting,
        station: origin,
        t_entry: budget,
        r: 0,
        remaining: 0,
        pending: None,
        riding: None,
        events: Vec::new(),
        note: None,
    };
    session.enter(origin, budget, None);
    let body = json!({
        "session_id": id,
        "network": session.network,
        "origin": session.graph().station_id(origin),
        "destination": session.graph().station_id(session.graph().destination),
        "mode": session.table.policy.mode(),
        "approximate": session.table.policy.is_approximate(),
        "budget_ticks": budget,
        "root_utility": session.table.solution.root_utility(),
        "state": session.state_json(),
    });
    state.append_log(&json!({ "session": id, "created": req_echo(&req.trip, budget) }));
    state
        .sessions
        .lock()
        .expect("session lock")
        .insert(id, Arc::new(tokio::sync::Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)))
}

fn req_echo(trip: &TripRequest, budget: usize) -> Value {
    json!({
        "network": trip.network,
        "origin": trip.origin,
        "destination": trip.destination,
        "budget_ticks": budget,
        "mode": trip.mode,
    })
}

fn session(state: &AppState, id: &str) -> ApiResult<Arc<tokio::sync::Mutex<Session>>> {
    state
        .sessions
        .lock()
        .expect("session lock")
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("unknown session `{id}`")))
}

async fn session_state(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let s = s.lock().await;
    Ok(Json(json!({
        "session_id": s.id,
        "network": s.network,
        "budget_ticks": s.budget,
        "events": s.events,
        "state": s.state_json(),
    })))
}

async fn post_event(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(event): Json<Event>,
) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let mut s = s.lock().await;
    let advice = s.apply(&event)?;
    s.events.push(event.clone());
    let body = json!({
        "session_id": s.id,
        "step": s.events.len(),
        "advice": advice,
        "state": s.state_json(),
    });
    state.append_log(&json!({ "session": s.id, "event": event, "response": body }));
    Ok(Json(body))
}
