//! JSON-over-HTTP access to one solved planning session.
//!
//! Every response body is a JSON object with a `revision` field; errors are
//! `{"error": ..., "revision": ...}`.

mod session;

use std::collections::{BTreeMap, HashMap};
use std::future::Future;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use cplanner::grid::MoveAction;
use cplanner::textgen::{action_phrase, contrast_sentence, generate, ExplanationType};
use cplanner::{ActionId, Error, ExtValue, StateId};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;

pub use session::{PropertyChoice, Session};

/// Shared handle to the current session. Cloning is cheap.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Shared>,
}

#[derive(Default)]
struct Shared {
    current: RwLock<Option<Arc<Session>>>,
    writer: Mutex<()>,
}

impl AppState {
    pub fn new(session: Session) -> Self {
        let state = AppState::default();
        *state.inner.current.write().unwrap() = Some(Arc::new(session));
        state
    }

    pub fn session(&self) -> Option<Arc<Session>> {
        self.inner.current.read().unwrap().clone()
    }

    /// Builds a replacement from the current session and swaps it in whole.
    fn update<F>(&self, f: F) -> Result<Arc<Session>, ApiError>
    where
        F: FnOnce(&Session) -> cplanner::Result<Session>,
    {
        let _writer = self.inner.writer.lock().unwrap();
        let old = self.session().ok_or_else(ApiError::no_session)?;
        let new = Arc::new(f(&old).map_err(|e| ApiError::bad_request(e, &old))?);
        *self.inner.current.write().unwrap() = Some(new.clone());
        Ok(new)
    }
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    message: String,
    revision: Option<u64>,
}

impl ApiError {
    fn no_session() -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: "no map loaded".into(),
            revision: None,
        }
    }

    fn new(status: StatusCode, message: impl ToString, session: &Session) -> Self {
        ApiError {
            status,
            message: message.to_string(),
            revision: Some(session.revision),
        }
    }

    fn bad_request(message: impl ToString, session: &Session) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message, session)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.message, "revision": self.revision });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn current(state: &AppState) -> Result<Arc<Session>, ApiError> {
    state.session().ok_or_else(ApiError::no_session)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/map", get(get_map))
        .route("/api/policy", get(get_policy))
        .route("/api/states/{id}/factors", get(get_factors))
        .route("/api/explain", post(post_explain))
        .route("/api/contrast", get(get_contrast))
        .route("/api/config", put(put_config))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve<F>(listener: TcpListener, state: AppState, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    if let Ok(addr) = listener.local_addr() {
        log::info!("listening on http://{addr}");
    }
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    let revision = state.session().map(|s| s.revision);
    Json(json!({ "status": "ok", "revision": revision }))
}

fn phrase(s: &Session, a: ActionId) -> String {
    action_phrase(&s.mdp, a).to_string()
}

fn critical_ids(s: &Session) -> Vec<usize> {
    s.report.critical.members.iter().map(|s| s.0).collect()
}

async fn get_map(State(state): State<AppState>) -> ApiResult {
    let s = current(&state)?;
    let map = &s.map;
    let masks: Vec<Vec<&str>> = map.masks.iter().map(|m| m.iter().map(MoveAction::phrase).collect()).collect();
    Ok(Json(json!({
        "revision": s.revision,
        "width": map.width,
        "height": map.height,
        "p_success": map.noise.p_success,
        "cells": map.cells.iter().map(|c| c.code().to_string()).collect::<Vec<_>>(),
        "masks": masks,
        "start": map.start,
        "destination": map.destination(),
    })))
}

async fn get_policy(State(state): State<AppState>) -> ApiResult {
    let s = current(&state)?;
    let states: Vec<Value> = s
        .values
        .iter(&s.mdp)
        .map(|(id, v)| json!({ "state": id, "value": v, "action": s.policy.action(id).map(|a| phrase(&s, a)) }))
        .collect();
    let route = s.route.as_ref().map(|r| {
        let steps: Vec<Value> = r
            .steps
            .iter()
            .map(|st| json!({ "state": st.state, "action": phrase(&s, st.action) }))
            .collect();
        json!({ "steps": steps, "terminal": r.terminal })
    });
    Ok(Json(json!({
        "revision": s.revision,
        "property": s.values.property,
        "alpha": s.alpha,
        "states": states,
        "route": route,
        "critical": critical_ids(&s),
    })))
}

fn by_phrase<V: serde::Serialize>(s: &Session, m: &BTreeMap<ActionId, V>) -> serde_json::Map<String, Value> {
    m.iter().map(|(&a, v)| (phrase(s, a), json!(v))).collect()
}

async fn get_factors(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = current(&state)?;
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, format!("unknown state {id}"), &s);
    let state_id = id.parse::<usize>().map(StateId).map_err(|_| not_found())?;
    if !s.mdp.contains(state_id) {
        return Err(not_found());
    }
    let value = s.values.value(state_id).map_err(|e| ApiError::bad_request(e, &s))?;
    let critical = s.report.critical.contains(state_id);
    let mut doc = json!({
        "revision": s.revision,
        "state": state_id,
        "value": value,
        "critical": critical,
        "target": s.mdp.is_target(state_id),
        "chosen": s.policy.action(state_id).map(|a| phrase(&s, a)),
    });
    let obj = doc.as_object_mut().expect("object literal");
    let actions = s.mdp.enabled_actions(state_id).map_err(|e| ApiError::bad_request(e, &s))?;
    if actions.is_empty() {
        // The bounds of an empty action set collapse onto the state value.
        let bound = if s.mdp.is_target(state_id) { ExtValue::zero() } else { value };
        obj.insert("lambda_min".into(), json!(bound));
        obj.insert("lambda_max".into(), json!(bound));
        obj.insert("omega".into(), json!({}));
        obj.insert("zeta".into(), json!({}));
        obj.insert("footprint".into(), json!({}));
        if critical {
            obj.insert("epsilon".into(), json!({}));
        }
        return Ok(Json(doc));
    }
    let f = cplanner::factors::state_factors(&s.mdp, &s.values, &s.policy, &s.report.critical, state_id)
        .map_err(|e| ApiError::bad_request(e, &s))?;
    obj.insert("lambda_min".into(), json!(f.bounds.lambda_min));
    obj.insert("lambda_max".into(), json!(f.bounds.lambda_max));
    obj.insert("omega".into(), Value::Object(by_phrase(&s, &f.bounds.per_action)));
    obj.insert("zeta".into(), Value::Object(by_phrase(&s, &f.responsibility)));
    obj.insert("footprint".into(), Value::Object(by_phrase(&s, &f.footprint)));
    if critical {
        obj.insert("epsilon".into(), Value::Object(by_phrase(&s, &f.constrictiveness)));
    }
    Ok(Json(doc))
}

#[derive(Deserialize)]
struct ExplainRequest {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    state: Option<usize>,
}

async fn post_explain(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let s = current(&state)?;
    let req: ExplainRequest = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e, &s))?;
    let kind: ExplanationType = req.kind.parse().map_err(|e: Error| ApiError::bad_request(e, &s))?;
    let route = s.route().map_err(|e| ApiError::bad_request(e, &s))?;
    let doc = generate(kind, &s.mdp, route, &s.report, req.state.map(StateId)).map_err(|e| ApiError::bad_request(e, &s))?;
    let mut body = serde_json::to_value(&doc).expect("explanation serializes");
    let obj = body.as_object_mut().expect("struct serializes to an object");
    obj.insert("text".into(), json!(doc.text()));
    obj.insert("revision".into(), json!(s.revision));
    Ok(Json(body))
}

async fn get_contrast(State(state): State<AppState>, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let s = current(&state)?;
    let field = |k: &str| q.get(k).ok_or_else(|| ApiError::bad_request(format!("missing query parameter `{k}`"), &s));
    let id = field("state")?
        .parse::<usize>()
        .map(StateId)
        .map_err(|e| ApiError::bad_request(format!("state: {e}"), &s))?;
    let action = |k| -> Result<ActionId, ApiError> {
        s.mdp.action_by_label(field(k)?).map_err(|e| ApiError::bad_request(e, &s))
    };
    let (chosen, alt) = (action("chosen")?, action("alt")?);
    let sentence = contrast_sentence(&s.mdp, &s.report, id, chosen, alt).map_err(|e| ApiError::bad_request(e, &s))?;
    Ok(Json(json!({
        "revision": s.revision,
        "state": id,
        "chosen": phrase(&s, chosen),
        "alt": phrase(&s, alt),
        "sentence": sentence,
    })))
}

#[derive(Deserialize)]
struct ConfigRequest {
    alpha: f64,
}

async fn put_config(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let req: ConfigRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return Err(ApiError::bad_request(e, &*current(&state)?)),
    };
    let s = state.update(|old| old.with_alpha(req.alpha))?;
    log::info!("alpha set to {} (revision {})", s.alpha, s.revision);
    Ok(Json(json!({
        "revision": s.revision,
        "alpha": s.alpha,
        "critical": critical_ids(&s),
    })))
}
