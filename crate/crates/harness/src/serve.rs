//! The engine as an HTTP service.
//!
//! - `POST /translate`: job request JSON in, translation result JSON out
//! - `POST /admin/stm`: replace the STM endpoint; answers with the previous one
//! - `GET /admin/config`: active configuration with secrets redacted

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use scale_core::{DemoPool, Engine, Error, JobRequest, LanguageRegistry, StmEndpointConfig};
use serde_json::json;

struct AppState {
    engine: Arc<Engine>,
    pool: Arc<DemoPool>,
    registry: LanguageRegistry,
}

fn status_for(error: &Error) -> StatusCode {
    match error {
        Error::InvalidJob(_)
        | Error::UnknownLanguage(_)
        | Error::MalformedTag(_)
        | Error::InvalidConfig(_)
        | Error::PivotNotConfigured => StatusCode::BAD_REQUEST,
        Error::StmUnavailable { .. }
        | Error::StmProtocolError(_)
        | Error::StmEmptyResult
        | Error::LlmUnavailable { .. }
        | Error::LlmProtocolError(_)
        | Error::LlmEmptyCompletion => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn error_response(error: Error) -> Response {
    let body = match &error {
        Error::InvalidJob(violations) => json!({"error": error.to_string(), "violations": violations}),
        _ => json!({"error": error.to_string()}),
    };
    (status_for(&error), Json(body)).into_response()
}

async fn translate(State(state): State<Arc<AppState>>, Json(request): Json<JobRequest>) -> Response {
    let defaults = state.engine.config().defaults;
    let job = match request.resolve(&state.registry, &defaults) {
        Ok(job) => job,
        Err(e) => return error_response(e),
    };
    match state.engine.translate(&job, &state.pool).await {
        Ok(result) => Json(result).into_response(),
        Err(e) => error_response(e),
    }
}

async fn update_stm(State(state): State<Arc<AppState>>, Json(stm): Json<StmEndpointConfig>) -> Response {
    match state.engine.update_stm(stm) {
        Ok(mut previous) => {
            if previous.api_key.is_some() {
                previous.api_key = Some("***".into());
            }
            tracing::info!(model_id = %state.engine.config().stm.model_id, "STM endpoint replaced");
            Json(json!({"previous": previous})).into_response()
        }
        Err(e) => error_response(e),
    }
}

async fn show_config(State(state): State<Arc<AppState>>) -> Response {
    Json(state.engine.config().redacted()).into_response()
}

pub fn router(engine: Arc<Engine>, pool: Arc<DemoPool>) -> Router {
    let state = Arc::new(AppState {
        engine,
        pool,
        registry: LanguageRegistry::bundled(),
    });
    Router::new()
        .route("/translate", post(translate))
        .route("/admin/stm", post(update_stm))
        .route("/admin/config", get(show_config))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, engine: Arc<Engine>, pool: Arc<DemoPool>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "engine service listening");
    axum::serve(listener, router(engine, pool))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
