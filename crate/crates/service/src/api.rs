//! HTTP routes and their JSON payloads.
//!
//! Payloads meant for the subject carry out-of-100 display numbers only:
//! no thresholds, no metric, and no hint of which phase a query belongs to.

use std::collections::BTreeMap;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use elicit_core::session::Submission;
use elicit_core::{Choice, DisplayStats, EvaluationReport, LinearMetric, OracleResponse, QueryId, Transcript};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use uuid::Uuid;

use crate::familiarization::{familiarization, Familiarization};
use crate::record::{RecordError, SessionConfig, SessionPhase, SessionRecord};
use crate::state::{AppState, CreateSession, ServiceError};

pub const PROMPT: &str = "Which of these two tests would you rather the hospital use?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub answered: usize,
    pub total: usize,
}

impl Progress {
    fn of(record: &SessionRecord) -> Self {
        Self {
            answered: record.machine().answered(),
            total: record.machine().total_queries(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: Uuid,
    pub phase: SessionPhase,
    pub config: SessionConfig,
    pub familiarization: Familiarization,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamiliarizationAnswers {
    #[serde(default)]
    pub questionnaire: BTreeMap<String, Value>,
    #[serde(default)]
    pub answers: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseAck {
    pub phase: SessionPhase,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultView {
    pub session_id: Uuid,
    pub metric: LinearMetric,
    /// e.g. "0.125 TN + 0.875 TP".
    pub metric_display: String,
    /// Rounded agreement percentage.
    pub m: u32,
    pub report: EvaluationReport,
}

impl ResultView {
    fn of(record: &SessionRecord) -> Option<Self> {
        let (metric, report) = (record.metric()?, record.report()?);
        Some(Self {
            session_id: record.session_id,
            metric,
            metric_display: metric.to_string(),
            m: report.m_display(),
            report: report.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum QueryView {
    Familiarization {
        familiarization: Familiarization,
    },
    Query {
        query_id: QueryId,
        prompt: String,
        left: DisplayStats,
        right: DisplayStats,
        progress: Progress,
    },
    Done {
        result: ResultView,
    },
}

impl QueryView {
    pub fn of(record: &SessionRecord) -> Self {
        if record.phase() == SessionPhase::Familiarization {
            return QueryView::Familiarization {
                familiarization: familiarization(),
            };
        }
        match record.machine().current_query() {
            Some(q) => QueryView::Query {
                query_id: q.query_id,
                prompt: PROMPT.into(),
                left: q.left.display,
                right: q.right.display,
                progress: Progress::of(record),
            },
            None => QueryView::Done {
                result: ResultView::of(record).expect("no pending query only once done"),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceIn {
    pub query_id: QueryId,
    pub choice: Choice,
    #[serde(default)]
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckStatus {
    Accepted,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceAck {
    pub status: AckStatus,
    pub query_id: QueryId,
    pub progress: Progress,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub phase: SessionPhase,
    pub record: SessionRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub n_total: u64,
    pub pi: f64,
    pub thresholds: usize,
    pub distinct_confusions: usize,
}

/// Error body: a stable machine-readable code plus a message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<SessionPhase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_query_id: Option<QueryId>,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        use elicit_core::Error as Core;
        let message = self.to_string();
        let (status, code, phase, current) = match &self {
            ServiceError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session", None, None),
            ServiceError::UnknownDataset(_) => (StatusCode::NOT_FOUND, "unknown_dataset", None, None),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "invalid_request", None, None),
            ServiceError::NotReady(p) => (StatusCode::CONFLICT, "not_ready", Some(*p), None),
            ServiceError::Rejected { source, phase, current_query_id } => {
                let (status, code) = match source {
                    RecordError::WrongPhase { .. } => (StatusCode::CONFLICT, "wrong_phase"),
                    RecordError::Session(Core::UnknownQuery { .. }) => (StatusCode::CONFLICT, "stale_query"),
                    RecordError::Session(Core::ConflictingResponse(_)) => (StatusCode::CONFLICT, "conflicting_response"),
                    RecordError::Session(Core::Finished) => (StatusCode::CONFLICT, "session_done"),
                    _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
                };
                (status, code, Some(*phase), *current_query_id)
            }
            ServiceError::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage", None, None),
        };
        if status.is_server_error() {
            tracing::error!(error = %message, "request failed");
        }
        let body = ErrorBody {
            error: code.into(),
            message,
            phase,
            current_query_id: current,
        };
        (status, Json(body)).into_response()
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
}

async fn list_datasets(State(state): State<AppState>) -> Json<Vec<DatasetInfo>> {
    Json(
        state
            .datasets()
            .iter()
            .map(|(id, qs)| DatasetInfo {
                id: id.clone(),
                n_total: qs.n_total(),
                pi: qs.pi(),
                thresholds: qs.len(),
                distinct_confusions: qs.distinct_count(),
            })
            .collect(),
    )
}

async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ServiceError> {
    let record = state.create_session(body(payload)?).await?;
    Ok((
        StatusCode::CREATED,
        Json(Created {
            session_id: record.session_id,
            phase: record.phase(),
            config: record.config.clone(),
            familiarization: familiarization(),
        }),
    ))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ServiceError> {
    let record = state.snapshot(&id).await?;
    Ok(Json(SessionView {
        phase: record.phase(),
        record,
    }))
}

async fn post_familiarization(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<FamiliarizationAnswers>, JsonRejection>,
) -> Result<Json<PhaseAck>, ServiceError> {
    let answers = body(payload)?;
    let record = state
        .complete_familiarization(&id, answers.questionnaire, answers.answers)
        .await?;
    Ok(Json(PhaseAck {
        phase: record.phase(),
        progress: Progress::of(&record),
    }))
}

async fn get_query(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<QueryView>, ServiceError> {
    Ok(Json(QueryView::of(&state.snapshot(&id).await?)))
}

async fn post_preference(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<PreferenceIn>, JsonRejection>,
) -> Result<Json<PreferenceAck>, ServiceError> {
    let p = body(payload)?;
    let response = OracleResponse {
        query_id: p.query_id,
        choice: p.choice,
        latency_ms: p.latency_ms,
    };
    let (outcome, record) = state.submit_preference(&id, response).await?;
    Ok(Json(PreferenceAck {
        status: match outcome {
            Submission::Accepted => AckStatus::Accepted,
            Submission::Duplicate => AckStatus::Duplicate,
        },
        query_id: p.query_id,
        progress: Progress::of(&record),
        done: record.phase() == SessionPhase::Done,
    }))
}

async fn get_result(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<ResultView>, ServiceError> {
    let record = state.snapshot(&id).await?;
    ResultView::of(&record)
        .map(Json)
        .ok_or(ServiceError::NotReady(record.phase()))
}

async fn get_transcript(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Transcript>, ServiceError> {
    Ok(Json(state.snapshot(&id).await?.machine().transcript().clone()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/datasets", get(list_datasets))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/familiarization", post(post_familiarization))
        .route("/sessions/{id}/query", get(get_query))
        .route("/sessions/{id}/preference", post(post_preference))
        .route("/sessions/{id}/result", get(get_result))
        .route("/sessions/{id}/transcript", get(get_transcript))
        .with_state(state)
}
