//! Shared service state: prepared query sets, live session records and the
//! store they are persisted to.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use elicit_core::session::Submission;
use elicit_core::{EvalConfig, OracleResponse, QueryId, QuerySet, SessionPlan};
use serde::Deserialize;
use serde_json::Value;
use tokio::sync::Mutex;
use uuid::Uuid;

use crate::record::{Event, LoggedEvent, RecordError, SessionConfig, SessionPhase, SessionRecord};
use crate::store::{IndexEntry, Store, StoreError};

/// Used when a create request leaves a field out.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SessionDefaults {
    pub plan: SessionPlan,
    /// `None` draws a fresh evaluation seed for every session.
    pub eval_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub dataset_id: String,
    pub epsilon: Option<f64>,
    pub eval_seed: Option<u64>,
    pub eval_queries: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no session {0}")]
    UnknownSession(String),
    #[error("no prepared dataset `{0}`")]
    UnknownDataset(String),
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("result not ready: session is in the {0:?} phase")]
    NotReady(SessionPhase),
    #[error("{source}")]
    Rejected {
        source: RecordError,
        phase: SessionPhase,
        current_query_id: Option<QueryId>,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

struct Inner {
    store: Store,
    datasets: BTreeMap<String, Arc<QuerySet>>,
    defaults: SessionDefaults,
    sessions: RwLock<HashMap<Uuid, Arc<Mutex<SessionRecord>>>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn rejected(record: &SessionRecord, source: RecordError) -> ServiceError {
    ServiceError::Rejected {
        source,
        phase: record.phase(),
        current_query_id: record.machine().current_query().map(|q| q.query_id),
    }
}

impl AppState {
    /// Opens the store and replays every indexed session. Sessions whose
    /// dataset is not loaded or whose log does not replay are skipped with a
    /// warning.
    pub fn open(
        store: Store,
        datasets: BTreeMap<String, Arc<QuerySet>>,
        defaults: SessionDefaults,
    ) -> Result<Self, ServiceError> {
        let mut sessions = HashMap::new();
        for entry in store.read_index()? {
            let Some(qs) = datasets.get(&entry.dataset_id) else {
                tracing::warn!(session = %entry.session_id, dataset = %entry.dataset_id, "dataset not loaded; session skipped");
                continue;
            };
            let events = match store.read_events(entry.session_id) {
                Ok(events) => events,
                Err(e) => {
                    tracing::warn!(session = %entry.session_id, error = %e, "unreadable session log; skipped");
                    continue;
                }
            };
            match SessionRecord::replay(&events, qs) {
                Ok(record) => {
                    sessions.insert(entry.session_id, Arc::new(Mutex::new(record)));
                }
                Err(e) => tracing::warn!(session = %entry.session_id, error = %e, "session log does not replay; skipped"),
            }
        }
        tracing::info!(sessions = sessions.len(), datasets = datasets.len(), "service state loaded");
        Ok(Self {
            inner: Arc::new(Inner {
                store,
                datasets,
                defaults,
                sessions: RwLock::new(sessions),
            }),
        })
    }

    pub fn datasets(&self) -> &BTreeMap<String, Arc<QuerySet>> {
        &self.inner.datasets
    }

    pub fn session_ids(&self) -> Vec<Uuid> {
        let mut ids: Vec<Uuid> = self.inner.sessions.read().unwrap().keys().copied().collect();
        ids.sort();
        ids
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionRecord>>, ServiceError> {
        let unknown = || ServiceError::UnknownSession(id.to_string());
        let uuid = Uuid::parse_str(id).map_err(|_| unknown())?;
        self.inner.sessions.read().unwrap().get(&uuid).cloned().ok_or_else(unknown)
    }

    fn query_set(&self, record: &SessionRecord) -> &QuerySet {
        // only sessions with a loaded dataset are ever admitted
        &self.inner.datasets[&record.config.dataset_id]
    }

    pub async fn create_session(&self, req: CreateSession) -> Result<SessionRecord, ServiceError> {
        let qs = self
            .inner
            .datasets
            .get(&req.dataset_id)
            .ok_or_else(|| ServiceError::UnknownDataset(req.dataset_id.clone()))?;
        let defaults = self.inner.defaults;
        let plan = SessionPlan {
            epsilon: req.epsilon.unwrap_or(defaults.plan.epsilon),
            evaluation: EvalConfig {
                n_queries: req.eval_queries.unwrap_or(defaults.plan.evaluation.n_queries),
                seed: req.eval_seed.or(defaults.eval_seed).unwrap_or_else(rand::random),
                min_gap: defaults.plan.evaluation.min_gap,
            },
        };
        let session_id = Uuid::new_v4();
        let created = LoggedEvent {
            at_ms: now_ms(),
            event: Event::Created {
                session_id,
                config: SessionConfig {
                    dataset_id: req.dataset_id.clone(),
                    plan,
                },
            },
        };
        let record = SessionRecord::create(&created, qs).map_err(|e| match e {
            RecordError::Session(e) => ServiceError::BadRequest(e.to_string()),
            other => ServiceError::BadRequest(other.to_string()),
        })?;
        // log first, then index: an index entry always has a log behind it
        self.inner.store.append(session_id, &created)?;
        self.inner.store.register(&IndexEntry {
            session_id,
            dataset_id: req.dataset_id,
            created_at_ms: created.at_ms,
        })?;
        self.inner
            .sessions
            .write()
            .unwrap()
            .insert(session_id, Arc::new(Mutex::new(record.clone())));
        tracing::info!(session = %session_id, dataset = %record.config.dataset_id, "session created");
        Ok(record)
    }

    /// Validates `event` on a copy, persists it, then commits, so memory
    /// never runs ahead of the log.
    async fn apply(&self, id: &str, event: Event) -> Result<(Submission, SessionRecord), ServiceError> {
        let session = self.session(id)?;
        let mut record = session.lock().await;
        let logged = LoggedEvent { at_ms: now_ms(), event };
        let mut next = record.clone();
        let before = record.phase();
        let outcome = next
            .apply(&logged, self.query_set(&record))
            .map_err(|e| rejected(&record, e))?;
        if outcome == Submission::Accepted {
            self.inner.store.append(record.session_id, &logged)?;
            *record = next;
            if record.phase() != before {
                tracing::info!(session = %record.session_id, phase = ?record.phase(), "phase changed");
            }
        }
        Ok((outcome, record.clone()))
    }

    pub async fn complete_familiarization(
        &self,
        id: &str,
        questionnaire: BTreeMap<String, Value>,
        answers: BTreeMap<String, Value>,
    ) -> Result<SessionRecord, ServiceError> {
        Ok(self.apply(id, Event::Familiarized { questionnaire, answers }).await?.1)
    }

    pub async fn submit_preference(
        &self,
        id: &str,
        response: OracleResponse,
    ) -> Result<(Submission, SessionRecord), ServiceError> {
        self.apply(id, Event::Preference { response }).await
    }

    /// A consistent copy of the record.
    pub async fn snapshot(&self, id: &str) -> Result<SessionRecord, ServiceError> {
        Ok(self.session(id)?.lock().await.clone())
    }
}
