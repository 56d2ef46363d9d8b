//! A session's state, rebuilt from the events in its log.
//!
//! Live requests and startup replay go through the same
//! [`SessionRecord::apply`], so a replayed record serializes to the same
//! bytes as the one that was in memory before the restart.

use std::collections::BTreeMap;

use elicit_core::session::Submission;
use elicit_core::{EvaluationReport, LinearMetric, OracleResponse, QuerySet, SessionMachine, SessionPlan, Stage};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    Familiarization,
    Elicitation,
    Evaluation,
    Done,
}

/// Settings fixed at creation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub dataset_id: String,
    pub plan: SessionPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Created {
        session_id: Uuid,
        config: SessionConfig,
    },
    Familiarized {
        questionnaire: BTreeMap<String, Value>,
        answers: BTreeMap<String, Value>,
    },
    Preference {
        response: OracleResponse,
    },
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    /// Unix time in milliseconds.
    pub at_ms: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("session is in the {actual:?} phase, expected {expected:?}")]
    WrongPhase {
        expected: SessionPhase,
        actual: SessionPhase,
    },
    #[error(transparent)]
    Session(#[from] elicit_core::Error),
    #[error("corrupt session log: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: Uuid,
    pub created_at_ms: u64,
    pub config: SessionConfig,
    pub questionnaire: BTreeMap<String, Value>,
    pub familiarization_answers: BTreeMap<String, Value>,
    pub familiarized_at_ms: Option<u64>,
    /// Arrival time of each transcript entry, in transcript order.
    pub answered_at_ms: Vec<u64>,
    machine: SessionMachine,
}

impl SessionRecord {
    /// Builds a record from its `Created` event.
    pub fn create(first: &LoggedEvent, query_set: &QuerySet) -> Result<Self, RecordError> {
        let Event::Created { session_id, config } = &first.event else {
            return Err(RecordError::Corrupt("log does not start with a created event".into()));
        };
        Ok(Self {
            session_id: *session_id,
            created_at_ms: first.at_ms,
            config: config.clone(),
            questionnaire: BTreeMap::new(),
            familiarization_answers: BTreeMap::new(),
            familiarized_at_ms: None,
            answered_at_ms: Vec::new(),
            machine: SessionMachine::new(query_set, config.plan)?,
        })
    }

    /// Rebuilds a record from a whole log.
    pub fn replay(events: &[LoggedEvent], query_set: &QuerySet) -> Result<Self, RecordError> {
        let (first, rest) = events
            .split_first()
            .ok_or_else(|| RecordError::Corrupt("empty session log".into()))?;
        let mut record = Self::create(first, query_set)?;
        for (i, e) in rest.iter().enumerate() {
            match record.apply(e, query_set)? {
                Submission::Accepted => {}
                Submission::Duplicate => {
                    return Err(RecordError::Corrupt(format!("event {} repeats an earlier answer", i + 1)))
                }
            }
        }
        Ok(record)
    }

    pub fn phase(&self) -> SessionPhase {
        if self.familiarized_at_ms.is_none() {
            return SessionPhase::Familiarization;
        }
        match self.machine.stage() {
            Stage::Elicitation => SessionPhase::Elicitation,
            Stage::Evaluation => SessionPhase::Evaluation,
            Stage::Done => SessionPhase::Done,
        }
    }

    pub fn machine(&self) -> &SessionMachine {
        &self.machine
    }

    pub fn metric(&self) -> Option<LinearMetric> {
        self.machine.metric()
    }

    pub fn report(&self) -> Option<&EvaluationReport> {
        self.machine.report()
    }

    fn expect_phase(&self, expected: SessionPhase) -> Result<(), RecordError> {
        let actual = self.phase();
        if actual == expected {
            Ok(())
        } else {
            Err(RecordError::WrongPhase { expected, actual })
        }
    }

    /// Applies one event. `Duplicate` means an identical resend of an
    /// earlier answer; the record is unchanged and nothing should be logged.
    pub fn apply(&mut self, event: &LoggedEvent, query_set: &QuerySet) -> Result<Submission, RecordError> {
        match &event.event {
            Event::Created { .. } => Err(RecordError::Corrupt("second created event".into())),
            Event::Familiarized { questionnaire, answers } => {
                self.expect_phase(SessionPhase::Familiarization)?;
                self.questionnaire = questionnaire.clone();
                self.familiarization_answers = answers.clone();
                self.familiarized_at_ms = Some(event.at_ms);
                Ok(Submission::Accepted)
            }
            Event::Preference { response } => {
                if self.phase() == SessionPhase::Familiarization {
                    return Err(RecordError::WrongPhase {
                        expected: SessionPhase::Elicitation,
                        actual: SessionPhase::Familiarization,
                    });
                }
                let outcome = self.machine.submit(query_set, *response)?;
                if outcome == Submission::Accepted {
                    self.answered_at_ms.push(event.at_ms);
                }
                Ok(outcome)
            }
        }
    }
}
