//! One subject's query stream: the elicitation batches followed, without
//! any visible break, by the random evaluation queries.

use serde::{Deserialize, Serialize};

use crate::confusion::QuerySet;
use crate::elicitation::{planned_queries, ElicitationState};
use crate::error::{Error, Result};
use crate::evaluation::{check_feasible, compute_m, generate_eval_queries, EvalConfig, EvaluationReport};
use crate::metric::LinearMetric;
use crate::oracle::{Oracle, OracleResponse, Query};
use crate::transcript::{Transcript, TranscriptEntry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionPlan {
    pub epsilon: f64,
    pub evaluation: EvalConfig,
}

impl Default for SessionPlan {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            evaluation: EvalConfig::default(),
        }
    }
}

impl SessionPlan {
    pub fn total_queries(&self) -> usize {
        planned_queries(self.epsilon) as usize + self.evaluation.n_queries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Elicitation,
    Evaluation,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Submission {
    Accepted,
    /// Identical resend of an earlier answer; nothing changed.
    Duplicate,
}

/// Answers must arrive for the currently served query, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMachine {
    plan: SessionPlan,
    elicitation: ElicitationState,
    /// Generated when the search converges.
    evaluation_queries: Vec<Query>,
    transcript: Transcript,
    report: Option<EvaluationReport>,
}

impl SessionMachine {
    pub fn new(query_set: &QuerySet, plan: SessionPlan) -> Result<Self> {
        check_feasible(query_set, &plan.evaluation)?;
        Ok(Self {
            plan,
            elicitation: ElicitationState::start(query_set, plan.epsilon)?,
            evaluation_queries: Vec::new(),
            transcript: Transcript::default(),
            report: None,
        })
    }

    pub fn plan(&self) -> &SessionPlan {
        &self.plan
    }

    pub fn stage(&self) -> Stage {
        if self.report.is_some() {
            Stage::Done
        } else if self.elicitation.is_converged() {
            Stage::Evaluation
        } else {
            Stage::Elicitation
        }
    }

    pub fn elicitation(&self) -> &ElicitationState {
        &self.elicitation
    }

    pub fn metric(&self) -> Option<LinearMetric> {
        self.elicitation.result()
    }

    pub fn report(&self) -> Option<&EvaluationReport> {
        self.report.as_ref()
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn answered(&self) -> usize {
        self.transcript.len()
    }

    pub fn total_queries(&self) -> usize {
        self.plan.total_queries()
    }

    fn evaluation_answered(&self) -> usize {
        self.transcript.len() - self.elicitation.history().len() * 4
    }

    pub fn current_query(&self) -> Option<&Query> {
        match self.stage() {
            Stage::Elicitation => self.elicitation.next_query(),
            Stage::Evaluation => self.evaluation_queries.get(self.evaluation_answered()),
            Stage::Done => None,
        }
    }

    pub fn submit(&mut self, query_set: &QuerySet, response: OracleResponse) -> Result<Submission> {
        if let Some(prev) = self.transcript.choice_for(response.query_id) {
            return if prev == response.choice {
                Ok(Submission::Duplicate)
            } else {
                Err(Error::ConflictingResponse(response.query_id))
            };
        }
        let query = *self.current_query().ok_or(Error::Finished)?;
        if query.query_id != response.query_id {
            return Err(Error::UnknownQuery {
                got: response.query_id,
                expected: Some(query.query_id),
            });
        }
        match self.stage() {
            Stage::Elicitation => {
                self.elicitation.submit(query_set, &response)?;
                self.transcript.push(TranscriptEntry { query, response });
                if self.elicitation.is_converged() {
                    self.evaluation_queries = generate_eval_queries(
                        query_set,
                        &self.plan.evaluation,
                        self.elicitation.next_query_id(),
                    )?;
                }
            }
            Stage::Evaluation => {
                self.transcript.push(TranscriptEntry { query, response });
                if self.evaluation_answered() == self.evaluation_queries.len() {
                    let metric = self.metric().expect("evaluation follows convergence");
                    let responses: Vec<OracleResponse> = self
                        .transcript
                        .entries()
                        .iter()
                        .skip(self.elicitation.history().len() * 4)
                        .map(|e| e.response)
                        .collect();
                    self.report = Some(compute_m(&metric, &self.evaluation_queries, &responses)?);
                }
            }
            Stage::Done => unreachable!("no current query once done"),
        }
        Ok(Submission::Accepted)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub metric: LinearMetric,
    pub report: EvaluationReport,
    pub machine: SessionMachine,
}

impl SessionOutcome {
    pub fn transcript(&self) -> &Transcript {
        self.machine.transcript()
    }
}

/// Runs a whole session against a synchronous oracle.
pub fn run_session<O: Oracle>(
    mut oracle: O,
    query_set: &QuerySet,
    plan: SessionPlan,
) -> Result<SessionOutcome> {
    let mut machine = SessionMachine::new(query_set, plan)?;
    while let Some(&query) = machine.current_query() {
        let response = oracle.answer(&query)?;
        machine.submit(query_set, response)?;
    }
    Ok(SessionOutcome {
        metric: machine.metric().expect("done implies converged"),
        report: machine.report().cloned().expect("done implies evaluated"),
        machine,
    })
}
