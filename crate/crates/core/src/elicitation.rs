//! Quarter-point binary search for the oracle's preferred threshold,
//! written as a resumable state machine so answers can arrive one at a
//! time (e.g. from a browser).
//!
//! Each iteration compares the confusions at the five points
//! `a < c < d < e < b` that split the current interval into quarters,
//! as four neighbouring pairs `(c, a)`, `(d, c)`, `(e, d)`, `(b, e)`, and
//! keeps the half of the interval that contains the oracle's peak. The
//! search stops once the interval is no wider than `epsilon` and reports
//! its midpoint as the elicited threshold, i.e. the metric's TN weight.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::confusion::{counts_at, Counts, QuerySet};
use crate::dataset::ScoredDataset;
use crate::error::{Error, Result};
use crate::metric::LinearMetric;
use crate::oracle::{Choice, Oracle, OracleResponse, Phase, Query, QueryId, QuerySide};
use crate::transcript::{Transcript, TranscriptEntry};

/// Where the search gets confusion counts for a threshold.
pub trait QuerySource {
    /// The threshold actually used for `tau` and the counts there.
    fn probe(&self, tau: f64) -> (f64, Counts);
}

/// Snaps to the nearest grid threshold.
impl QuerySource for QuerySet {
    fn probe(&self, tau: f64) -> (f64, Counts) {
        let i = self.nearest_index(tau);
        (self.thresholds()[i], self.counts()[i])
    }
}

/// Evaluates the threshold exactly, without a grid.
impl QuerySource for ScoredDataset {
    fn probe(&self, tau: f64) -> (f64, Counts) {
        (tau, counts_at(self, tau))
    }
}

impl<T: QuerySource + ?Sized> QuerySource for &T {
    fn probe(&self, tau: f64) -> (f64, Counts) {
        (**self).probe(tau)
    }
}

impl<T: QuerySource + ?Sized> QuerySource for Arc<T> {
    fn probe(&self, tau: f64) -> (f64, Counts) {
        (**self).probe(tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub tau_a: f64,
    pub tau_b: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval {
        tau_a: 0.0,
        tau_b: 1.0,
    };

    pub fn width(&self) -> f64 {
        self.tau_b - self.tau_a
    }

    pub fn midpoint(&self) -> f64 {
        (self.tau_a + self.tau_b) / 2.0
    }

    pub fn quarter_points(&self) -> QuarterPoints {
        let (a, b) = (self.tau_a, self.tau_b);
        QuarterPoints {
            a,
            c: (3.0 * a + b) / 4.0,
            d: (a + b) / 2.0,
            e: (a + 3.0 * b) / 4.0,
            b,
        }
    }
}

/// The five nominal (unsnapped) thresholds of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarterPoints {
    pub a: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub b: f64,
}

/// Which branch of the interval update fired. Responses are read in batch
/// order `(c vs a), (d vs c), (e vs d), (b vs e)`, where `Left` means the
/// higher threshold of the pair won.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkCase {
    /// `a ≻ c`: keep `[a, d]`.
    LowerEndBest,
    /// `a ≺ c ≻ d`: keep `[a, d]`.
    PeakAtC,
    /// `c ≺ d ≻ e`: keep `[c, e]`.
    PeakAtD,
    /// `d ≺ e ≻ b`: keep `[d, b]`.
    PeakAtE,
    /// None of the above: keep `[d, b]`.
    Otherwise,
}

impl ShrinkCase {
    pub fn classify(responses: &[Choice; 4]) -> Self {
        use Choice::{Left, Right};
        match *responses {
            [Right, ..] => ShrinkCase::LowerEndBest,
            [Left, Right, ..] => ShrinkCase::PeakAtC,
            [_, Left, Right, _] => ShrinkCase::PeakAtD,
            [_, _, Left, Right] => ShrinkCase::PeakAtE,
            _ => ShrinkCase::Otherwise,
        }
    }

    pub fn apply(self, interval: Interval) -> Interval {
        let p = interval.quarter_points();
        match self {
            ShrinkCase::LowerEndBest | ShrinkCase::PeakAtC => Interval {
                tau_a: p.a,
                tau_b: p.d,
            },
            ShrinkCase::PeakAtD => Interval {
                tau_a: p.c,
                tau_b: p.e,
            },
            ShrinkCase::PeakAtE | ShrinkCase::Otherwise => Interval {
                tau_a: p.d,
                tau_b: p.b,
            },
        }
    }

    /// 1-based position in the case list.
    pub fn number(self) -> u8 {
        match self {
            ShrinkCase::LowerEndBest => 1,
            ShrinkCase::PeakAtC => 2,
            ShrinkCase::PeakAtD => 3,
            ShrinkCase::PeakAtE => 4,
            ShrinkCase::Otherwise => 5,
        }
    }
}

/// Halves `interval` according to the four ordered responses of a batch.
pub fn shrink_interval(responses: &[Choice], interval: Interval) -> Result<Interval> {
    let responses: &[Choice; 4] = responses.try_into().map_err(|_| {
        Error::contract(format!(
            "an interval update needs exactly 4 responses, got {}",
            responses.len()
        ))
    })?;
    Ok(ShrinkCase::classify(responses).apply(interval))
}

/// Number of halvings until the width drops to `epsilon` or below.
pub fn planned_iterations(epsilon: f64) -> u32 {
    let mut width = 1.0;
    let mut k = 0;
    while width > epsilon {
        width /= 2.0;
        k += 1;
    }
    k
}

pub fn planned_queries(epsilon: f64) -> u32 {
    4 * planned_iterations(epsilon)
}

/// The four comparisons of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryBatch {
    pub iteration: u32,
    pub points: QuarterPoints,
    pub queries: [Query; 4],
}

impl QueryBatch {
    fn materialize<S: QuerySource + ?Sized>(
        source: &S,
        iteration: u32,
        interval: Interval,
        first_id: u32,
    ) -> Self {
        let points = interval.quarter_points();
        let side = |tau: f64| {
            let (threshold, counts) = source.probe(tau);
            QuerySide::new(threshold, counts)
        };
        let [a, c, d, e, b] = [points.a, points.c, points.d, points.e, points.b].map(side);
        let pairs = [(c, a), (d, c), (e, d), (b, e)];
        let mut k = 0;
        let queries = pairs.map(|(left, right)| {
            let q = Query {
                query_id: QueryId(first_id + k),
                phase: Phase::Elicitation,
                left,
                right,
            };
            k += 1;
            q
        });
        Self {
            iteration,
            points,
            queries,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub before: Interval,
    pub responses: [Choice; 4],
    pub case: ShrinkCase,
    pub after: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingResponses,
    Converged,
}

/// What a call to [`ElicitationState::submit`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Submitted {
    Recorded,
    /// Same answer to an already-answered pending query; nothing changed.
    Duplicate,
    /// The batch completed and the next one is pending.
    Advanced(ShrinkCase),
    Converged(ShrinkCase, LinearMetric),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitationState {
    epsilon: f64,
    interval: Interval,
    /// Completed iterations.
    iteration: u32,
    pending: Option<QueryBatch>,
    collected: [Option<Choice>; 4],
    result: Option<LinearMetric>,
    history: Vec<IterationRecord>,
    next_query_id: u32,
}

impl ElicitationState {
    /// Starts on `[0, 1]` with the first batch pending. Query ids count up
    /// from 0.
    pub fn start<S: QuerySource + ?Sized>(source: &S, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::validation(format!(
                "tolerance epsilon={epsilon} outside (0, 1)"
            )));
        }
        let interval = Interval::UNIT;
        Ok(Self {
            epsilon,
            interval,
            iteration: 0,
            pending: Some(QueryBatch::materialize(source, 0, interval, 0)),
            collected: [None; 4],
            result: None,
            history: Vec::new(),
            next_query_id: 4,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn status(&self) -> Status {
        if self.result.is_some() {
            Status::Converged
        } else {
            Status::AwaitingResponses
        }
    }

    pub fn is_converged(&self) -> bool {
        self.result.is_some()
    }

    pub fn result(&self) -> Option<LinearMetric> {
        self.result
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.history
    }

    pub fn pending(&self) -> Option<&QueryBatch> {
        self.pending.as_ref()
    }

    /// First id not yet handed out.
    pub fn next_query_id(&self) -> QueryId {
        QueryId(self.next_query_id)
    }

    /// The lowest-numbered unanswered query of the pending batch.
    pub fn next_query(&self) -> Option<&Query> {
        let batch = self.pending.as_ref()?;
        batch
            .queries
            .iter()
            .zip(&self.collected)
            .find(|(_, c)| c.is_none())
            .map(|(q, _)| q)
    }

    /// Records one answer. Completing a batch halves the interval and
    /// either materializes the next batch or converges.
    pub fn submit<S: QuerySource + ?Sized>(
        &mut self,
        source: &S,
        response: &OracleResponse,
    ) -> Result<Submitted> {
        let Some(batch) = &self.pending else {
            return Err(Error::Finished);
        };
        let slot = batch
            .queries
            .iter()
            .position(|q| q.query_id == response.query_id)
            .ok_or(Error::UnknownQuery {
                got: response.query_id,
                expected: self.next_query().map(|q| q.query_id),
            })?;
        match self.collected[slot] {
            Some(prev) if prev == response.choice => return Ok(Submitted::Duplicate),
            Some(_) => return Err(Error::ConflictingResponse(response.query_id)),
            None => self.collected[slot] = Some(response.choice),
        }
        let Some(responses) = self.collected.iter().copied().collect::<Option<Vec<_>>>() else {
            return Ok(Submitted::Recorded);
        };
        let responses: [Choice; 4] = responses.try_into().expect("four slots");
        let case = ShrinkCase::classify(&responses);
        let before = self.interval;
        self.interval = case.apply(before);
        self.history.push(IterationRecord {
            iteration: self.iteration,
            before,
            responses,
            case,
            after: self.interval,
        });
        self.iteration += 1;
        self.collected = [None; 4];
        if self.interval.width() <= self.epsilon {
            self.pending = None;
            let metric = LinearMetric::from_threshold(self.interval.midpoint())?;
            self.result = Some(metric);
            return Ok(Submitted::Converged(case, metric));
        }
        self.pending = Some(QueryBatch::materialize(
            source,
            self.iteration,
            self.interval,
            self.next_query_id,
        ));
        self.next_query_id += 4;
        Ok(Submitted::Advanced(case))
    }
}

/// Drives a synchronous oracle until the search converges.
pub fn run_to_completion<O, S>(
    mut oracle: O,
    source: &S,
    epsilon: f64,
) -> Result<(LinearMetric, Transcript)>
where
    O: Oracle,
    S: QuerySource + ?Sized,
{
    let mut state = ElicitationState::start(source, epsilon)?;
    let mut transcript = Transcript::default();
    while let Some(&query) = state.next_query() {
        let response = oracle.answer(&query)?;
        state.submit(source, &response)?;
        transcript.push(TranscriptEntry { query, response });
    }
    let metric = state.result().expect("loop exits only on convergence");
    Ok((metric, transcript))
}
