//! Pairwise queries and the oracles that answer them.
//!
//! Human subjects are not an [`Oracle`] here: a live session suspends on its
//! pending query until the answer arrives over HTTP.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confusion::{ConfusionVector, Counts, DisplayStats};
use crate::error::{Error, Result};
use crate::metric::{LinearMetric, Preference};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryId(pub u32);

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Elicitation,
    Evaluation,
}

/// One classifier in a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuerySide {
    /// Grid threshold the confusion was computed at.
    pub threshold: f64,
    pub confusion: ConfusionVector,
    pub counts: Counts,
    pub display: DisplayStats,
}

impl QuerySide {
    pub fn new(threshold: f64, counts: Counts) -> Self {
        Self {
            threshold,
            confusion: ConfusionVector::from_counts(&counts),
            counts,
            display: DisplayStats::from_counts(&counts),
        }
    }
}

/// "Which of these two classifiers do you prefer?"
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: QueryId,
    pub phase: Phase,
    pub left: QuerySide,
    pub right: QuerySide,
}

/// A forced choice: there is no tie answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Left,
    Right,
}

impl Choice {
    pub fn flipped(self) -> Self {
        match self {
            Choice::Left => Choice::Right,
            Choice::Right => Choice::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub query_id: QueryId,
    pub choice: Choice,
    #[serde(default)]
    pub latency_ms: u64,
}

impl OracleResponse {
    pub fn new(query_id: QueryId, choice: Choice) -> Self {
        Self {
            query_id,
            choice,
            latency_ms: 0,
        }
    }
}

pub trait Oracle {
    fn answer(&mut self, query: &Query) -> Result<OracleResponse>;
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn answer(&mut self, query: &Query) -> Result<OracleResponse> {
        (**self).answer(query)
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn answer(&mut self, query: &Query) -> Result<OracleResponse> {
        (**self).answer(query)
    }
}

/// Answers by a fixed linear metric. Exact ties go to the right side.
#[derive(Debug, Clone, Copy)]
pub struct LinearOracle {
    metric: LinearMetric,
}

impl LinearOracle {
    pub fn new(metric: LinearMetric) -> Self {
        Self { metric }
    }

    pub fn metric(&self) -> LinearMetric {
        self.metric
    }

    pub fn choose(&self, query: &Query) -> Result<Choice> {
        Ok(
            match self
                .metric
                .prefer(&query.left.confusion, &query.right.confusion, 0.0)?
            {
                Preference::Left => Choice::Left,
                Preference::Right | Preference::Tie => Choice::Right,
            },
        )
    }
}

impl Oracle for LinearOracle {
    fn answer(&mut self, query: &Query) -> Result<OracleResponse> {
        Ok(OracleResponse::new(query.query_id, self.choose(query)?))
    }
}

/// Flips its base oracle's answer with probability `flip_p`. The coin for a
/// query depends only on the seed and the query id.
#[derive(Debug, Clone)]
pub struct NoisyOracle<O> {
    base: O,
    flip_p: f64,
    seed: u64,
}

impl<O: Oracle> NoisyOracle<O> {
    pub fn new(base: O, flip_p: f64, seed: u64) -> Result<Self> {
        if !(0.0..0.5).contains(&flip_p) {
            return Err(Error::validation(format!(
                "flip probability {flip_p} outside [0, 0.5)"
            )));
        }
        Ok(Self { base, flip_p, seed })
    }

    fn flips(&self, id: QueryId) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::from(id.0));
        rng.random::<f64>() < self.flip_p
    }
}

impl<O: Oracle> Oracle for NoisyOracle<O> {
    fn answer(&mut self, query: &Query) -> Result<OracleResponse> {
        let mut r = self.base.answer(query)?;
        if self.flips(query.query_id) {
            r.choice = r.choice.flipped();
        }
        Ok(r)
    }
}

/// Replays a fixed list of choices in order.
#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    script: Vec<Choice>,
    next: usize,
}

impl ScriptedOracle {
    pub fn new(script: Vec<Choice>) -> Self {
        Self { script, next: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.script.len() - self.next
    }
}

impl Oracle for ScriptedOracle {
    fn answer(&mut self, query: &Query) -> Result<OracleResponse> {
        let choice = *self
            .script
            .get(self.next)
            .ok_or(Error::ScriptExhausted { answered: self.next })?;
        self.next += 1;
        Ok(OracleResponse::new(query.query_id, choice))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn query(id: u32, left: (u64, u64), right: (u64, u64)) -> Query {
        // 10 samples, 4 positive
        let side = |(tp, tn): (u64, u64)| {
            QuerySide::new(
                0.5,
                Counts {
                    true_pos: tp,
                    true_neg: tn,
                    false_pos: 6 - tn,
                    false_neg: 4 - tp,
                    n_total: 10,
                },
            )
        };
        Query {
            query_id: QueryId(id),
            phase: Phase::Elicitation,
            left: side(left),
            right: side(right),
        }
    }

    #[test]
    fn linear_oracle_follows_metric() {
        let mut o = LinearOracle::new(LinearMetric::new(0.125).unwrap());
        // left (0.4, 0.1) scores 0.3625, right (0.1, 0.4) scores 0.1375
        assert_eq!(o.answer(&query(0, (4, 1), (1, 4))).unwrap().choice, Choice::Left);
        assert_eq!(o.answer(&query(1, (1, 4), (4, 1))).unwrap().choice, Choice::Right);
    }

    #[test]
    fn ties_go_right() {
        let mut o = LinearOracle::new(LinearMetric::new(0.3).unwrap());
        assert_eq!(o.answer(&query(0, (2, 3), (2, 3))).unwrap().choice, Choice::Right);
    }

    #[test]
    fn tn_only_metric_prefers_larger_tn() {
        let mut o = LinearOracle::new(LinearMetric::new(1.0).unwrap());
        assert_eq!(o.answer(&query(0, (4, 2), (0, 3))).unwrap().choice, Choice::Right);
        assert_eq!(o.answer(&query(1, (0, 5), (4, 3))).unwrap().choice, Choice::Left);
    }

    #[test]
    fn zero_noise_matches_base() {
        let base = LinearOracle::new(LinearMetric::new(0.4).unwrap());
        let mut noisy = NoisyOracle::new(base, 0.0, 9).unwrap();
        let mut clean = base;
        for id in 0..200 {
            let q = query(id, ((id % 5) as u64, (id % 7) as u64), (2, 2));
            assert_eq!(noisy.answer(&q).unwrap(), clean.answer(&q).unwrap());
        }
    }

    #[test]
    fn flip_probability_is_validated() {
        let base = LinearOracle::new(LinearMetric::new(0.4).unwrap());
        assert!(NoisyOracle::new(base, 0.5, 0).is_err());
        assert!(NoisyOracle::new(base, -0.1, 0).is_err());
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let base = LinearOracle::new(LinearMetric::new(0.4).unwrap());
        let run = |seed| {
            let mut o = NoisyOracle::new(base, 0.3, seed).unwrap();
            (0..100)
                .map(|id| o.answer(&query(id, (4, 1), (1, 4))).unwrap().choice)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn scripted_replays_then_errors() {
        let mut o = ScriptedOracle::new(vec![Choice::Left, Choice::Right, Choice::Left]);
        let got: Vec<Choice> = (0..3)
            .map(|i| o.answer(&query(i, (1, 1), (2, 2))).unwrap().choice)
            .collect();
        assert_eq!(got, [Choice::Left, Choice::Right, Choice::Left]);
        assert!(matches!(
            o.answer(&query(3, (1, 1), (2, 2))),
            Err(Error::ScriptExhausted { answered: 3 })
        ));
        let mut empty = ScriptedOracle::new(vec![]);
        assert!(empty.answer(&query(0, (1, 1), (2, 2))).is_err());
    }
}
